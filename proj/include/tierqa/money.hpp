#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace tierqa {

/// Exact currency amount stored as integer pico-dollars (1e-12 USD).
///
/// Token prices are quoted in dollars per million tokens with at most six
/// fractional digits, which makes one token cost an integral number of
/// pico-dollars. Every cost in the system is therefore an exact integer and
/// sums never drift.
class Money {
public:
    static constexpr std::int64_t kPicoPerDollar = 1'000'000'000'000;

    constexpr Money() = default;
    static constexpr Money from_pico(std::int64_t pico) { return Money(pico); }

    /// Parses a plain decimal dollar amount such as "0.00125" or "13.77".
    /// Throws std::invalid_argument on malformed text or more than 12
    /// fractional digits.
    static Money parse(std::string_view text);

    constexpr std::int64_t pico() const { return pico_; }
    double to_double() const { return static_cast<double>(pico_) / kPicoPerDollar; }

    /// Shortest exact decimal rendering ("0.00125", "0", "-1.5").
    std::string to_string() const;

    constexpr Money& operator+=(Money other) {
        pico_ += other.pico_;
        return *this;
    }
    constexpr Money& operator-=(Money other) {
        pico_ -= other.pico_;
        return *this;
    }
    friend constexpr Money operator+(Money a, Money b) { return Money(a.pico_ + b.pico_); }
    friend constexpr Money operator-(Money a, Money b) { return Money(a.pico_ - b.pico_); }
    friend constexpr Money operator*(Money a, std::int64_t k) { return Money(a.pico_ * k); }
    friend constexpr auto operator<=>(Money, Money) = default;

private:
    constexpr explicit Money(std::int64_t pico) : pico_(pico) {}
    std::int64_t pico_ = 0;
};

/// Price of one token, parsed from a "dollars per 1,000,000 tokens" quote.
class TokenPrice {
public:
    constexpr TokenPrice() = default;

    /// Accepts at most six fractional digits (e.g. "0.5", "30", "1.234567").
    static TokenPrice per_million(std::string_view dollars_per_million);
    static constexpr TokenPrice from_pico_per_token(std::int64_t pico) { return TokenPrice(pico); }

    constexpr std::int64_t pico_per_token() const { return pico_; }
    constexpr Money cost(std::int64_t tokens) const { return Money::from_pico(pico_ * tokens); }

    /// Dollars per million tokens, exact decimal.
    std::string to_string() const;

    friend constexpr auto operator<=>(TokenPrice, TokenPrice) = default;

private:
    constexpr explicit TokenPrice(std::int64_t pico) : pico_(pico) {}
    std::int64_t pico_ = 0;
};

}  // namespace tierqa
