#include "tierqa/money.hpp"

#include <limits>
#include <stdexcept>

namespace tierqa {

namespace {

// Parses "[-]digits[.digits]" into an integer scaled by 10^scale.
std::int64_t parse_scaled(std::string_view text, int scale, const char* what) {
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument(std::string(what) + " '" + std::string(text) + "': " + why);
    };
    if (text.empty()) fail("empty");
    bool negative = false;
    std::size_t pos = 0;
    if (text[0] == '-' || text[0] == '+') {
        negative = text[0] == '-';
        pos = 1;
    }
    std::int64_t whole = 0;
    std::int64_t frac = 0;
    int frac_digits = 0;
    bool seen_dot = false;
    bool any_digit = false;
    constexpr auto kMax = std::numeric_limits<std::int64_t>::max() / 10;
    for (; pos < text.size(); ++pos) {
        const char c = text[pos];
        if (c == '.') {
            if (seen_dot) fail("second decimal point");
            seen_dot = true;
            continue;
        }
        if (c < '0' || c > '9') fail("unexpected character");
        any_digit = true;
        if (seen_dot) {
            if (frac_digits == scale) {
                if (c != '0') fail("too many fractional digits");
                continue;
            }
            frac = frac * 10 + (c - '0');
            ++frac_digits;
        } else {
            if (whole > kMax) fail("out of range");
            whole = whole * 10 + (c - '0');
        }
    }
    if (!any_digit) fail("no digits");
    for (int i = frac_digits; i < scale; ++i) frac *= 10;
    std::int64_t unit = 1;
    for (int i = 0; i < scale; ++i) unit *= 10;
    if (whole > std::numeric_limits<std::int64_t>::max() / unit) fail("out of range");
    const std::int64_t value = whole * unit + frac;
    return negative ? -value : value;
}

std::string render_scaled(std::int64_t value, int scale) {
    const bool negative = value < 0;
    // Work in unsigned to survive INT64_MIN.
    std::uint64_t magnitude = negative ? 0 - static_cast<std::uint64_t>(value)
                                       : static_cast<std::uint64_t>(value);
    std::uint64_t unit = 1;
    for (int i = 0; i < scale; ++i) unit *= 10;
    std::string out = negative ? "-" : "";
    out += std::to_string(magnitude / unit);
    std::uint64_t frac = magnitude % unit;
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(0, static_cast<std::size_t>(scale) - digits.size(), '0');
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        out += '.';
        out += digits;
    }
    return out;
}

}  // namespace

Money Money::parse(std::string_view text) { return Money(parse_scaled(text, 12, "money")); }

std::string Money::to_string() const { return render_scaled(pico_, 12); }

TokenPrice TokenPrice::per_million(std::string_view dollars_per_million) {
    // $/1e6 tokens with 6 fractional digits == pico-dollars per token.
    const auto pico = parse_scaled(dollars_per_million, 6, "price");
    if (pico < 0) throw std::invalid_argument("price must be nonnegative");
    return TokenPrice(pico);
}

std::string TokenPrice::to_string() const { return render_scaled(pico_, 6); }

}  // namespace tierqa
