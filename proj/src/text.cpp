#include "tierqa/text.hpp"

#include <cctype>
#include <random>

namespace tierqa {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool is_closing_fence(std::string_view line) { return trim(line) == "```"; }

}  // namespace

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

CodeExtraction extract_code(std::string_view message) {
    CodeExtraction out;
    std::size_t pos = 0;
    bool in_block = false;
    std::string current;
    while (pos < message.size()) {
        std::size_t eol = message.find('\n', pos);
        const bool has_newline = eol != std::string_view::npos;
        if (!has_newline) eol = message.size();
        const std::string_view line = message.substr(pos, eol - pos);
        const std::size_t next = has_newline ? eol + 1 : eol;

        if (!in_block) {
            if (line.starts_with("```")) {
                in_block = true;
                current.clear();
            }
        } else if (is_closing_fence(line)) {
            out.blocks.push_back(std::move(current));
            current.clear();
            in_block = false;
        } else {
            current.append(message.substr(pos, next - pos));
        }
        pos = next;
    }
    if (in_block) {
        out.blocks.push_back(std::move(current));
        out.unterminated_fence = true;
    }
    return out;
}

std::string joined_program(const std::vector<std::string>& blocks) {
    std::string program;
    for (const auto& b : blocks) {
        if (!program.empty() && program.back() != '\n') program += '\n';
        program += b;
    }
    return program;
}

bool is_terminate(std::string_view message, std::string_view sentinel) {
    while (!message.empty() && is_space(message.back())) message.remove_suffix(1);
    if (sentinel.empty() || !message.ends_with(sentinel)) return false;
    const std::size_t start = message.size() - sentinel.size();
    return start == 0 || !is_word(message[start - 1]);
}

std::string generate_fake_key(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937 rng(seq);
    const std::uint32_t value = rng();
    static constexpr char kHex[] = "0123456789abcdef";
    std::string key(8, '0');
    for (int i = 7; i >= 0; --i) {
        key[static_cast<std::size_t>(7 - i)] = kHex[(value >> (i * 4)) & 0xF];
    }
    return key;
}

bool is_valid_fake_key(std::string_view key) {
    if (key.size() != 8) return false;
    for (char c : key)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
}

std::string replace_all(std::string_view text, std::string_view from, std::string_view to) {
    if (from.empty()) return std::string(text);
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (true) {
        const std::size_t hit = text.find(from, pos);
        if (hit == std::string_view::npos) break;
        out.append(text.substr(pos, hit - pos));
        out.append(to);
        pos = hit + from.size();
    }
    out.append(text.substr(pos));
    return out;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t n = 0;
    for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
         pos = haystack.find(needle, pos + 1))
        ++n;
    return n;
}

}  // namespace tierqa
