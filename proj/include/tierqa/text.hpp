#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tierqa {

inline constexpr std::string_view kSentinel = "TERMINATE";

struct CodeExtraction {
    std::vector<std::string> blocks;
    // Set when the last fence was never closed; its block runs to end of text.
    bool unterminated_fence = false;
};

/// Contents of every ``` fenced block, in document order, with the fence
/// lines and language tags removed. An opening fence is a line starting with
/// three backticks; the block ends at the next line consisting of exactly
/// three backticks (surrounding whitespace ignored).
CodeExtraction extract_code(std::string_view message);

inline std::vector<std::string> extract_code_blocks(std::string_view message) {
    return extract_code(message).blocks;
}

/// The program executed for one assistant turn: all blocks joined in order,
/// or empty when the message had none.
std::string joined_program(const std::vector<std::string>& blocks);

/// True iff `message`, after trimming trailing whitespace, ends with the
/// standalone token `sentinel` (case-sensitive).
bool is_terminate(std::string_view message, std::string_view sentinel = kSentinel);

/// Eight lowercase hex characters derived from `seed` (a four-byte value).
std::string generate_fake_key(std::uint64_t seed);

bool is_valid_fake_key(std::string_view key);

/// Replaces every occurrence of `from` in `text` with `to`.
std::string replace_all(std::string_view text, std::string_view from, std::string_view to);

std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

std::string_view trim(std::string_view s);

}  // namespace tierqa
