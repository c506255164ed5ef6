#pragma once

#include <optional>
#include <string>

#include "tierqa/types.hpp"

namespace tierqa {

struct SolutionRecord;

struct PolicyFlags {
    bool use_hierarchy = true;
    bool use_solution_demo = true;
    bool use_cot = false;

    bool operator==(const PolicyFlags&) const = default;
};

inline constexpr std::string_view kCotSuffix = "Let's think step by step.";

/// First line of the demonstration section. Scripted and simulated backends
/// detect demonstrations by this header.
inline constexpr std::string_view kDemoHeader = "Here is a past query similar to yours, with the code that solved it:";

/// Section templates. Placeholders: {api_name} {api_key} {demo_query}
/// {demo_code} {query}.
struct PromptTemplate {
    std::string api_section =
        "Use the {api_name} API to gather the information you need. Its API key is \"{api_key}\"; "
        "put this exact key in your code wherever the key is required.\n\n";
    std::string demo_section = std::string(kDemoHeader) +
                               "\nQuery: {demo_query}\nCode:\n```python\n{demo_code}```\n\n";
    std::string query_section = "Query: {query}";
    std::string cot_suffix = std::string(kCotSuffix);
};

/// API section, optional demonstration, the query, and the optional CoT
/// sentence, in that order.
std::string build_initial_prompt(const Query& query, const SolutionRecord* demo, const PolicyFlags& flags,
                                 const PromptTemplate& tmpl = {});

}  // namespace tierqa
