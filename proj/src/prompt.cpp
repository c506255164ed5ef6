#include "tierqa/prompt.hpp"

#include <utility>
#include <vector>

#include "tierqa/solution_store.hpp"

namespace tierqa {

namespace {

// Single left-to-right pass so substituted text is never rescanned.
std::string fill(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string_view>>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        if (tmpl[pos] == '{') {
            bool matched = false;
            for (const auto& [name, value] : vars) {
                if (tmpl.compare(pos + 1, name.size(), name) == 0 && pos + 1 + name.size() < tmpl.size() &&
                    tmpl[pos + 1 + name.size()] == '}') {
                    out.append(value);
                    pos += name.size() + 2;
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
        }
        out.push_back(tmpl[pos++]);
    }
    return out;
}

}  // namespace

std::string build_initial_prompt(const Query& query, const SolutionRecord* demo, const PolicyFlags& flags,
                                 const PromptTemplate& tmpl) {
    std::string demo_code;
    if (demo != nullptr) {
        demo_code = demo->code;
        if (!demo_code.empty() && demo_code.back() != '\n') demo_code += '\n';
    }
    const std::vector<std::pair<std::string_view, std::string_view>> vars{
        {"api_name", query.api.name},
        {"api_key", query.api.fake_key},
        {"demo_query", demo ? std::string_view{demo->query_text} : std::string_view{}},
        {"demo_code", demo_code},
        {"query", query.text},
    };
    std::string prompt = fill(tmpl.api_section, vars);
    if (flags.use_solution_demo && demo != nullptr) prompt += fill(tmpl.demo_section, vars);
    prompt += fill(tmpl.query_section, vars);
    if (flags.use_cot) {
        prompt += "\n";
        prompt += tmpl.cot_suffix;
    }
    return prompt;
}

}  // namespace tierqa
