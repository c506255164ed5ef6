#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "tierqa/ledger.hpp"
#include "tierqa/orchestrator.hpp"
#include "tierqa/solution_store.hpp"
#include "tierqa/types.hpp"

namespace tierqa {

// Wire schema shared by transcript files and the HTTP API. Money is a
// decimal string, durations are integer nanoseconds.

nlohmann::ordered_json to_json(const Message& m);
nlohmann::ordered_json to_json(const Conversation& c);
nlohmann::ordered_json to_json(const Verdict& v);
nlohmann::ordered_json to_json(const Query& q);
nlohmann::ordered_json to_json(const QueryResult& r);
nlohmann::ordered_json to_json(const RunSummary& s);
nlohmann::ordered_json to_json(const SolutionRecord& r, bool redact_code);

Conversation conversation_from_json(const nlohmann::json& j);

/// Compact dump that replaces invalid UTF-8 instead of throwing.
std::string dump(const nlohmann::ordered_json& j);

}  // namespace tierqa
