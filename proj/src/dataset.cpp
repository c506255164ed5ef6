#include "tierqa/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tierqa/solution_store.hpp"
#include "tierqa/text.hpp"

namespace tierqa {

std::string FakeKeyRegistry::key_for(const std::string& api_name) {
    std::lock_guard lock(mutex_);
    if (auto it = keys_.find(api_name); it != keys_.end()) return it->second;
    std::uint64_t salt = fnv1a64(api_name) ^ (seed_ * 0x9E3779B97F4A7C15ULL);
    std::string key = generate_fake_key(salt);
    while (used_.count(key)) key = generate_fake_key(++salt);
    used_.insert(key);
    keys_.emplace(api_name, key);
    return key;
}

std::map<std::string, std::string> FakeKeyRegistry::keys() const {
    std::lock_guard lock(mutex_);
    return keys_;
}

Query make_query(std::string id, std::string text, const std::string& api_name, std::string key_env,
                 std::int64_t arrival_index, FakeKeyRegistry& keys) {
    if (id.empty()) throw DatasetError("query id must be nonempty");
    if (trim(text).empty()) throw DatasetError("query text must be nonempty");
    if (api_name.empty()) throw DatasetError("api_name must be nonempty");
    Query q;
    q.id = std::move(id);
    q.text = std::move(text);
    q.api = ApiSpec{api_name, keys.key_for(api_name), std::move(key_env)};
    q.arrival_index = arrival_index;
    return q;
}

std::vector<Query> parse_dataset(std::string_view text, FakeKeyRegistry& keys) {
    std::vector<Query> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        const std::string_view line = trim(text.substr(pos, eol - pos));
        ++line_no;
        pos = eol + 1;
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw DatasetError(where + ": not valid JSON");
        }
        try {
            if (!j.is_object()) throw DatasetError(where + ": expected an object");
            for (const char* field : {"id", "query", "api_name"})
                if (!j.contains(field) || !j.at(field).is_string())
                    throw DatasetError(where + ": missing string field '" + field + "'");
            std::string id = j.at("id").get<std::string>();
            if (!ids.insert(id).second) throw DatasetError(where + ": duplicate id '" + id + "'");
            out.push_back(make_query(std::move(id), j.at("query").get<std::string>(),
                                     j.at("api_name").get<std::string>(), j.value("key_env", std::string{}),
                                     static_cast<std::int64_t>(out.size()), keys));
        } catch (const DatasetError& e) {
            const std::string msg = e.what();
            if (msg.rfind("line ", 0) == 0) throw;
            throw DatasetError(where + ": " + msg);
        }
    }
    return out;
}

std::vector<Query> ingest_dataset(const std::filesystem::path& path, FakeKeyRegistry& keys) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open dataset " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str(), keys);
}

std::vector<Query> ingest_dataset(const std::filesystem::path& path, std::uint64_t seed) {
    FakeKeyRegistry keys(seed);
    return ingest_dataset(path, keys);
}

std::vector<Query> shuffle_queries(std::vector<Query> queries, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    // Fisher-Yates with our own index draws; std::shuffle's sequence is
    // implementation-defined.
    for (std::size_t i = queries.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(queries[i - 1], queries[j]);
    }
    for (std::size_t i = 0; i < queries.size(); ++i) queries[i].arrival_index = static_cast<std::int64_t>(i);
    return queries;
}

}  // namespace tierqa
