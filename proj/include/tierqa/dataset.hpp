#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tierqa/types.hpp"

namespace tierqa {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic fake key per API name: derived from (seed, name) and
/// redrawn on collision, so keys stay distinct within a registry.
class FakeKeyRegistry {
public:
    explicit FakeKeyRegistry(std::uint64_t seed = 0) : seed_(seed) {}
    std::string key_for(const std::string& api_name);
    std::map<std::string, std::string> keys() const;

private:
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    std::map<std::string, std::string> keys_;
    std::set<std::string> used_;
};

/// One JSON object per line: {"id", "query", "api_name", "key_env"}.
/// Blank lines are skipped. arrival_index follows line order.
std::vector<Query> parse_dataset(std::string_view text, FakeKeyRegistry& keys);
std::vector<Query> ingest_dataset(const std::filesystem::path& path, FakeKeyRegistry& keys);
std::vector<Query> ingest_dataset(const std::filesystem::path& path, std::uint64_t seed = 0);

/// Builds a query from its wire fields with a fake key from the registry.
Query make_query(std::string id, std::string text, const std::string& api_name, std::string key_env,
                 std::int64_t arrival_index, FakeKeyRegistry& keys);

/// Permutes the stream with a seeded RNG and renumbers arrival_index.
std::vector<Query> shuffle_queries(std::vector<Query> queries, std::uint64_t seed);

}  // namespace tierqa
