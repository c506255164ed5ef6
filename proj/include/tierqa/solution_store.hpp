#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace tierqa {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const { return values.size(); }
    double norm() const;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    /// Throws std::invalid_argument on empty text.
    virtual EmbeddingVector embed(std::string_view text) const = 0;
    virtual std::size_t dimension() const = 0;
};

/// Lowercased word tokens hashed (FNV-1a 64) into `dimension` buckets; the
/// count vector is L2-normalized. A word is a maximal run of ASCII letters,
/// digits, or non-ASCII bytes.
class HashedBowEmbedder : public Embedder {
public:
    explicit HashedBowEmbedder(std::size_t dimension = 256);
    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::size_t dimension_;
};

std::vector<std::string> word_tokens(std::string_view text);
std::uint64_t fnv1a64(std::string_view bytes);

/// Client for an OpenAI-compatible /v1/embeddings endpoint.
class RemoteEmbedder : public Embedder {
public:
    RemoteEmbedder(std::string base_url, std::string model, std::size_t dimension, std::string auth_env = {},
                   std::string path = "/v1/embeddings");
    EmbeddingVector embed(std::string_view text) const override;
    std::size_t dimension() const override { return dimension_; }

private:
    std::string base_url_;
    std::string model_;
    std::size_t dimension_;
    std::string auth_env_;
    std::string path_;
};

/// dot(a,b)/(|a||b|). Zero vectors have similarity 0 (logged). Throws
/// std::invalid_argument on a dimension mismatch.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct SolutionRecord {
    std::string query_id;
    std::string query_text;
    std::string code;  // fake-key form
    EmbeddingVector embedding;
    int solved_by_rank = 0;
    std::int64_t created_at = 0;  // microseconds since epoch, strictly increasing per store
};

struct Retrieval {
    SolutionRecord record;
    double similarity = 0.0;
};

struct StoreOptions {
    double similarity_floor = -1.0;  // retrieve only when best similarity >= floor
};

/// Successful query->code pairs with top-1 cosine retrieval. Optionally
/// backed by an append-only JSON-lines log that is replayed on open;
/// embeddings are not persisted and are recomputed on load.
class SolutionStore {
public:
    explicit SolutionStore(std::shared_ptr<const Embedder> embedder, std::optional<std::filesystem::path> log_path = {},
                           StoreOptions options = {});

    /// Embeds (if the record has no embedding), checks secrets, persists, and
    /// publishes. A record with an existing query_id replaces it.
    void insert(SolutionRecord record);

    /// Argmax cosine; ties go to the most recent created_at, then the lowest
    /// query_id. Empty when the store is empty or below the floor.
    std::optional<Retrieval> retrieve_top1(std::string_view query_text) const;
    std::optional<Retrieval> retrieve_top1(const EmbeddingVector& query) const;

    /// Registers a secret that must never appear in stored code.
    void add_secret(std::string secret);

    std::size_t size() const;
    std::vector<SolutionRecord> records() const;
    const Embedder& embedder() const { return *embedder_; }

private:
    void publish(SolutionRecord record);
    void replay_log();

    std::shared_ptr<const Embedder> embedder_;
    std::optional<std::filesystem::path> log_path_;
    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::vector<SolutionRecord> records_;
    std::vector<double> norms_;
    std::vector<std::string> secrets_;
    std::int64_t last_created_at_ = 0;
};

}  // namespace tierqa
