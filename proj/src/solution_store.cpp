#include "tierqa/solution_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "tierqa/log.hpp"

namespace tierqa {

double EmbeddingVector::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
        if (word) {
            current.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

HashedBowEmbedder::HashedBowEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

EmbeddingVector HashedBowEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw std::invalid_argument("cannot embed empty text");
    EmbeddingVector v;
    v.values.assign(dimension_, 0.0);
    for (const auto& tok : word_tokens(text)) v.values[fnv1a64(tok) % dimension_] += 1.0;
    const double n = v.norm();
    if (n > 0.0)
        for (double& x : v.values) x /= n;
    return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw std::invalid_argument("cosine: dimension mismatch " + std::to_string(a.dimension()) + " vs " +
                                    std::to_string(b.dimension()));
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) {
        log_warn("cosine of a zero vector; similarity taken as 0");
        return 0.0;
    }
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

namespace {

std::int64_t now_micros() {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

nlohmann::json to_json(const SolutionRecord& r) {
    return {{"query_id", r.query_id},         {"query_text", r.query_text}, {"code", r.code},
            {"solved_by_rank", r.solved_by_rank}, {"created_at", r.created_at}};
}

// True if `a` should win over `b` at equal similarity.
bool newer_or_lower_id(const SolutionRecord& a, const SolutionRecord& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.query_id < b.query_id;
}

}  // namespace

SolutionStore::SolutionStore(std::shared_ptr<const Embedder> embedder, std::optional<std::filesystem::path> log_path,
                             StoreOptions options)
    : embedder_(std::move(embedder)), log_path_(std::move(log_path)), options_(options) {
    if (!embedder_) throw std::invalid_argument("solution store needs an embedder");
    if (log_path_) replay_log();
}

void SolutionStore::replay_log() {
    std::ifstream in(*log_path_);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            if (in.peek() == std::char_traits<char>::eof()) {
                log_warn("store {}: ignoring torn final line {}", log_path_->string(), line_no);
                break;
            }
            throw std::runtime_error("store " + log_path_->string() + ": malformed line " + std::to_string(line_no));
        }
        SolutionRecord r;
        r.query_id = j.at("query_id").get<std::string>();
        r.query_text = j.at("query_text").get<std::string>();
        r.code = j.at("code").get<std::string>();
        r.solved_by_rank = j.at("solved_by_rank").get<int>();
        r.created_at = j.at("created_at").get<std::int64_t>();
        r.embedding = embedder_->embed(r.query_text);
        publish(std::move(r));
    }
}

void SolutionStore::publish(SolutionRecord record) {
    last_created_at_ = std::max(last_created_at_, record.created_at);
    auto it = std::find_if(records_.begin(), records_.end(),
                           [&](const SolutionRecord& r) { return r.query_id == record.query_id; });
    const double norm = record.embedding.norm();
    if (it != records_.end()) {
        norms_[static_cast<std::size_t>(it - records_.begin())] = norm;
        *it = std::move(record);
    } else {
        records_.push_back(std::move(record));
        norms_.push_back(norm);
    }
}

void SolutionStore::add_secret(std::string secret) {
    if (secret.empty()) return;
    std::unique_lock lock(mutex_);
    if (std::find(secrets_.begin(), secrets_.end(), secret) == secrets_.end()) secrets_.push_back(std::move(secret));
}

void SolutionStore::insert(SolutionRecord record) {
    if (record.code.empty()) throw std::invalid_argument("solution code must be nonempty");
    if (record.query_id.empty()) throw std::invalid_argument("solution needs a query_id");
    if (record.embedding.values.empty()) record.embedding = embedder_->embed(record.query_text);
    if (record.embedding.dimension() != embedder_->dimension())
        throw std::invalid_argument("embedding dimension does not match the store");

    std::unique_lock lock(mutex_);
    for (const auto& s : secrets_)
        if (record.code.find(s) != std::string::npos || record.query_text.find(s) != std::string::npos)
            throw std::invalid_argument("refusing to store a solution containing key material");

    record.created_at = std::max(now_micros(), last_created_at_ + 1);
    const bool duplicate = std::any_of(records_.begin(), records_.end(),
                                       [&](const SolutionRecord& r) { return r.query_id == record.query_id; });
    if (duplicate) log_info("store: replacing solution for query {}", record.query_id);

    if (log_path_) {
        std::ofstream out(*log_path_, std::ios::app | std::ios::binary);
        out << to_json(record).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
        out.flush();
        if (!out) throw std::runtime_error("store: cannot append to " + log_path_->string());
    }
    publish(std::move(record));
}

std::optional<Retrieval> SolutionStore::retrieve_top1(std::string_view query_text) const {
    {
        std::shared_lock lock(mutex_);
        if (records_.empty()) return std::nullopt;
    }
    return retrieve_top1(embedder_->embed(query_text));
}

std::optional<Retrieval> SolutionStore::retrieve_top1(const EmbeddingVector& query) const {
    std::shared_lock lock(mutex_);
    if (!records_.empty() && query.dimension() != records_.front().embedding.dimension())
        throw std::invalid_argument("query embedding dimension does not match the store");
    const double qn = query.norm();
    const SolutionRecord* best = nullptr;
    double best_sim = 0.0;
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const SolutionRecord& r = records_[i];
        // Same arithmetic as cosine(), with the record norms cached.
        double sim = 0.0;
        if (qn > 0.0 && norms_[i] > 0.0) {
            double dot = 0.0;
            for (std::size_t k = 0; k < query.values.size(); ++k) dot += query.values[k] * r.embedding.values[k];
            sim = std::clamp(dot / (qn * norms_[i]), -1.0, 1.0);
        }
        if (best == nullptr || sim > best_sim || (sim == best_sim && newer_or_lower_id(r, *best))) {
            best = &r;
            best_sim = sim;
        }
    }
    if (best == nullptr || best_sim < options_.similarity_floor) return std::nullopt;
    return Retrieval{*best, best_sim};
}

std::size_t SolutionStore::size() const {
    std::shared_lock lock(mutex_);
    return records_.size();
}

std::vector<SolutionRecord> SolutionStore::records() const {
    std::shared_lock lock(mutex_);
    return records_;
}

}  // namespace tierqa
