#pragma once

#include <condition_variable>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tierqa/backend.hpp"
#include "tierqa/types.hpp"

namespace tierqa {

/// A billed judge request, recorded to the ledger as a judge_call.
struct JudgeCall {
    TokenUsage usage;
    Money cost;
    Duration duration{0};
};

struct Judgement {
    Verdict verdict;
    std::vector<JudgeCall> calls;
};

/// Decides whether the conversations so far handled the query. Called once
/// per attempted tier that passed the success-candidate gate.
class VerdictSource {
public:
    virtual ~VerdictSource() = default;
    virtual Judgement decide(const Query& query, const std::vector<Conversation>& conversations) = 0;
    virtual VerdictSourceKind kind() const = 0;
};

/// Plain-text rendering of the conversations handed to judges and humans.
std::string render_transcript(const Query& query, const std::vector<Conversation>& conversations);

// ---------------------------------------------------------------------------
// Judge
// ---------------------------------------------------------------------------

extern const char* const kDefaultJudgeSystemPrompt;
extern const char* const kJudgeReprompt;

struct JudgeConfig {
    ModelProfile profile;
    std::string system_prompt = kDefaultJudgeSystemPrompt;
    RetryPolicy retry;
};

/// Reads a yes/no judgement. A standalone yes/no on the last nonempty line
/// wins; otherwise exactly one of the two words anywhere in the reply;
/// otherwise nullopt (ambiguous).
std::optional<bool> parse_judge_reply(std::string_view reply);

/// Asks a judge model with the full transcript. An unparseable reply gets one
/// stricter reprompt; a second failure yields an errored failure.
class JudgeVerdictSource : public VerdictSource {
public:
    JudgeVerdictSource(std::shared_ptr<ChatBackend> backend, JudgeConfig config);
    Judgement decide(const Query& query, const std::vector<Conversation>& conversations) override;
    VerdictSourceKind kind() const override { return VerdictSourceKind::judge; }
    const JudgeConfig& config() const { return config_; }

private:
    std::shared_ptr<ChatBackend> backend_;
    JudgeConfig config_;
};

/// judge() over a conversation set.
Judgement judge(ChatBackend& backend, const JudgeConfig& config, const Query& query,
                const std::vector<Conversation>& conversations);

// ---------------------------------------------------------------------------
// Human feedback
// ---------------------------------------------------------------------------

class ChannelClosed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FeedbackStatus { accepted, not_pending, closed };

/// Blocking rendezvous between the pipeline (waiting for a verdict) and a
/// feedback producer (console, HTTP endpoint, terminal).
class FeedbackChannel {
public:
    /// Blocks until post() delivers a verdict for `query_id`. Throws
    /// ChannelClosed if the channel closes first.
    Verdict await(const std::string& query_id, const std::string& transcript);

    FeedbackStatus post(const std::string& query_id, bool success, std::string note = {});

    std::optional<std::string> pending() const;
    std::optional<std::string> pending_transcript() const;
    void close();
    bool closed() const;

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::optional<std::string> pending_;
    std::string transcript_;
    std::optional<Verdict> delivered_;
    bool closed_ = false;
};

class HumanVerdictSource : public VerdictSource {
public:
    explicit HumanVerdictSource(FeedbackChannel& channel) : channel_(channel) {}
    Judgement decide(const Query& query, const std::vector<Conversation>& conversations) override;
    VerdictSourceKind kind() const override { return VerdictSourceKind::human; }

private:
    FeedbackChannel& channel_;
};

/// await_human_verdict(): blocks on the channel for one query.
Verdict await_human_verdict(FeedbackChannel& channel, const std::string& query_id, const std::string& transcript);

/// Terminal fallback: prints the transcript and reads y/n. End of input
/// throws ChannelClosed.
class TerminalVerdictSource : public VerdictSource {
public:
    TerminalVerdictSource(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
    Judgement decide(const Query& query, const std::vector<Conversation>& conversations) override;
    VerdictSourceKind kind() const override { return VerdictSourceKind::human; }

private:
    std::istream& in_;
    std::ostream& out_;
};

/// Replays a fixed list of verdicts; throws ChannelClosed when exhausted.
class ScriptedVerdictSource : public VerdictSource {
public:
    explicit ScriptedVerdictSource(std::vector<bool> verdicts, VerdictSourceKind kind = VerdictSourceKind::human);
    Judgement decide(const Query& query, const std::vector<Conversation>& conversations) override;
    VerdictSourceKind kind() const override { return kind_; }
    std::size_t consumed() const { return next_; }

private:
    std::vector<bool> verdicts_;
    VerdictSourceKind kind_;
    std::size_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Judge quality
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
    std::int64_t tp = 0;  // judge success, truly success
    std::int64_t fp = 0;  // judge success, truly failure
    std::int64_t tn = 0;  // judge failure, truly failure
    std::int64_t fn = 0;  // judge failure, truly success
};

struct JudgeQuality {
    double accuracy = 0.0;   // percent
    double precision = 0.0;  // of "success" calls
    double recall = 0.0;     // 100 when every "failure" call is a true failure
    ConfusionMatrix counts;
};

/// Success is the positive class. Empty denominators count as 100 (no
/// wrong calls of that kind). Throws std::invalid_argument on empty or
/// misaligned input.
JudgeQuality judge_quality(const std::vector<bool>& judge_verdicts, const std::vector<bool>& ground_truth);

}  // namespace tierqa
