#include "tierqa/verdict.hpp"

#include <cctype>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>

#include "tierqa/text.hpp"

namespace tierqa {

const char* const kDefaultJudgeSystemPrompt =
    "You review conversations between an AI assistant and a code executor that were started by a user query.\n"
    "1. The input shows the user query, then each conversation as a list of turns tagged [user], [assistant] "
    "or [executor].\n"
    "2. Decide whether the user query was successfully handled: the requested information was actually "
    "obtained (for example from the output of executed code) and reported to the user.\n"
    "3. A conversation that ends with errors, placeholder values, made-up data, or no answer is not a success.\n"
    "Answer with a single word: yes if the query was successfully handled, no otherwise.";

const char* const kJudgeReprompt =
    "Your previous answer could not be read. Reply with exactly one word, yes or no, and nothing else.";

std::string render_transcript(const Query& query, const std::vector<Conversation>& conversations) {
    std::ostringstream out;
    out << "User query: " << query.text << "\n";
    int n = 0;
    for (const auto& conv : conversations) {
        out << "\n=== Conversation " << ++n << " (tier " << conv.tier_index << ") ===\n";
        for (const auto& m : conv.messages) out << "[" << to_string(m.role) << "]\n" << m.content << "\n";
    }
    return out.str();
}

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<bool> standalone_token(std::string_view line) {
    std::string_view t = trim(line);
    auto strip = [](char c) { return c == '.' || c == '!' || c == '"' || c == '\'' || c == '*' || c == '`'; };
    while (!t.empty() && strip(t.back())) t.remove_suffix(1);
    while (!t.empty() && strip(t.front())) t.remove_prefix(1);
    const std::string word = lower(trim(t));
    if (word == "yes") return true;
    if (word == "no") return false;
    return std::nullopt;
}

}  // namespace

std::optional<bool> parse_judge_reply(std::string_view reply) {
    // Last nonempty line.
    std::string_view rest = reply;
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.remove_suffix(1);
    const std::size_t nl = rest.rfind('\n');
    const std::string_view last = nl == std::string_view::npos ? rest : rest.substr(nl + 1);
    if (auto v = standalone_token(last)) return v;

    bool saw_yes = false;
    bool saw_no = false;
    std::string word;
    auto flush = [&] {
        if (word == "yes") saw_yes = true;
        if (word == "no") saw_no = true;
        word.clear();
    };
    for (char c : reply) {
        if (std::isalpha(static_cast<unsigned char>(c)))
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        else
            flush();
    }
    flush();
    if (saw_yes != saw_no) return saw_yes;
    return std::nullopt;
}

Judgement judge(ChatBackend& backend, const JudgeConfig& config, const Query& query,
                const std::vector<Conversation>& conversations) {
    if (conversations.empty()) throw std::invalid_argument("judge needs at least one conversation");
    const auto start = std::chrono::steady_clock::now();
    Judgement out;
    out.verdict.source = VerdictSourceKind::judge;

    ChatRequest request;
    request.system_prompt = config.system_prompt;
    request.messages.push_back({"user", render_transcript(query, conversations)});

    for (int attempt = 0; attempt < 2; ++attempt) {
        ChatExchange ex;
        try {
            ex = complete(backend, config.profile, request, config.retry);
        } catch (const BackendError& e) {
            out.verdict.success = false;
            out.verdict.errored = true;
            out.verdict.note = std::string("judge unavailable: ") + e.what();
            break;
        }
        out.calls.push_back({ex.usage, cost_of(ex, config.profile), ex.wall_time});
        if (auto parsed = parse_judge_reply(ex.response_text)) {
            out.verdict.success = *parsed;
            out.verdict.errored = false;
            out.verdict.note.clear();
            break;
        }
        out.verdict.success = false;
        out.verdict.errored = true;
        out.verdict.note = "unparseable judge reply";
        request.messages.push_back({"assistant", ex.response_text});
        request.messages.push_back({"user", kJudgeReprompt});
    }
    out.verdict.latency = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
    return out;
}

JudgeVerdictSource::JudgeVerdictSource(std::shared_ptr<ChatBackend> backend, JudgeConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
    if (!backend_) throw std::invalid_argument("judge needs a backend");
}

Judgement JudgeVerdictSource::decide(const Query& query, const std::vector<Conversation>& conversations) {
    return judge(*backend_, config_, query, conversations);
}

Verdict FeedbackChannel::await(const std::string& query_id, const std::string& transcript) {
    const auto start = std::chrono::steady_clock::now();
    std::unique_lock lock(mutex_);
    if (closed_) throw ChannelClosed("feedback channel closed");
    pending_ = query_id;
    transcript_ = transcript;
    delivered_.reset();
    cv_.notify_all();
    cv_.wait(lock, [&] { return closed_ || delivered_.has_value(); });
    pending_.reset();
    transcript_.clear();
    if (!delivered_) throw ChannelClosed("feedback channel closed while awaiting a verdict for " + query_id);
    Verdict v = *delivered_;
    delivered_.reset();
    v.latency = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
    return v;
}

FeedbackStatus FeedbackChannel::post(const std::string& query_id, bool success, std::string note) {
    std::lock_guard lock(mutex_);
    if (closed_) return FeedbackStatus::closed;
    if (!pending_ || *pending_ != query_id || delivered_) return FeedbackStatus::not_pending;
    Verdict v;
    v.success = success;
    v.source = VerdictSourceKind::human;
    v.note = std::move(note);
    delivered_ = std::move(v);
    cv_.notify_all();
    return FeedbackStatus::accepted;
}

std::optional<std::string> FeedbackChannel::pending() const {
    std::lock_guard lock(mutex_);
    if (delivered_) return std::nullopt;
    return pending_;
}

std::optional<std::string> FeedbackChannel::pending_transcript() const {
    std::lock_guard lock(mutex_);
    if (!pending_ || delivered_) return std::nullopt;
    return transcript_;
}

void FeedbackChannel::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    cv_.notify_all();
}

bool FeedbackChannel::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

Verdict await_human_verdict(FeedbackChannel& channel, const std::string& query_id, const std::string& transcript) {
    return channel.await(query_id, transcript);
}

Judgement HumanVerdictSource::decide(const Query& query, const std::vector<Conversation>& conversations) {
    return {await_human_verdict(channel_, query.id, render_transcript(query, conversations)), {}};
}

Judgement TerminalVerdictSource::decide(const Query& query, const std::vector<Conversation>& conversations) {
    const auto start = std::chrono::steady_clock::now();
    out_ << render_transcript(query, conversations) << "\nWas query " << query.id << " handled successfully? [y/n] "
         << std::flush;
    std::string line;
    while (std::getline(in_, line)) {
        const std::string answer = lower(trim(line));
        if (answer == "y" || answer == "yes" || answer == "n" || answer == "no") {
            Verdict v;
            v.success = answer[0] == 'y';
            v.source = VerdictSourceKind::human;
            v.latency = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - start);
            return {v, {}};
        }
        out_ << "Please answer y or n: " << std::flush;
    }
    throw ChannelClosed("input closed while awaiting a verdict for " + query.id);
}

ScriptedVerdictSource::ScriptedVerdictSource(std::vector<bool> verdicts, VerdictSourceKind kind)
    : verdicts_(std::move(verdicts)), kind_(kind) {}

Judgement ScriptedVerdictSource::decide(const Query& query, const std::vector<Conversation>&) {
    if (next_ >= verdicts_.size()) throw ChannelClosed("scripted verdicts exhausted at query " + query.id);
    Verdict v;
    v.success = verdicts_[next_++];
    v.source = kind_;
    return {v, {}};
}

JudgeQuality judge_quality(const std::vector<bool>& judge_verdicts, const std::vector<bool>& ground_truth) {
    if (judge_verdicts.empty()) throw std::invalid_argument("judge_quality: empty input");
    if (judge_verdicts.size() != ground_truth.size())
        throw std::invalid_argument("judge_quality: sequences differ in length");
    JudgeQuality q;
    auto& c = q.counts;
    for (std::size_t i = 0; i < judge_verdicts.size(); ++i) {
        const bool j = judge_verdicts[i];
        const bool t = ground_truth[i];
        if (j && t) ++c.tp;
        else if (j && !t) ++c.fp;
        else if (!j && !t) ++c.tn;
        else ++c.fn;
    }
    auto pct = [](std::int64_t num, std::int64_t den) {
        return den == 0 ? 100.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
    };
    q.accuracy = pct(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
    q.precision = pct(c.tp, c.tp + c.fp);
    q.recall = pct(c.tp, c.tp + c.fn);
    return q;
}

}  // namespace tierqa
