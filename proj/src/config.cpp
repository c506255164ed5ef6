#include "tierqa/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "tierqa/dataset.hpp"
#include "tierqa/text.hpp"

namespace tierqa {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Typed field access with the JSON path in error messages.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("expected an object");
    }

    [[noreturn]] void fail(const std::string& why, const std::string& key = {}) const {
        throw ConfigError((key.empty() ? path_ : field(key)) + ": " + why);
    }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const json& raw(const std::string& key) const { return j_.at(key); }

    template <typename T>
    T get(const std::string& key) const {
        if (!has(key)) fail("required field missing", key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            fail("wrong type", key);
        }
    }
    template <typename T>
    T get_or(const std::string& key, T fallback) const {
        return has(key) ? get<T>(key) : fallback;
    }
    Reader child(const std::string& key) const {
        if (!has(key)) fail("required field missing", key);
        return Reader(j_.at(key), field(key));
    }

private:
    const json& j_;
    std::string path_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

TokenPrice read_price(const Reader& r, const std::string& key) {
    if (!r.has(key)) r.fail("required field missing", key);
    const json& v = r.raw(key);
    try {
        if (v.is_string()) return TokenPrice::per_million(v.get<std::string>());
        if (v.is_number_integer()) return TokenPrice::per_million(std::to_string(v.get<std::int64_t>()));
    } catch (const std::invalid_argument& e) {
        r.fail(e.what(), key);
    }
    r.fail("price must be a decimal string (dollars per million tokens)", key);
}

BackendConfig read_backend(const Reader& r, const std::filesystem::path& base) {
    BackendConfig b;
    const auto type = r.get<std::string>("type");
    if (type == "scripted") {
        b.kind = BackendConfig::Kind::scripted;
        if (r.has("file"))
            b.script_file = resolve(base, r.get<std::string>("file"));
        else if (r.has("script"))
            b.script = r.raw("script");
        else
            r.fail("scripted backend needs 'file' or 'script'");
    } else if (type == "remote") {
        b.kind = BackendConfig::Kind::remote;
        b.remote.base_url = r.get<std::string>("base_url");
        b.remote.path = r.get_or<std::string>("path", b.remote.path);
        b.remote.model = r.get_or<std::string>("model", "");
        b.remote.auth_env = r.get_or<std::string>("auth_env", "");
        b.remote.timeout = std::chrono::seconds(r.get_or<std::int64_t>("timeout_s", 120));
    } else if (type == "sim") {
        b.kind = BackendConfig::Kind::sim;
        // Rank and prices come from the enclosing tier.
        json profile = r.get<json>("profile");
        if (!profile.is_object()) r.fail("expected an object", "profile");
        try {
            for (const char* k : {"rank", "price_in", "price_out"})
                if (!profile.contains(k)) profile[k] = k[0] == 'r' ? json(0) : json("0");
            b.sim = profile_from_json(profile);
        } catch (const std::exception& e) {
            r.fail(e.what(), "profile");
        }
    } else {
        r.fail("unknown backend type '" + type + "'", "type");
    }
    return b;
}

TierConfig read_tier(const Reader& r, const std::filesystem::path& base, int default_rank) {
    TierConfig t;
    t.profile.name = r.get<std::string>("name");
    t.profile.rank = r.get_or<int>("rank", default_rank);
    t.profile.price_in = read_price(r, "price_in");
    t.profile.price_out = read_price(r, "price_out");
    t.profile.context_window = r.get_or<std::int64_t>("context_window", t.profile.context_window);
    t.backend = read_backend(r.child("backend"), base);
    if (t.backend.kind == BackendConfig::Kind::sim) {
        // The sim profile carries its own rank and prices; keep them consistent.
        t.backend.sim->rank = t.profile.rank;
        t.backend.sim->price_in = t.profile.price_in;
        t.backend.sim->price_out = t.profile.price_out;
        if (t.backend.sim->name.empty()) t.backend.sim->name = t.profile.name;
    }
    return t;
}

PolicyFlags read_flags(const Reader& r, PolicyFlags f) {
    f.use_hierarchy = r.get_or<bool>("use_hierarchy", f.use_hierarchy);
    f.use_solution_demo = r.get_or<bool>("use_solution_demo", f.use_solution_demo);
    f.use_cot = r.get_or<bool>("use_cot", f.use_cot);
    return f;
}

void read_prompt(const Reader& r, PromptTemplate& t) {
    t.api_section = r.get_or<std::string>("api_section", t.api_section);
    t.demo_section = r.get_or<std::string>("demo_section", t.demo_section);
    t.query_section = r.get_or<std::string>("query_section", t.query_section);
    t.cot_suffix = r.get_or<std::string>("cot_suffix", t.cot_suffix);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool key_like(const std::string& name) {
    const std::string n = lower(name);
    if (n.size() >= 4 && n.compare(n.size() - 4, 4, "_env") == 0) return false;
    static const std::regex pattern(R"((^|_)(key|api_?key|token|secret|password|passwd|credential)s?$)");
    return std::regex_search(n, pattern);
}

void scan_tree(const json& j, const std::string& path) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            const std::string p = path.empty() ? k : path + "." + k;
            if (key_like(k) && v.is_string() && !v.get<std::string>().empty())
                throw ConfigError(p + ": config must not contain key material; reference an environment variable "
                                      "with a '*_env' field instead");
            scan_tree(v, p);
        }
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) scan_tree(j[i], path + "[" + std::to_string(i) + "]");
    }
}

void collect_env_names(const json& j, std::set<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            if (k.size() >= 4 && k.compare(k.size() - 4, 4, "_env") == 0 && v.is_string()) out.insert(v.get<std::string>());
            collect_env_names(v, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_env_names(v, out);
    }
}

}  // namespace

void scan_for_key_material(const std::string& text, const std::vector<std::string>& secret_values) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    scan_tree(j, "");
    static const std::regex shapes(R"(sk-[A-Za-z0-9_\-]{16,}|AKIA[0-9A-Z]{16}|Bearer\s+[A-Za-z0-9._\-]{8,})");
    if (std::regex_search(text, shapes)) throw ConfigError("config contains what looks like an API key or token");
    for (const auto& s : secret_values)
        if (s.size() >= 4 && text.find(s) != std::string::npos)
            throw ConfigError("config contains the value of a credential environment variable");
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    const Reader r(j, "");
    RunConfig c;
    c.base_dir = base_dir;
    c.label = r.get_or<std::string>("label", c.label);
    c.seed = r.get_or<std::uint64_t>("seed", c.seed);
    if (r.has("dataset")) c.dataset = resolve(base_dir, r.get<std::string>("dataset"));
    if (r.has("shuffle_seed")) c.shuffle_seed = r.get<std::uint64_t>("shuffle_seed");

    if (!r.has("hierarchy") || !r.raw("hierarchy").is_array() || r.raw("hierarchy").empty())
        r.fail("must be a nonempty array", "hierarchy");
    int i = 0;
    for (const auto& t : r.raw("hierarchy")) {
        c.hierarchy.push_back(read_tier(Reader(t, "hierarchy[" + std::to_string(i) + "]"), base_dir, i));
        ++i;
    }
    {
        std::vector<ModelProfile> profiles;
        for (const auto& t : c.hierarchy) profiles.push_back(t.profile);
        try {
            validate_hierarchy(profiles);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("hierarchy: ") + e.what());
        }
        std::sort(c.hierarchy.begin(), c.hierarchy.end(),
                  [](const TierConfig& a, const TierConfig& b) { return a.profile.rank < b.profile.rank; });
    }

    if (r.has("flags")) c.flags = read_flags(r.child("flags"), c.flags);
    if (r.has("policies")) {
        const Reader pr = r.child("policies");
        for (const auto& [name, v] : r.raw("policies").items()) {
            const Reader p(v, pr.field(name));
            PolicyConfig pc;
            pc.flags = read_flags(p, c.flags);
            if (p.has("ranks")) pc.ranks = p.get<std::vector<int>>("ranks");
            c.policies.emplace(name, pc);
        }
    }

    if (r.has("conversation")) {
        const Reader cr = r.child("conversation");
        c.conversation.max_turns = cr.get_or<int>("max_turns", c.conversation.max_turns);
        c.conversation.sentinel = cr.get_or<std::string>("sentinel", c.conversation.sentinel);
        c.conversation.context_margin = cr.get_or<std::int64_t>("context_margin", c.conversation.context_margin);
        c.conversation.system_prompt = cr.get_or<std::string>("system_prompt", c.conversation.system_prompt);
        if (c.conversation.max_turns < 1) cr.fail("must be >= 1", "max_turns");
        if (c.conversation.sentinel.empty()) cr.fail("must be nonempty", "sentinel");
    }
    for (const auto& t : c.hierarchy) {
        if (!t.backend.sim) continue;
        try {
            validate_profile(*t.backend.sim, c.conversation.max_turns);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("hierarchy '" + t.profile.name + "'.backend.profile: " + e.what());
        }
    }
    if (r.has("retry")) {
        const Reader rr = r.child("retry");
        c.retry.retries = rr.get_or<int>("retries", c.retry.retries);
        c.retry.base_delay = std::chrono::milliseconds(rr.get_or<std::int64_t>("base_delay_ms", 1000));
        if (c.retry.retries < 0) rr.fail("must be >= 0", "retries");
    }
    if (r.has("prompt")) {
        const Reader pr = r.child("prompt");
        if (pr.has("template_file")) {
            const auto path = resolve(base_dir, pr.get<std::string>("template_file"));
            try {
                const json t = json::parse(read_file(path));
                read_prompt(Reader(t, path.string()), c.prompt);
            } catch (const json::exception& e) {
                throw ConfigError(path.string() + ": " + e.what());
            }
        }
        read_prompt(pr, c.prompt);
    }

    if (r.has("verdict")) {
        const Reader vr = r.child("verdict");
        const auto mode = vr.get_or<std::string>("mode", "human");
        if (mode == "human")
            c.verdict.mode = VerdictMode::human;
        else if (mode == "autonomous")
            c.verdict.mode = VerdictMode::autonomous;
        else
            vr.fail("must be 'human' or 'autonomous'", "mode");
        const auto src = vr.get_or<std::string>("human_source", "service");
        if (src == "service")
            c.verdict.human_source = HumanSource::service;
        else if (src == "terminal")
            c.verdict.human_source = HumanSource::terminal;
        else if (src == "scripted")
            c.verdict.human_source = HumanSource::scripted;
        else if (src == "marker")
            c.verdict.human_source = HumanSource::marker;
        else
            vr.fail("must be service, terminal, scripted, or marker", "human_source");
        if (vr.has("scripted")) c.verdict.scripted = vr.get<std::vector<bool>>("scripted");
        if (vr.has("judge")) c.verdict.judge = read_tier(vr.child("judge"), base_dir, 0);
        c.verdict.judge_system_prompt = vr.get_or<std::string>("judge_system_prompt", "");
    }
    if (c.verdict.mode == VerdictMode::autonomous && !c.verdict.judge)
        throw ConfigError("verdict: autonomous mode requires a judge");
    if (c.verdict.mode == VerdictMode::human && c.verdict.judge)
        throw ConfigError("verdict: a judge is configured in human mode; one run uses one verdict source");

    if (r.has("sandbox")) {
        const Reader sr = r.child("sandbox");
        c.sandbox.simulated = sr.get_or<bool>("simulated", false);
        if (sr.has("interpreter")) {
            const json& iv = sr.raw("interpreter");
            if (iv.is_string())
                c.sandbox.config.interpreter = {iv.get<std::string>()};
            else
                c.sandbox.config.interpreter = sr.get<std::vector<std::string>>("interpreter");
            if (c.sandbox.config.interpreter.empty()) sr.fail("must be nonempty", "interpreter");
        }
        c.sandbox.config.script_name = sr.get_or<std::string>("script_name", c.sandbox.config.script_name);
        c.sandbox.config.timeout = std::chrono::milliseconds(sr.get_or<std::int64_t>("timeout_ms", 60'000));
        c.sandbox.config.output_cap = sr.get_or<std::size_t>("output_cap", c.sandbox.config.output_cap);
        c.sandbox.config.path_env = sr.get_or<std::string>("path", c.sandbox.config.path_env);
        if (sr.has("scratch_root")) c.sandbox.config.scratch_root = resolve(base_dir, sr.get<std::string>("scratch_root"));
        if (c.sandbox.config.timeout.count() <= 0) sr.fail("must be positive", "timeout_ms");
    }

    if (r.has("store")) {
        const Reader sr = r.child("store");
        if (sr.has("path")) c.store.path = resolve(base_dir, sr.get<std::string>("path"));
        c.store.similarity_floor = sr.get_or<double>("similarity_floor", c.store.similarity_floor);
        if (sr.has("embedder")) {
            const Reader er = sr.child("embedder");
            const auto type = er.get_or<std::string>("type", "hashed");
            if (type == "hashed") {
                c.store.embedder = StoreSettings::EmbedderKind::hashed;
            } else if (type == "remote") {
                c.store.embedder = StoreSettings::EmbedderKind::remote;
                c.store.embed_base_url = er.get<std::string>("base_url");
                c.store.embed_model = er.get<std::string>("model");
                c.store.embed_auth_env = er.get_or<std::string>("auth_env", "");
            } else {
                er.fail("must be 'hashed' or 'remote'", "type");
            }
            c.store.dimension = er.get_or<std::size_t>("dimension", c.store.dimension);
            if (c.store.dimension == 0) er.fail("must be positive", "dimension");
        }
    }
    if (r.has("ledger")) {
        const Reader lr = r.child("ledger");
        if (lr.has("path")) c.ledger_path = resolve(base_dir, lr.get<std::string>("path"));
    }
    if (r.has("output_dir")) c.output_dir = r.get<std::string>("output_dir");
    c.output_dir = resolve(base_dir, c.output_dir.string());
    if (r.has("log")) {
        const Reader lr = r.child("log");
        if (lr.has("file")) c.log_file = resolve(base_dir, lr.get<std::string>("file"));
        c.log_level = lr.get_or<std::string>("level", c.log_level);
    }
    if (r.has("service")) {
        const Reader sr = r.child("service");
        c.service.host = sr.get_or<std::string>("host", c.service.host);
        c.service.port = sr.get_or<int>("port", c.service.port);
        c.service.preload_dataset = sr.get_or<bool>("preload_dataset", c.service.preload_dataset);
        if (c.service.port < 0 || c.service.port > 65535) sr.fail("out of range", "port");
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const auto base = std::filesystem::absolute(path).parent_path();

    std::set<std::string> env_names;
    try {
        collect_env_names(json::parse(text), env_names);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": not valid JSON: " + e.what());
    }
    RunConfig config = parse_config(text, base);
    if (config.dataset && std::filesystem::exists(*config.dataset)) {
        try {
            for (const auto& q : ingest_dataset(*config.dataset, config.seed))
                if (!q.api.real_key_ref.empty()) env_names.insert(q.api.real_key_ref);
        } catch (const DatasetError&) {
            // Reported when the dataset is actually used.
        }
    }
    std::vector<std::string> secrets;
    for (const auto& name : env_names)
        if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') secrets.emplace_back(v);
    scan_for_key_material(text, secrets);
    return config;
}

PolicyConfig resolve_policy(const RunConfig& config, const std::string& label) {
    if (auto it = config.policies.find(label); it != config.policies.end()) return it->second;
    std::string base = label;
    PolicyConfig p;
    p.flags.use_cot = false;
    auto strip = [&](const std::string& suffix) {
        if (base.size() > suffix.size() && base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
            base.resize(base.size() - suffix.size());
            return true;
        }
        return false;
    };
    p.flags.use_cot = strip("+cot");
    p.flags.use_solution_demo = strip("+demo");
    if (base == "hierarchy") {
        p.flags.use_hierarchy = true;
        return p;
    }
    if (base.rfind("rank:", 0) == 0) {
        try {
            std::size_t used = 0;
            const int rank = std::stoi(base.substr(5), &used);
            if (used == base.size() - 5) {
                p.flags.use_hierarchy = false;
                p.ranks = std::vector<int>{rank};
                return p;
            }
        } catch (const std::exception&) {
        }
    }
    if (label == config.label) {
        p.flags = config.flags;
        return p;
    }
    throw ConfigError("unknown policy label '" + label + "'");
}

RunConfig with_policy(RunConfig config, const std::string& label) {
    const PolicyConfig p = resolve_policy(config, label);
    config.label = label;
    config.flags = p.flags;
    if (p.ranks) {
        std::vector<TierConfig> kept;
        for (const auto& t : config.hierarchy)
            if (std::find(p.ranks->begin(), p.ranks->end(), t.profile.rank) != p.ranks->end()) kept.push_back(t);
        if (kept.size() != p.ranks->size()) throw ConfigError("policy '" + label + "' names a rank not in the hierarchy");
        config.hierarchy = std::move(kept);
    }
    return config;
}

namespace {

std::string safe_label(const std::string& label) {
    std::string safe;
    for (char ch : label)
        safe += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.') ? ch : '_';
    return safe.empty() ? "run" : safe;
}

std::filesystem::path expand_label(const std::filesystem::path& p, const std::string& label) {
    std::string s = p.string();
    for (std::size_t at = s.find("{label}"); at != std::string::npos; at = s.find("{label}", at))
        s.replace(at, 7, safe_label(label));
    return s;
}

}  // namespace

std::filesystem::path run_dir(const RunConfig& config) { return config.output_dir / safe_label(config.label); }

std::filesystem::path ledger_path(const RunConfig& config) {
    return config.ledger_path ? expand_label(*config.ledger_path, config.label) : run_dir(config) / "ledger.jsonl";
}

std::filesystem::path store_path(const RunConfig& config) {
    return config.store.path ? expand_label(*config.store.path, config.label) : run_dir(config) / "store.jsonl";
}

std::shared_ptr<ChatBackend> make_backend(const BackendConfig& cfg, std::uint64_t seed, int max_turns) {
    switch (cfg.kind) {
        case BackendConfig::Kind::scripted:
            if (!cfg.script_file.empty()) return load_scripted_backend(cfg.script_file.string());
            return scripted_backend_from_json(cfg.script.dump());
        case BackendConfig::Kind::remote:
            return std::make_shared<RemoteChatBackend>(cfg.remote);
        case BackendConfig::Kind::sim:
            return scripted_backend_from(*cfg.sim, seed, max_turns);
    }
    throw ConfigError("unknown backend kind");
}

std::shared_ptr<const Embedder> make_embedder(const StoreSettings& s) {
    if (s.embedder == StoreSettings::EmbedderKind::remote)
        return std::make_shared<RemoteEmbedder>(s.embed_base_url, s.embed_model, s.dimension, s.embed_auth_env);
    return std::make_shared<HashedBowEmbedder>(s.dimension);
}

}  // namespace tierqa
