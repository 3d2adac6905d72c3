#include "l2r/config.hpp"

#include "l2r/errors.hpp"
#include "l2r/util.hpp"

#include <toml.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <set>

namespace l2r {

namespace {

class Reader {
public:
    explicit Reader(std::string_view source) : source_(source) {}

    [[noreturn]] void fail(const toml::node& node, const std::string& what) const {
        throw ConfigError(source_ + ":" + std::to_string(node.source().begin.line) + ": " + what);
    }

    /// Rejects keys of `table` outside `allowed`.
    void check_keys(const toml::table& table, std::string_view section, std::set<std::string_view> allowed) const {
        for (auto&& [key, node] : table) {
            if (!allowed.contains(key.str())) {
                std::string name = section.empty() ? std::string(key.str()) : std::string(section) + "." + std::string(key.str());
                throw ConfigError(source_ + ":" + std::to_string(key.source().begin.line) + ": unknown key '" + name + "'");
            }
        }
    }

    void read(const toml::table& t, std::string_view key, std::string& out) const {
        if (auto* n = t.get(key)) {
            if (!n->is_string()) fail(*n, std::string(key) + " must be a string");
            out = n->value<std::string>().value();
        }
    }

    void read(const toml::table& t, std::string_view key, bool& out) const {
        if (auto* n = t.get(key)) {
            if (!n->is_boolean()) fail(*n, std::string(key) + " must be a boolean");
            out = n->value<bool>().value();
        }
    }

    void read(const toml::table& t, std::string_view key, double& out) const {
        if (auto* n = t.get(key)) {
            if (!n->is_number()) fail(*n, std::string(key) + " must be a number");
            out = n->value<double>().value();
        }
    }

    template <typename Int>
        requires std::is_integral_v<Int>
    void read(const toml::table& t, std::string_view key, Int& out) const {
        if (auto* n = t.get(key)) {
            if (!n->is_integer()) fail(*n, std::string(key) + " must be an integer");
            auto v = n->value<std::int64_t>().value();
            if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<Int>::max()) {
                fail(*n, std::string(key) + " is out of range");
            }
            out = static_cast<Int>(v);
        }
    }

    void read(const toml::table& t, std::string_view key, std::vector<std::string>& out) const {
        if (auto* n = t.get(key)) {
            auto* arr = n->as_array();
            if (!arr) fail(*n, std::string(key) + " must be an array of strings");
            out.clear();
            for (auto&& item : *arr) {
                if (!item.is_string()) fail(item, std::string(key) + " must be an array of strings");
                out.push_back(item.value<std::string>().value());
            }
        }
    }

    const toml::table* section(const toml::table& root, std::string_view name) const {
        auto* n = root.get(name);
        if (!n) return nullptr;
        if (!n->is_table()) fail(*n, "[" + std::string(name) + "] must be a table");
        return n->as_table();
    }

    /// Validates a value with the node's line attached.
    template <typename Fn>
    void check(const toml::table& t, std::string_view key, Fn&& fn) const {
        auto* n = t.get(key);
        if (!n) return;
        try {
            fn();
        } catch (const Error& e) {
            fail(*n, e.what());
        }
    }

private:
    std::string source_;
};

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

void validate_alpha(double alpha) {
    HardPolicy{alpha}.validate();
}

void validate_k(std::size_t k) {
    if (k == 0) throw ConfigError("k must be at least 1");
}

}  // namespace

void AppConfig::validate() const {
    if (provider.kind != "mock" && provider.kind != "openai") {
        throw ConfigError("provider.kind must be \"mock\" or \"openai\"");
    }
    provider.chat.validate();
    if (provider.kind == "openai" && provider.chat.endpoint.empty()) throw ConfigError("provider.endpoint is required");
    if (embedder.kind != "hash" && embedder.kind != "remote") {
        throw ConfigError("embedder.kind must be \"hash\" or \"remote\"");
    }
    if (embedder.dimension == 0) throw ConfigError("embedder.dimension must be at least 1");
    if (embedder.kind == "remote" && embedder.endpoint.empty()) throw ConfigError("embedder.endpoint is required");
    validate_k(pipeline.k);
    validate_alpha(pipeline.refusal.alpha);
    if (answer_parallelism == 0) throw ConfigError("answer.parallelism must be at least 1");
    if (ake.fan_out == 0) throw ConfigError("ake.fan_out must be at least 1");
    if (ake.parallelism == 0) throw ConfigError("ake.parallelism must be at least 1");
    if (server.port < 0 || server.port > 65535) throw ConfigError("server.port must be in [0, 65535]");
}

AppConfig AppConfig::parse(std::string_view text, std::string_view source, const std::string& base_dir) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        throw ConfigError(std::string(source) + ":" + std::to_string(e.source().begin.line) + ": " +
                          std::string(e.description()));
    }

    Reader r(source);
    AppConfig c;
    r.check_keys(root, "", {"provider", "embedder", "retrieval", "refusal", "answer", "ake", "server", "paths"});

    if (auto* t = r.section(root, "provider")) {
        r.check_keys(*t, "provider", {"kind", "endpoint", "model", "temperature", "top_p", "api_key_env",
                                      "timeout_ms", "max_retries", "requests_per_minute", "script", "audit_log"});
        r.read(*t, "kind", c.provider.kind);
        r.read(*t, "endpoint", c.provider.chat.endpoint);
        r.read(*t, "model", c.provider.chat.model);
        r.read(*t, "temperature", c.provider.chat.temperature);
        r.read(*t, "top_p", c.provider.chat.top_p);
        r.read(*t, "api_key_env", c.provider.chat.api_key_env);
        r.read(*t, "timeout_ms", c.provider.chat.timeout_ms);
        r.read(*t, "max_retries", c.provider.chat.max_retries);
        r.read(*t, "requests_per_minute", c.provider.chat.requests_per_minute);
        r.read(*t, "script", c.provider.script);
        r.read(*t, "audit_log", c.provider.audit_log);
        r.check(*t, "temperature", [&] { c.provider.chat.validate(); });
        r.check(*t, "top_p", [&] { c.provider.chat.validate(); });
    }
    if (auto* t = r.section(root, "embedder")) {
        r.check_keys(*t, "embedder", {"kind", "dimension", "endpoint", "model", "api_key_env", "timeout_ms"});
        r.read(*t, "kind", c.embedder.kind);
        r.read(*t, "dimension", c.embedder.dimension);
        r.read(*t, "endpoint", c.embedder.endpoint);
        r.read(*t, "model", c.embedder.model);
        r.read(*t, "api_key_env", c.embedder.api_key_env);
        r.read(*t, "timeout_ms", c.embedder.timeout_ms);
    }
    if (auto* t = r.section(root, "retrieval")) {
        r.check_keys(*t, "retrieval", {"k"});
        r.read(*t, "k", c.pipeline.k);
        r.check(*t, "k", [&] { validate_k(c.pipeline.k); });
    }
    if (auto* t = r.section(root, "refusal")) {
        r.check_keys(*t, "refusal", {"alpha", "soft_enabled", "hard_enabled"});
        r.read(*t, "alpha", c.pipeline.refusal.alpha);
        r.read(*t, "soft_enabled", c.pipeline.refusal.soft_enabled);
        r.read(*t, "hard_enabled", c.pipeline.refusal.hard_enabled);
        r.check(*t, "alpha", [&] { validate_alpha(c.pipeline.refusal.alpha); });
    }
    if (auto* t = r.section(root, "answer")) {
        r.check_keys(*t, "answer", {"step_by_step", "parallelism"});
        r.read(*t, "step_by_step", c.pipeline.step_by_step);
        r.read(*t, "parallelism", c.answer_parallelism);
    }
    if (auto* t = r.section(root, "ake")) {
        r.check_keys(*t, "ake", {"fan_out", "parallelism", "auto_accept"});
        r.read(*t, "fan_out", c.ake.fan_out);
        r.read(*t, "parallelism", c.ake.parallelism);
        r.read(*t, "auto_accept", c.ake_auto_accept);
    }
    if (auto* t = r.section(root, "server")) {
        r.check_keys(*t, "server", {"bind", "port", "cors_origins"});
        r.read(*t, "bind", c.server.bind);
        r.read(*t, "port", c.server.port);
        r.read(*t, "cors_origins", c.server.cors_origins);
    }
    if (auto* t = r.section(root, "paths")) {
        r.check_keys(*t, "paths", {"kb_dir", "prompts_dir", "jobs_dir"});
        r.read(*t, "kb_dir", c.paths.kb_dir);
        r.read(*t, "prompts_dir", c.paths.prompts_dir);
        r.read(*t, "jobs_dir", c.paths.jobs_dir);
    }

    c.paths.kb_dir = resolve(base_dir, c.paths.kb_dir);
    c.paths.prompts_dir = resolve(base_dir, c.paths.prompts_dir);
    c.paths.jobs_dir = c.paths.jobs_dir.empty() ? c.paths.kb_dir : resolve(base_dir, c.paths.jobs_dir);
    c.provider.script = resolve(base_dir, c.provider.script);
    c.provider.audit_log = resolve(base_dir, c.provider.audit_log);

    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(source) + ": " + e.what());
    }
    return c;
}

AppConfig AppConfig::load(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    auto base = std::filesystem::path(path).parent_path().string();
    return parse(text, path, base.empty() ? "." : base);
}

nlohmann::ordered_json runtime_json(const PipelineConfig& config) {
    nlohmann::ordered_json out;
    out["alpha"] = std::isinf(config.refusal.alpha) ? nlohmann::ordered_json(nullptr)
                                                     : nlohmann::ordered_json(config.refusal.alpha);
    out["k"] = config.k;
    out["soft_enabled"] = config.refusal.soft_enabled;
    out["hard_enabled"] = config.refusal.hard_enabled;
    out["step_by_step"] = config.step_by_step;
    return out;
}

PipelineConfig apply_runtime(const PipelineConfig& config, const nlohmann::json& update) {
    if (!update.is_object()) throw ValidationError("config update must be a JSON object");
    PipelineConfig next = config;
    for (auto it = update.begin(); it != update.end(); ++it) {
        const auto& key = it.key();
        const auto& v = it.value();
        auto need_bool = [&](bool& out) {
            if (!v.is_boolean()) throw ValidationError("'" + key + "' must be a boolean");
            out = v.get<bool>();
        };
        if (key == "alpha") {
            if (v.is_null()) {
                next.refusal.alpha = std::numeric_limits<double>::infinity();
            } else if (v.is_number()) {
                next.refusal.alpha = v.get<double>();
            } else {
                throw ValidationError("'alpha' must be a number or null (+inf)");
            }
            if (!(next.refusal.alpha > 0.0)) throw ValidationError("'alpha' must be > 0");
        } else if (key == "k") {
            if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
                throw ValidationError("'k' must be a positive integer");
            }
            next.k = v.get<std::size_t>();
        } else if (key == "soft_enabled") {
            need_bool(next.refusal.soft_enabled);
        } else if (key == "hard_enabled") {
            need_bool(next.refusal.hard_enabled);
        } else if (key == "step_by_step") {
            need_bool(next.step_by_step);
        } else {
            throw ValidationError("unknown config key '" + key + "'");
        }
    }
    return next;
}

std::string default_config_toml() {
    return R"(# l2r configuration

[provider]
kind = "mock"            # mock | openai
# endpoint = "https://api.openai.com/v1"
# model = "gpt-3.5-turbo-0613"
temperature = 0.0
top_p = 1.0
api_key_env = "L2R_API_KEY"
timeout_ms = 60000
max_retries = 3
# script = "mock_script.json"

[embedder]
kind = "hash"            # hash | remote
dimension = 64

[retrieval]
k = 4

[refusal]
alpha = 0.75
soft_enabled = true
hard_enabled = true

[answer]
step_by_step = true
parallelism = 1

[ake]
fan_out = 1
parallelism = 4
auto_accept = false

[server]
bind = "127.0.0.1"
port = 8080
cors_origins = ["http://localhost:5173"]

[paths]
kb_dir = "kb"
)";
}

}  // namespace l2r
