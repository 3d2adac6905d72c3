#pragma once

#include "l2r/ake.hpp"
#include "l2r/llm_gateway.hpp"
#include "l2r/pipeline.hpp"
#include "l2r/retrieval.hpp"

#include <json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace l2r {

struct ProviderSettings {
    std::string kind = "mock";  // mock | openai
    ProviderConfig chat;
    /// Mock script (JSON); empty means an empty script.
    std::string script;
    /// Optional JSONL mirror of the audit log.
    std::string audit_log;
};

struct EmbedderSettings {
    std::string kind = "hash";  // hash | remote
    std::size_t dimension = kHashEmbedderDimension;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "L2R_API_KEY";
    unsigned timeout_ms = 30000;
};

struct ServerSettings {
    std::string bind = "127.0.0.1";
    int port = 8080;
    std::vector<std::string> cors_origins;
};

struct PathSettings {
    std::string kb_dir = "kb";
    /// Directory of <template>.txt overrides; empty keeps the built-ins.
    std::string prompts_dir;
    /// Defaults to kb_dir.
    std::string jobs_dir;
};

/// Everything the CLI and the service read from the TOML file. Relative
/// paths are resolved against the directory holding the file.
struct AppConfig {
    ProviderSettings provider;
    EmbedderSettings embedder;
    PipelineConfig pipeline;
    unsigned answer_parallelism = 1;
    AkeConfig ake;
    bool ake_auto_accept = false;
    ServerSettings server;
    PathSettings paths;

    /// Throws ConfigError describing the first invalid value.
    void validate() const;

    /// Parses TOML text. Syntax errors, unknown keys and wrong types raise
    /// ConfigError with "<source>:<line>: ..." messages.
    static AppConfig parse(std::string_view toml, std::string_view source = "config.toml",
                           const std::string& base_dir = ".");
    static AppConfig load(const std::string& path);
};

/// The runtime-tunable subset exposed at /v1/config:
/// {alpha, k, soft_enabled, hard_enabled, step_by_step}. alpha=+inf is null.
nlohmann::ordered_json runtime_json(const PipelineConfig& config);

/// Applies a partial runtime update; unknown keys or bad values raise
/// ValidationError and leave `config` unchanged.
PipelineConfig apply_runtime(const PipelineConfig& config, const nlohmann::json& update);

/// Template written by `l2r init`.
std::string default_config_toml();

}  // namespace l2r
