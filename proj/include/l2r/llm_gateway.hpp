#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace l2r {

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

using MessageList = std::vector<ChatMessage>;

inline MessageList user_prompt(std::string content) { return {{"user", std::move(content)}}; }

struct ProviderConfig {
    std::string endpoint;
    std::string model;
    double temperature = 0.0;
    double top_p = 1.0;
    std::string api_key_env = "L2R_API_KEY";
    unsigned timeout_ms = 60000;
    unsigned max_retries = 3;
    /// Token-bucket limit on remote calls; 0 disables limiting.
    unsigned requests_per_minute = 0;

    /// Throws ConfigError when temperature < 0 or top_p outside (0, 1].
    void validate() const;
};

struct ChatExchange {
    std::uint64_t call_index = 0;
    MessageList request;
    std::string response_text;
    std::uint64_t latency_ms = 0;
    std::string error;  // empty on success
};

nlohmann::ordered_json to_json(const ChatExchange& exchange);

/// Append-only record of every provider call. Optionally mirrored to a JSONL file.
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(std::string jsonl_path) : path_(std::move(jsonl_path)) {}

    void append(ChatExchange exchange);
    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::optional<ChatExchange> find(std::uint64_t call_index) const;
    [[nodiscard]] std::vector<ChatExchange> snapshot() const;

private:
    mutable std::mutex mu_;
    std::vector<ChatExchange> exchanges_;
    std::string path_;
};

struct ChatReply {
    std::string text;
    std::uint64_t audit_id = 0;
};

/// Chat-completion provider. complete() numbers every call, records it in the
/// audit log (failures included), and tags gateway errors with the audit id.
class ChatProvider {
public:
    explicit ChatProvider(std::shared_ptr<AuditLog> audit = nullptr)
        : audit_(audit ? std::move(audit) : std::make_shared<AuditLog>()) {}
    virtual ~ChatProvider() = default;
    ChatProvider(const ChatProvider&) = delete;
    ChatProvider& operator=(const ChatProvider&) = delete;

    ChatReply complete(const MessageList& messages);

    [[nodiscard]] std::uint64_t calls() const;
    [[nodiscard]] AuditLog& audit() const noexcept { return *audit_; }
    [[nodiscard]] std::shared_ptr<AuditLog> audit_ptr() const noexcept { return audit_; }

protected:
    virtual std::string do_complete(const MessageList& messages) = 0;

private:
    std::shared_ptr<AuditLog> audit_;
    mutable std::mutex mu_;
    std::uint64_t next_call_ = 1;
};

/// Token bucket sized to one minute of requests.
class RateLimiter {
public:
    explicit RateLimiter(unsigned requests_per_minute);
    void acquire();

private:
    std::mutex mu_;
    double capacity_;
    double tokens_;
    double per_second_;
    std::chrono::steady_clock::time_point last_;
};

/// OpenAI-compatible POST {endpoint}/chat/completions client.
class OpenAIProvider final : public ChatProvider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit OpenAIProvider(ProviderConfig config, std::shared_ptr<AuditLog> audit = nullptr,
                            Sleeper sleeper = {});

    [[nodiscard]] const ProviderConfig& config() const noexcept { return config_; }
    /// Request body as sent on the wire.
    [[nodiscard]] nlohmann::json request_body(const MessageList& messages) const;

protected:
    std::string do_complete(const MessageList& messages) override;

private:
    ProviderConfig config_;
    Sleeper sleeper_;
    std::unique_ptr<RateLimiter> limiter_;
};

/// Backoff before retry `attempt` (0-based): uniform in [0, 500ms * 2^attempt].
std::chrono::milliseconds backoff_delay(unsigned attempt, std::uint64_t random_bits) noexcept;

/// Deterministic scripted provider. Matchers are tried in order: exact
/// prompt text, prompt hash, next unused sequence slot, then the optional
/// responder. Anything else raises UnscriptedPromptError.
class MockProvider final : public ChatProvider {
public:
    struct Script {
        std::map<std::string, std::string> exact;
        std::map<std::string, std::string> by_hash;
        std::vector<std::string> sequence;
    };
    using Responder = std::function<std::optional<std::string>(const std::string& prompt)>;

    explicit MockProvider(Script script = {}, Responder responder = {}, std::shared_ptr<AuditLog> audit = nullptr);

    /// {"exact": {prompt: reply}, "hash": {hex: reply}, "sequence": [reply, ...]}
    static Script parse_script(const nlohmann::json& doc);
    static Script load_script(const std::string& path);

    /// The text matched by exact matchers: message contents joined by a blank line.
    static std::string prompt_text(const MessageList& messages);
    static std::string prompt_hash(const MessageList& messages);

protected:
    std::string do_complete(const MessageList& messages) override;

private:
    std::mutex mu_;
    Script script_;
    Responder responder_;
    std::size_t cursor_ = 0;
};

}  // namespace l2r
