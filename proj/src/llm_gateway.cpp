#include "l2r/llm_gateway.hpp"

#include "http_util.hpp"
#include "l2r/errors.hpp"
#include "l2r/util.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <thread>

namespace l2r {

void ProviderConfig::validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
}

nlohmann::ordered_json to_json(const ChatExchange& exchange) {
    nlohmann::ordered_json messages = nlohmann::ordered_json::array();
    for (const auto& m : exchange.request) messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::ordered_json out;
    out["call_index"] = exchange.call_index;
    out["request"] = std::move(messages);
    out["response_text"] = exchange.response_text;
    out["latency_ms"] = exchange.latency_ms;
    if (!exchange.error.empty()) out["error"] = exchange.error;
    return out;
}

void AuditLog::append(ChatExchange exchange) {
    std::lock_guard lock(mu_);
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        if (out) out << to_json(exchange).dump() << '\n';
    }
    exchanges_.push_back(std::move(exchange));
}

std::size_t AuditLog::size() const {
    std::lock_guard lock(mu_);
    return exchanges_.size();
}

std::optional<ChatExchange> AuditLog::find(std::uint64_t call_index) const {
    std::lock_guard lock(mu_);
    for (const auto& e : exchanges_) {
        if (e.call_index == call_index) return e;
    }
    return std::nullopt;
}

std::vector<ChatExchange> AuditLog::snapshot() const {
    std::lock_guard lock(mu_);
    return exchanges_;
}

ChatReply ChatProvider::complete(const MessageList& messages) {
    std::uint64_t index = 0;
    {
        std::lock_guard lock(mu_);
        index = next_call_++;
    }
    ChatExchange exchange;
    exchange.call_index = index;
    exchange.request = messages;
    auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
    };
    try {
        exchange.response_text = do_complete(messages);
    } catch (GatewayError& e) {
        e.set_audit_id(index);
        exchange.error = e.what();
        exchange.latency_ms = elapsed();
        audit_->append(std::move(exchange));
        throw;
    }
    exchange.latency_ms = elapsed();
    ChatReply reply{exchange.response_text, index};
    audit_->append(std::move(exchange));
    return reply;
}

std::uint64_t ChatProvider::calls() const {
    std::lock_guard lock(mu_);
    return next_call_ - 1;
}

RateLimiter::RateLimiter(unsigned requests_per_minute)
    : capacity_(std::max(1.0, static_cast<double>(requests_per_minute))),
      tokens_(capacity_),
      per_second_(static_cast<double>(requests_per_minute) / 60.0),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    for (;;) {
        auto now = std::chrono::steady_clock::now();
        tokens_ = std::min(capacity_, tokens_ + per_second_ * std::chrono::duration<double>(now - last_).count());
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        auto wait = std::chrono::duration<double>((1.0 - tokens_) / per_second_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

std::chrono::milliseconds backoff_delay(unsigned attempt, std::uint64_t random_bits) noexcept {
    const std::uint64_t cap = 500ULL << std::min(attempt, 20U);
    return std::chrono::milliseconds(random_bits % (cap + 1));
}

OpenAIProvider::OpenAIProvider(ProviderConfig config, std::shared_ptr<AuditLog> audit, Sleeper sleeper)
    : ChatProvider(std::move(audit)), config_(std::move(config)), sleeper_(std::move(sleeper)) {
    config_.validate();
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (config_.requests_per_minute > 0) limiter_ = std::make_unique<RateLimiter>(config_.requests_per_minute);
}

nlohmann::json OpenAIProvider::request_body(const MessageList& messages) const {
    nlohmann::json msgs = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", config_.model},
            {"temperature", config_.temperature},
            {"top_p", config_.top_p},
            {"messages", std::move(msgs)}};
}

std::string OpenAIProvider::do_complete(const MessageList& messages) {
    const auto key = detail::require_api_key(config_.api_key_env);
    const auto url = detail::split_url(config_.endpoint);
    const auto body = request_body(messages).dump();

    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::string last_failure;
    for (unsigned attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) sleeper_(backoff_delay(attempt - 1, rng()));
        if (limiter_) limiter_->acquire();

        auto client = detail::make_client(url.origin, config_.timeout_ms);
        client->set_bearer_token_auth(key);
        auto res = client->Post(url.path + "/chat/completions", body, "application/json");
        if (!res) {
            last_failure = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403) {
            throw AuthError("provider rejected API key (HTTP " + std::to_string(res->status) + ")");
        }
        // Rate limiting and overload are transient: retry like a transport failure.
        if (res->status == 429 || res->status == 503) {
            last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body;
            if (attempt == config_.max_retries) throw ProviderRejection(res->status, res->body);
            continue;
        }
        if (res->status / 100 != 2) throw ProviderRejection(res->status, res->body);
        try {
            auto reply = nlohmann::json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderRejection(res->status, std::string("unreadable completion: ") + e.what());
        }
    }
    throw TransportError("chat endpoint unreachable after " + std::to_string(config_.max_retries + 1) +
                         " attempts: " + last_failure);
}

MockProvider::MockProvider(Script script, Responder responder, std::shared_ptr<AuditLog> audit)
    : ChatProvider(std::move(audit)), script_(std::move(script)), responder_(std::move(responder)) {}

MockProvider::Script MockProvider::parse_script(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("mock script must be a JSON object");
    Script script;
    try {
        if (doc.contains("exact")) script.exact = doc.at("exact").get<std::map<std::string, std::string>>();
        if (doc.contains("hash")) script.by_hash = doc.at("hash").get<std::map<std::string, std::string>>();
        if (doc.contains("sequence")) script.sequence = doc.at("sequence").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed mock script: ") + e.what());
    }
    return script;
}

MockProvider::Script MockProvider::load_script(const std::string& path) {
    try {
        return parse_script(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string MockProvider::prompt_text(const MessageList& messages) {
    std::string out;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (i) out += "\n\n";
        out += messages[i].content;
    }
    return out;
}

std::string MockProvider::prompt_hash(const MessageList& messages) { return hex64(fnv1a64(prompt_text(messages))); }

std::string MockProvider::do_complete(const MessageList& messages) {
    const auto prompt = prompt_text(messages);
    const auto hash = hex64(fnv1a64(prompt));
    {
        std::lock_guard lock(mu_);
        if (auto it = script_.exact.find(prompt); it != script_.exact.end()) return it->second;
        if (auto it = script_.by_hash.find(hash); it != script_.by_hash.end()) return it->second;
        if (cursor_ < script_.sequence.size()) return script_.sequence[cursor_++];
    }
    if (responder_) {
        if (auto reply = responder_(prompt)) return *reply;
    }
    throw UnscriptedPromptError(hash);
}

}  // namespace l2r
