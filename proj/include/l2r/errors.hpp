#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace l2r {

// Root of every domain error. The CLI maps these to exit code 1 and the
// service maps them to 4xx/5xx depending on the concrete type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Parse failure. `line()` is 1-based when the input is line oriented, 0 otherwise.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SchemaError : public ParseError {
public:
    using ParseError::ParseError;
};

class DuplicateIdError : public Error {
public:
    explicit DuplicateIdError(std::uint64_t id, std::size_t line = 0)
        : Error("duplicate knowledge id " + std::to_string(id) +
                (line ? " at line " + std::to_string(line) : std::string{})),
          id_(id) {}

    [[nodiscard]] std::uint64_t id() const noexcept { return id_; }

private:
    std::uint64_t id_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Action on an item that is already resolved or locked (HTTP 409).
class ConflictError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Embedding provider failures.
class ProviderError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public ProviderError {
public:
    using ProviderError::ProviderError;
};

class CacheCorrupt : public Error {
public:
    using Error::Error;
};

// Chat provider failures.
class GatewayError : public Error {
public:
    using Error::Error;

    /// Audit log call index of the failed exchange (0 when unknown).
    [[nodiscard]] std::uint64_t audit_id() const noexcept { return audit_id_; }
    void set_audit_id(std::uint64_t id) noexcept { audit_id_ = id; }

private:
    std::uint64_t audit_id_ = 0;
};

class AuthError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class TransportError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class ProviderRejection : public GatewayError {
public:
    ProviderRejection(int status, std::string body)
        : GatewayError("provider rejected request with HTTP " + std::to_string(status) + ": " + body),
          status_(status), body_(std::move(body)) {}

    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class UnscriptedPromptError : public GatewayError {
public:
    explicit UnscriptedPromptError(std::string prompt_hash)
        : GatewayError("mock provider has no script entry for prompt hash " + prompt_hash),
          prompt_hash_(std::move(prompt_hash)) {}

    [[nodiscard]] const std::string& prompt_hash() const noexcept { return prompt_hash_; }

private:
    std::string prompt_hash_;
};

class MissingSlotError : public Error {
public:
    explicit MissingSlotError(std::string slot)
        : Error("missing prompt slot: " + slot), slot_(std::move(slot)) {}

    [[nodiscard]] const std::string& slot() const noexcept { return slot_; }

private:
    std::string slot_;
};

class TooFewChoices : public Error {
public:
    using Error::Error;
};

/// Raised when a model exchange cannot be turned into a response. Keeps the
/// raw model text so curators can inspect prompt drift.
class PipelineError : public Error {
public:
    PipelineError(const std::string& what, std::string raw_response, std::uint64_t audit_id)
        : Error(what), raw_response_(std::move(raw_response)), audit_id_(audit_id) {}

    [[nodiscard]] const std::string& raw_response() const noexcept { return raw_response_; }
    [[nodiscard]] std::uint64_t audit_id() const noexcept { return audit_id_; }

private:
    std::string raw_response_;
    std::uint64_t audit_id_;
};

class MissingCache : public Error {
public:
    using Error::Error;
};

class MissingGoldKnowledge : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace l2r
