#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "memreread/core_types.hpp"
#include "memreread/tokenizer.hpp"

namespace memreread {

struct BackendError : std::runtime_error {
    BackendError(const std::string& what, int attempts)
        : std::runtime_error(what), attempts(attempts) {}
    int attempts = 0;
};

struct ScriptExhaustedError : BackendError {
    explicit ScriptExhaustedError(const std::string& what) : BackendError(what, 1) {}
};

// Request roles, used for accounting and for scripted-rule matching.
enum class CallTag { read, answer, decompose, integrate };

const char* call_tag_name(CallTag tag);
CallTag call_tag_from_string(const std::string& name);  // throws ConfigError

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 1024;
    double temperature = 0.0;
    CallTag tag = CallTag::read;
};

// Logical completions per tag plus transport retries, counted separately.
struct CallStats {
    std::array<std::atomic<std::int64_t>, 4> by_tag{};
    std::atomic<std::int64_t> retries{0};

    std::int64_t total() const {
        std::int64_t n = 0;
        for (const auto& c : by_tag) n += c.load();
        return n;
    }
    std::int64_t count(CallTag tag) const { return by_tag[static_cast<std::size_t>(tag)].load(); }
};

// Uniform completion interface. Implementations must be safe to share across
// concurrent trajectory runs. Responses are truncated to the request's
// max_tokens under the active tokenizer.
class Backend {
public:
    explicit Backend(TokenizerPtr tokenizer) : tokenizer_(std::move(tokenizer)) {}
    virtual ~Backend() = default;

    std::string complete(const CompletionRequest& request);

    const CallStats& stats() const { return stats_; }

protected:
    virtual std::string do_complete(const CompletionRequest& request) = 0;

    TokenizerPtr tokenizer_;
    CallStats stats_;
};

using BackendPtr = std::shared_ptr<Backend>;

// ============================================================================
// Scripted backend
// ============================================================================

struct ScriptedRule {
    enum class Match { tag_equals, prompt_contains, prompt_regex };
    Match match = Match::tag_equals;
    std::string pattern;
    std::string response;
    bool consume_once = false;
};

// Deterministic offline backend: the first matching rule wins; a request no
// rule matches raises ScriptExhaustedError naming the tag and prompt prefix.
class ScriptedBackend final : public Backend {
public:
    ScriptedBackend(std::vector<ScriptedRule> rules, TokenizerPtr tokenizer);

    // Script file: JSON list of rule objects
    //   {"match": "tag_equals"|"prompt_contains"|"prompt_regex",
    //    "pattern": "...", "response": "...", "consume_once": false}
    static std::shared_ptr<ScriptedBackend> from_file(const std::string& path,
                                                      TokenizerPtr tokenizer);

protected:
    std::string do_complete(const CompletionRequest& request) override;

private:
    struct Slot {
        ScriptedRule rule;
        bool used = false;
    };
    std::vector<Slot> slots_;
    std::mutex mutex_;
};

// ============================================================================
// HTTP backend (OpenAI-compatible /v1/chat/completions)
// ============================================================================

struct HttpBackendOptions {
    std::string api_base;  // e.g. http://localhost:8000
    std::string api_key;
    std::string model;
    int max_retries = 3;
    int backoff_initial_ms = 250;  // doubled per retry
    int timeout_seconds = 120;
};

class HttpBackend final : public Backend {
public:
    HttpBackend(HttpBackendOptions options, TokenizerPtr tokenizer);

protected:
    std::string do_complete(const CompletionRequest& request) override;

private:
    HttpBackendOptions options_;
    std::string host_;
    std::string path_prefix_;
    bool tls_ = false;
};

// Builds a backend from config; http fields fall back to MEMREREAD_API_BASE,
// MEMREREAD_API_KEY and MEMREREAD_MODEL.
BackendPtr make_backend(const BackendConfig& config, TokenizerPtr tokenizer);

}  // namespace memreread
