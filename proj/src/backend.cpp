#include "memreread/backend.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "memreread/util.hpp"

namespace memreread {

const char* call_tag_name(CallTag tag) {
    switch (tag) {
        case CallTag::read: return "read";
        case CallTag::answer: return "answer";
        case CallTag::decompose: return "decompose";
        case CallTag::integrate: return "integrate";
    }
    return "?";
}

CallTag call_tag_from_string(const std::string& name) {
    if (name == "read") return CallTag::read;
    if (name == "answer") return CallTag::answer;
    if (name == "decompose") return CallTag::decompose;
    if (name == "integrate") return CallTag::integrate;
    throw ConfigError("unknown call tag: " + name);
}

std::string Backend::complete(const CompletionRequest& request) {
    if (request.max_tokens <= 0) throw ConfigError("max_tokens must be > 0");
    std::string raw = do_complete(request);
    stats_.by_tag[static_cast<std::size_t>(request.tag)].fetch_add(1);
    return truncate_to_tokens(raw, static_cast<std::size_t>(request.max_tokens), *tokenizer_);
}

// ============================================================================
// Scripted backend
// ============================================================================

ScriptedBackend::ScriptedBackend(std::vector<ScriptedRule> rules, TokenizerPtr tokenizer)
    : Backend(std::move(tokenizer)) {
    slots_.reserve(rules.size());
    for (ScriptedRule& rule : rules) slots_.push_back({std::move(rule), false});
}

std::string ScriptedBackend::do_complete(const CompletionRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    for (Slot& slot : slots_) {
        if (slot.used) continue;
        bool matched = false;
        switch (slot.rule.match) {
            case ScriptedRule::Match::tag_equals:
                matched = slot.rule.pattern == call_tag_name(request.tag);
                break;
            case ScriptedRule::Match::prompt_contains:
                matched = request.prompt.find(slot.rule.pattern) != std::string::npos;
                break;
            case ScriptedRule::Match::prompt_regex:
                matched = std::regex_search(request.prompt, std::regex(slot.rule.pattern));
                break;
        }
        if (matched) {
            if (slot.rule.consume_once) slot.used = true;
            return slot.rule.response;
        }
    }
    throw ScriptExhaustedError("script has no rule for tag '" +
                               std::string(call_tag_name(request.tag)) + "', prompt prefix: " +
                               request.prompt.substr(0, 80));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path,
                                                            TokenizerPtr tokenizer) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("script file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_array()) throw ConfigError("script file must be a JSON list of rules");
    std::vector<ScriptedRule> rules;
    for (const auto& item : doc) {
        ScriptedRule rule;
        const std::string match = item.value("match", "tag_equals");
        if (match == "tag_equals") {
            rule.match = ScriptedRule::Match::tag_equals;
        } else if (match == "prompt_contains") {
            rule.match = ScriptedRule::Match::prompt_contains;
        } else if (match == "prompt_regex") {
            rule.match = ScriptedRule::Match::prompt_regex;
        } else {
            throw ConfigError("unknown script rule match kind: " + match);
        }
        rule.pattern = item.at("pattern").get<std::string>();
        rule.response = item.at("response").get<std::string>();
        rule.consume_once = item.value("consume_once", false);
        rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedBackend>(std::move(rules), std::move(tokenizer));
}

// ============================================================================
// HTTP backend
// ============================================================================

HttpBackend::HttpBackend(HttpBackendOptions options, TokenizerPtr tokenizer)
    : Backend(std::move(tokenizer)), options_(std::move(options)) {
    std::string base = options_.api_base;
    if (base.empty()) throw ConfigError("http backend requires api_base (or MEMREREAD_API_BASE)");
    if (starts_with(base, "https://")) {
        tls_ = true;
        base = base.substr(8);
    } else if (starts_with(base, "http://")) {
        base = base.substr(7);
    }
    const std::size_t slash = base.find('/');
    if (slash == std::string::npos) {
        host_ = base;
    } else {
        host_ = base.substr(0, slash);
        path_prefix_ = base.substr(slash);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

std::string HttpBackend::do_complete(const CompletionRequest& request) {
    nlohmann::json body = {
        {"model", options_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"max_tokens", request.max_tokens},
        {"temperature", request.temperature},
    };
    const std::string payload = body.dump();
    const std::string path = path_prefix_ + "/v1/chat/completions";

    std::string last_error;
    int backoff_ms = options_.backoff_initial_ms;
    const int attempts_allowed = options_.max_retries + 1;
    for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
        if (attempt > 1) {
            stats_.retries.fetch_add(1);
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Result res;
        if (tls_) {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
            httplib::SSLClient client(host_);
            client.set_read_timeout(options_.timeout_seconds, 0);
            if (!options_.api_key.empty())
                client.set_default_headers({{"Authorization", "Bearer " + options_.api_key}});
            res = client.Post(path, payload, "application/json");
#else
            throw ConfigError("https endpoints require an OpenSSL-enabled build; use http://");
#endif
        } else {
            httplib::Client client(host_);
            client.set_read_timeout(options_.timeout_seconds, 0);
            if (!options_.api_key.empty())
                client.set_default_headers({{"Authorization", "Bearer " + options_.api_key}});
            res = client.Post(path, payload, "application/json");
        }
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError("http status " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200),
                               attempt);
        }
        try {
            nlohmann::json parsed = nlohmann::json::parse(res->body);
            return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed completion response: ") + e.what(), attempt);
        }
    }
    throw BackendError("backend unreachable after " + std::to_string(attempts_allowed) +
                           " attempts (" + last_error + ")",
                       attempts_allowed);
}

// ============================================================================
// Factory
// ============================================================================

namespace {

std::string env_or(const char* name, const std::string& value) {
    if (!value.empty()) return value;
    const char* env = std::getenv(name);
    return env ? env : "";
}

}  // namespace

BackendPtr make_backend(const BackendConfig& config, TokenizerPtr tokenizer) {
    if (config.kind == "scripted") {
        if (config.script_path.empty())
            throw ConfigError("scripted backend requires script_path");
        return ScriptedBackend::from_file(config.script_path, std::move(tokenizer));
    }
    if (config.kind == "http") {
        HttpBackendOptions options;
        options.api_base = env_or("MEMREREAD_API_BASE", config.api_base);
        options.api_key = env_or("MEMREREAD_API_KEY", config.api_key);
        options.model = env_or("MEMREREAD_MODEL", config.model);
        return std::make_shared<HttpBackend>(std::move(options), std::move(tokenizer));
    }
    throw ConfigError("unknown backend kind: " + config.kind);
}

}  // namespace memreread
