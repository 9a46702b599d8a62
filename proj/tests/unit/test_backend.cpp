#include <cstdio>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "memreread/backend.hpp"
#include "memreread/util.hpp"

using namespace memreread;

namespace {

std::shared_ptr<ScriptedBackend> scripted(std::vector<ScriptedRule> rules) {
    return std::make_shared<ScriptedBackend>(std::move(rules), make_tokenizer("whitespace"));
}

}  // namespace

TEST_CASE("scripted rule matches by tag") {
    auto backend = scripted({{ScriptedRule::Match::tag_equals, "read", "MEM-A", false}});
    CompletionRequest request;
    request.prompt = "anything";
    request.tag = CallTag::read;
    CHECK(backend->complete(request) == "MEM-A");
    CHECK(backend->stats().count(CallTag::read) == 1);
    CHECK(backend->complete(request) == "MEM-A");
    CHECK(backend->stats().count(CallTag::read) == 2);
}

TEST_CASE("first matching rule wins and consume_once retires a rule") {
    auto backend = scripted({
        {ScriptedRule::Match::prompt_contains, "special", "first", true},
        {ScriptedRule::Match::tag_equals, "decompose", "second", false},
    });
    CompletionRequest request;
    request.prompt = "a special prompt";
    request.tag = CallTag::decompose;
    CHECK(backend->complete(request) == "first");
    CHECK(backend->complete(request) == "second");
    CHECK(backend->complete(request) == "second");
}

TEST_CASE("prompt_regex rules match") {
    auto backend = scripted({{ScriptedRule::Match::prompt_regex, "chunk [0-9]+", "hit", false}});
    CompletionRequest request;
    request.prompt = "this contains chunk 42 inside";
    request.tag = CallTag::read;
    CHECK(backend->complete(request) == "hit");
}

TEST_CASE("unmatched request raises a script-exhausted error naming the tag") {
    auto backend = scripted({{ScriptedRule::Match::tag_equals, "read", "x", false}});
    CompletionRequest request;
    request.prompt = "some long prompt text that should be cut down in the error";
    request.tag = CallTag::integrate;
    CHECK_THROWS_WITH_AS(backend->complete(request), doctest::Contains("integrate"),
                         ScriptExhaustedError);
}

TEST_CASE("responses are truncated to max_tokens under the active tokenizer") {
    auto backend = scripted({{ScriptedRule::Match::tag_equals, "read", "a b c d e f", false}});
    CompletionRequest request;
    request.tag = CallTag::read;
    request.max_tokens = 3;
    const std::string out = backend->complete(request);
    CHECK(make_tokenizer("whitespace")->count(out) == 3);
}

TEST_CASE("script files load rule lists in order") {
    const std::string path = "unit_script.json";
    write_file(path, R"([
        {"match": "prompt_contains", "pattern": "alpha", "response": "A", "consume_once": true},
        {"match": "tag_equals", "pattern": "answer", "response": "\\boxed{42}"}
    ])");
    auto backend = ScriptedBackend::from_file(path, make_tokenizer("whitespace"));
    CompletionRequest request;
    request.prompt = "alpha beta";
    request.tag = CallTag::answer;
    CHECK(backend->complete(request) == "A");
    CHECK(backend->complete(request) == "\\boxed{42}");
    std::remove(path.c_str());
}

TEST_CASE("malformed script files are configuration errors") {
    const std::string path = "unit_script_bad.json";
    write_file(path, "{}");
    CHECK_THROWS_AS(ScriptedBackend::from_file(path, make_tokenizer("whitespace")), ConfigError);
    write_file(path, "not json");
    CHECK_THROWS_AS(ScriptedBackend::from_file(path, make_tokenizer("whitespace")), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("scripted backend is deterministic across identical request sequences") {
    const std::vector<ScriptedRule> rules = {
        {ScriptedRule::Match::tag_equals, "read", "r1", true},
        {ScriptedRule::Match::tag_equals, "read", "r2", false},
        {ScriptedRule::Match::tag_equals, "answer", "a", false},
    };
    auto one = scripted(rules);
    auto two = scripted(rules);
    const CallTag tags[] = {CallTag::read, CallTag::read, CallTag::answer, CallTag::read};
    for (CallTag tag : tags) {
        CompletionRequest request;
        request.tag = tag;
        CHECK(one->complete(request) == two->complete(request));
    }
}

TEST_CASE("http backend round-trips against a local stub") {
    httplib::Server server;
    std::string seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        nlohmann::json reply = {
            {"choices",
             nlohmann::json::array(
                 {{{"message", {{"role", "assistant"}, {"content", "stub says hi"}}}}})}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpBackendOptions options;
    options.api_base = "http://127.0.0.1:" + std::to_string(port);
    options.model = "stub-model";
    options.max_retries = 0;
    HttpBackend backend(options, make_tokenizer("whitespace"));

    CompletionRequest request;
    request.prompt = "ping";
    request.max_tokens = 16;
    request.tag = CallTag::answer;
    CHECK(backend.complete(request) == "stub says hi");

    const auto sent = nlohmann::json::parse(seen_body);
    CHECK(sent["model"] == "stub-model");
    CHECK(sent["messages"][0]["role"] == "user");
    CHECK(sent["messages"][0]["content"] == "ping");

    server.stop();
    server_thread.join();
}

TEST_CASE("http backend retries transport failures and reports the attempt count") {
    HttpBackendOptions options;
    options.api_base = "http://127.0.0.1:9";  // discard port; nothing listens
    options.model = "m";
    options.max_retries = 2;
    options.backoff_initial_ms = 1;
    options.timeout_seconds = 1;
    HttpBackend backend(options, make_tokenizer("whitespace"));
    CompletionRequest request;
    request.prompt = "ping";
    try {
        backend.complete(request);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.attempts == 3);
        CHECK(backend.stats().retries.load() == 2);
    }
}

TEST_CASE("make_backend rejects unknown kinds and missing scripts") {
    BackendConfig config;
    config.kind = "grpc";
    CHECK_THROWS_AS(make_backend(config, make_tokenizer("whitespace")), ConfigError);
    config.kind = "scripted";
    config.script_path = "";
    CHECK_THROWS_AS(make_backend(config, make_tokenizer("whitespace")), ConfigError);
}
