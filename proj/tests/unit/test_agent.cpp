#include <functional>

#include "doctest.h"
#include "memreread/agent.hpp"
#include "memreread/util.hpp"

using namespace memreread;

namespace {

// Backend that records every request and answers through a handler.
class ProbeBackend final : public Backend {
public:
    explicit ProbeBackend(std::function<std::string(const CompletionRequest&)> handler)
        : Backend(make_tokenizer("whitespace")), handler_(std::move(handler)) {}

    std::vector<std::pair<CallTag, std::string>> calls;

protected:
    std::string do_complete(const CompletionRequest& request) override {
        calls.emplace_back(request.tag, request.prompt);
        return handler_(request);
    }

private:
    std::function<std::string(const CompletionRequest&)> handler_;
};

// Document of exactly `chunks` chunks of `words_per_chunk` words each under
// the whitespace tokenizer.
std::string exact_chunk_doc(int chunks, int words_per_chunk) {
    std::string doc;
    for (int t = 0; t < chunks; ++t) {
        for (int w = 0; w < words_per_chunk; ++w) {
            doc += "c" + std::to_string(t) + "w" + std::to_string(w) + " ";
        }
    }
    return doc;
}

RunConfig test_config(int max_passes, int words_per_chunk = 4) {
    RunConfig config;
    config.chunk_size_tokens = words_per_chunk;
    config.max_rereading_passes = max_passes;
    config.max_response_tokens = 64;
    return config;
}

Task make_task(int chunks, int words_per_chunk = 4) {
    Task task;
    task.id = "agent-test";
    task.question = "what is the code?";
    task.document = exact_chunk_doc(chunks, words_per_chunk);
    task.gold_answers = {"seven"};
    return task;
}

// Handler pieces
std::string always_query(const CompletionRequest& request) {
    switch (request.tag) {
        case CallTag::read: return "mem";
        case CallTag::decompose: return "<query>what colour is it?</query>";
        case CallTag::answer: return "\\boxed{seven}";
        case CallTag::integrate: return "root updated";
    }
    return "";
}

std::string never_query(const CompletionRequest& request) {
    if (request.tag == CallTag::decompose) return "Memory is sufficient.";
    return always_query(request);
}

std::function<std::string(const CompletionRequest&)> query_n_then_stop(int n) {
    auto remaining = std::make_shared<int>(n);
    return [remaining](const CompletionRequest& request) {
        if (request.tag == CallTag::decompose) {
            if (*remaining > 0) {
                --*remaining;
                return std::string("<query>q ") + std::to_string(*remaining) + "</query>";
            }
            return std::string("no further gaps");
        }
        return always_query(request);
    };
}

int expected_calls(int T, int p, int d) { return T * (p + 1) + d + 2 * p + 1; }

}  // namespace

TEST_CASE("memorize_while_reading issues one read per chunk and logs each memory") {
    int counter = 0;
    auto backend = std::make_shared<ProbeBackend>([&](const CompletionRequest& request) {
        REQUIRE(request.tag == CallTag::read);
        return "m" + std::to_string(counter++);
    });
    const Agent agent(test_config(0), backend);
    const auto chunks = chunk_document(exact_chunk_doc(3, 4), 4, agent.tokenizer());
    REQUIRE(chunks.size() == 3);

    TrajectoryLog log;
    const MemoryState final_state = agent.memorize_while_reading("q", chunks, 0, &log);
    CHECK(final_state.text == "m2");
    CHECK(log.llm_calls == 3);
    REQUIRE(log.memories.size() == 3);
    CHECK(log.memories[0].text == "m0");
    CHECK(log.memories[1].text == "m1");
    CHECK(log.memories[2].text == "m2");
    CHECK(backend->calls.size() == 3);
    // running memory threads through the prompts
    CHECK(backend->calls[0].second.find("<memory> NO_MEMORY </memory>") != std::string::npos);
    CHECK(backend->calls[1].second.find("<memory> m0 </memory>") != std::string::npos);
    CHECK(backend->calls[2].second.find("<memory> m1 </memory>") != std::string::npos);
}

TEST_CASE("memorize_while_reading with no chunks returns the sentinel and makes no calls") {
    auto backend = std::make_shared<ProbeBackend>(always_query);
    const Agent agent(test_config(0), backend);
    TrajectoryLog log;
    const MemoryState state = agent.memorize_while_reading("q", {}, 0, &log);
    CHECK(state.text == kNoMemory);
    CHECK(log.llm_calls == 0);
    CHECK(backend->calls.empty());
}

TEST_CASE("single chunk pass renders NO_MEMORY exactly once") {
    auto backend = std::make_shared<ProbeBackend>(always_query);
    const Agent agent(test_config(0), backend);
    const auto chunks = chunk_document(exact_chunk_doc(1, 4), 4, agent.tokenizer());
    TrajectoryLog log;
    agent.memorize_while_reading("q", chunks, 0, &log);
    REQUIRE(backend->calls.size() == 1);
    CHECK(backend->calls[0].second.find(kNoMemory) != std::string::npos);
}

TEST_CASE("answer_from_memory extracts the boxed answer with fallback") {
    auto boxed = std::make_shared<ProbeBackend>(
        [](const CompletionRequest&) { return "thinking... \\boxed{42}"; });
    const Agent agent(test_config(0), boxed);
    CHECK(agent.answer_from_memory("q", "m") == "42");

    auto bare = std::make_shared<ProbeBackend>([](const CompletionRequest&) {
        return "forty-two";
    });
    const Agent agent2(test_config(0), bare);
    CHECK(agent2.answer_from_memory("q", "m") == "forty-two");
}

TEST_CASE("answer prompts carry the memory but never chunk text") {
    auto backend = std::make_shared<ProbeBackend>(always_query);
    const Agent agent(test_config(1), backend);
    const Task task = make_task(3);
    agent.run(task);
    for (const auto& [tag, prompt] : backend->calls) {
        if (tag != CallTag::answer) continue;
        CHECK(prompt.find("c0w0") == std::string::npos);
        CHECK(prompt.find("<memory>") != std::string::npos);
    }
}

TEST_CASE("p_c = 0 reduces to plain streaming: exactly T + 1 calls") {
    for (int T : {1, 3, 8}) {
        auto backend = std::make_shared<ProbeBackend>(always_query);
        const Agent agent(test_config(0), backend);
        const TrajectoryLog log = agent.run(make_task(T));
        CHECK(!log.incomplete);
        CHECK(log.rereading_passes == 0);
        CHECK(log.llm_calls == T + 1);
        CHECK(static_cast<int>(backend->calls.size()) == T + 1);
        CHECK(log.final_answer == "seven");
    }
}

TEST_CASE("always-query runs exhaust the pass budget: 4T + 10 calls at p_c = 3") {
    for (int T : {1, 3, 8}) {
        auto backend = std::make_shared<ProbeBackend>(always_query);
        const Agent agent(test_config(3), backend);
        const TrajectoryLog log = agent.run(make_task(T));
        CHECK(log.rereading_passes == 3);
        CHECK(log.llm_calls == 4 * T + 10);
        CHECK(log.llm_calls == expected_calls(T, 3, 3));
        CHECK(log.sub_qas.size() == 3);
    }
}

TEST_CASE("an immediate no-query decompose stops after T + 2 calls") {
    for (int T : {1, 3, 8}) {
        auto backend = std::make_shared<ProbeBackend>(never_query);
        const Agent agent(test_config(3), backend);
        const TrajectoryLog log = agent.run(make_task(T));
        CHECK(log.rereading_passes == 0);
        CHECK(log.sub_qas.empty());
        CHECK(log.llm_calls == T + 2);
        CHECK(log.llm_calls == expected_calls(T, 0, 1));
    }
}

TEST_CASE("query-twice-then-stop completes two passes") {
    const int T = 3;
    auto backend = std::make_shared<ProbeBackend>(query_n_then_stop(2));
    const Agent agent(test_config(3), backend);
    const TrajectoryLog log = agent.run(make_task(T));
    CHECK(log.rereading_passes == 2);
    CHECK(log.sub_qas.size() == 2);
    // loop exited via a third decompose that produced no query: d = p + 1
    CHECK(log.llm_calls == expected_calls(T, 2, 3));
    // memories: (p + 1) pass groups of T snapshots
    CHECK(log.memories.size() == static_cast<std::size_t>((2 + 1) * T));
}

TEST_CASE("fuzzed query patterns always respect the budget and the call formula") {
    Rng rng(31);
    for (int i = 0; i < 200; ++i) {
        const int T = static_cast<int>(rng.next_int(1, 6));
        const int p_c = static_cast<int>(rng.next_int(0, 4));
        // random decompose decisions
        auto decisions = std::make_shared<std::vector<bool>>();
        for (int k = 0; k < p_c + 1; ++k) decisions->push_back(rng.next_int(0, 1) == 1);
        auto step = std::make_shared<std::size_t>(0);
        auto backend = std::make_shared<ProbeBackend>([=](const CompletionRequest& request) {
            if (request.tag == CallTag::decompose) {
                const bool ask = (*decisions)[std::min(*step, decisions->size() - 1)];
                ++*step;
                return ask ? std::string("<query>next gap</query>")
                           : std::string("memory covers everything");
            }
            return always_query(request);
        });
        const Agent agent(test_config(p_c, 3), backend);
        const TrajectoryLog log = agent.run(make_task(T, 3));

        REQUIRE(!log.incomplete);
        const int p = log.rereading_passes;
        CHECK(p <= p_c);
        CHECK(static_cast<int>(log.sub_qas.size()) == p);
        const int d = (p == p_c) ? p : p + 1;
        CHECK(log.llm_calls == expected_calls(T, p, d));
        CHECK(log.memories.size() == static_cast<std::size_t>((p + 1) * T));
        CHECK(validate_trajectory(log, agent.config(), make_task(T, 3)).empty());
    }
}

TEST_CASE("sub-questions enter query history only after they are generated") {
    auto counter = std::make_shared<int>(0);
    auto backend = std::make_shared<ProbeBackend>([counter](const CompletionRequest& request) {
        if (request.tag == CallTag::decompose) {
            return "<query>unique question " + std::to_string((*counter)++) + "</query>";
        }
        if (request.tag == CallTag::answer) return std::string("\\boxed{a}");
        if (request.tag == CallTag::integrate) return std::string("root");
        return std::string("mem");
    });
    const Agent agent(test_config(3), backend);
    const TrajectoryLog log = agent.run(make_task(2));
    REQUIRE(log.rereading_passes == 3);

    int decompose_seen = 0;
    for (const auto& [tag, prompt] : backend->calls) {
        if (tag != CallTag::decompose) continue;
        for (int q = 0; q < 3; ++q) {
            const std::string needle = "unique question " + std::to_string(q);
            const bool should_appear = q < decompose_seen;
            CHECK((prompt.find(needle) != std::string::npos) == should_appear);
        }
        ++decompose_seen;
    }
    CHECK(decompose_seen == 3);
}

TEST_CASE("scripted runs are deterministic modulo wall time") {
    auto run_once = [] {
        auto backend = std::make_shared<ProbeBackend>(query_n_then_stop(1));
        const Agent agent(test_config(2), backend);
        TrajectoryLog log = agent.run(make_task(3));
        log.wall_time_ms = 0;
        return log;
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("at most two memory texts are ever live, regardless of chunk count") {
    for (int T : {1, 4, 16}) {
        auto backend = std::make_shared<ProbeBackend>(always_query);
        const Agent agent(test_config(2), backend);
        RunStats stats;
        const TrajectoryLog log = agent.run(make_task(T), &stats);
        CHECK(!log.incomplete);
        CHECK(stats.peak_live_memory_texts <= 2);
        CHECK(stats.peak_live_memory_bytes > 0);
        CHECK(log.peak_memory_bytes == stats.peak_live_memory_bytes);
    }
}

TEST_CASE("production mode skips per-step snapshots") {
    auto backend = std::make_shared<ProbeBackend>(always_query);
    RunConfig config = test_config(1);
    config.log_memories = false;
    const Agent agent(config, backend);
    const TrajectoryLog log = agent.run(make_task(3));
    CHECK(log.memories.empty());
    CHECK(log.llm_calls == expected_calls(3, 1, 1));
}

TEST_CASE("backend failure yields a partial log marked incomplete") {
    auto calls = std::make_shared<int>(0);
    auto backend = std::make_shared<ProbeBackend>([calls](const CompletionRequest& request) {
        if (++*calls > 4) throw BackendError("endpoint gone", 3);
        return always_query(request);
    });
    const Agent agent(test_config(3), backend);
    const TrajectoryLog log = agent.run(make_task(3));
    CHECK(log.incomplete);
    CHECK(log.error.find("endpoint gone") != std::string::npos);
    CHECK(log.llm_calls < expected_calls(3, 3, 3));
    CHECK(!log.memories.empty());
}

TEST_CASE("answer_at_every_step probes each snapshot and flags missing ones") {
    auto backend = std::make_shared<ProbeBackend>([](const CompletionRequest& request) {
        if (request.tag == CallTag::read) return std::string("mem with seven inside");
        if (request.tag == CallTag::answer) {
            // echo-style answerer: correct iff the memory holds the answer
            if (request.prompt.find("seven") != std::string::npos)
                return std::string("\\boxed{seven}");
            return std::string("\\boxed{unknown}");
        }
        return std::string("x");
    });
    const Agent agent(test_config(0), backend);
    const Task task = make_task(3);
    const TrajectoryLog log = agent.run(task);

    const auto before = backend->calls.size();
    const auto grid = agent.answer_at_every_step(task, log);
    REQUIRE(grid.size() == 3);
    CHECK(backend->calls.size() == before + 3);
    for (const auto& step : grid) CHECK(step.correct);

    TrajectoryLog truncated = log;
    truncated.memories.pop_back();
    CHECK_THROWS_WITH_AS(agent.answer_at_every_step(task, truncated),
                         doctest::Contains("log_memories"), std::runtime_error);

    TrajectoryLog empty;
    empty.task_id = task.id;
    Task empty_doc_task = task;
    empty_doc_task.document = "";
    const auto empty_grid = agent.answer_at_every_step(empty_doc_task, empty);
    CHECK(empty_grid.empty());
}

TEST_CASE("duplicate sub-questions proceed with a warning rather than dedup") {
    auto backend = std::make_shared<ProbeBackend>(always_query);  // identical query each pass
    const Agent agent(test_config(2), backend);
    const TrajectoryLog log = agent.run(make_task(2));
    CHECK(log.rereading_passes == 2);  // not deduplicated
    CHECK(log.sub_qas[0].sub_question == log.sub_qas[1].sub_question);
}
