#pragma once

#include <string>
#include <vector>

#include "memreread/backend.hpp"
#include "memreread/core_types.hpp"
#include "memreread/prompts.hpp"
#include "memreread/tokenizer.hpp"

namespace memreread {

// Per-run instrumentation. The agent keeps at most two memory texts alive at
// any instant (the root memory and the current sub-pass memory), independent
// of document length; these counters make that observable.
struct RunStats {
    int peak_live_memory_texts = 0;
    std::int64_t peak_live_memory_bytes = 0;
};

// One diagnostics probe: the answer produced when a logged memory snapshot is
// treated as the final memory.
struct StepAnswer {
    int pass_index = 0;
    int chunk_index = 0;
    std::string answer;
    bool correct = false;
};

// Streaming memorize-while-reading agent with question-decomposition
// rereading. One run is strictly sequential; a single Agent may serve many
// concurrent runs (runs share only the backend and immutable config).
class Agent {
public:
    Agent(RunConfig config, BackendPtr backend);
    Agent(RunConfig config, BackendPtr backend, PromptSet prompts);

    // Executes the full workflow: initial reading pass, up to p_c
    // decompose/reread/integrate rounds, final answer. Backend errors abort
    // the run and yield a partial log marked incomplete.
    TrajectoryLog run(const Task& task) const;
    TrajectoryLog run(const Task& task, RunStats* stats) const;

    // One streaming pass over the chunks guided by `question`, starting from
    // NO_MEMORY. Logs every intermediate memory at (pass_index, t) when a log
    // is given and eval-mode logging is on. Empty chunk list returns the
    // NO_MEMORY sentinel without any backend call.
    MemoryState memorize_while_reading(const std::string& question, const std::vector<Chunk>& chunks,
                                       int pass_index, TrajectoryLog* log) const;

    // One answering completion over the memory; returns the boxed answer.
    std::string answer_from_memory(const std::string& question, const std::string& memory) const;

    // Re-answers the task from every logged memory snapshot. Requires a
    // complete eval-mode log; throws when snapshots are missing.
    std::vector<StepAnswer> answer_at_every_step(const Task& task, const TrajectoryLog& log) const;

    const RunConfig& config() const { return config_; }
    const Tokenizer& tokenizer() const { return *tokenizer_; }

private:
    struct LiveMemory;

    MemoryState memorize_pass(const std::string& question, const std::vector<Chunk>& chunks,
                              int pass_index, TrajectoryLog* log, LiveMemory* live) const;

    RunConfig config_;
    BackendPtr backend_;
    PromptSet prompts_;
    TokenizerPtr tokenizer_;
};

// Library entry point: runs one task under the given config and backend.
TrajectoryLog run_task(const Task& task, const RunConfig& config, BackendPtr backend);

}  // namespace memreread
