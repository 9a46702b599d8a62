#include "memreread/agent.hpp"

#include <algorithm>
#include <chrono>

#include "memreread/advantage.hpp"
#include "memreread/util.hpp"

namespace memreread {

namespace {

PromptSet load_prompts(const RunConfig& config) {
    if (!config.prompt_dir.empty()) return PromptSet::from_dir(config.prompt_dir);
    return PromptSet::defaults();
}

}  // namespace

// Tracks the memory buffers that are live at an instant. The workflow holds
// at most the root memory plus the current sub-pass memory.
struct Agent::LiveMemory {
    std::size_t root_bytes = 0;
    std::size_t sub_bytes = 0;
    int live_texts = 0;
    RunStats* stats = nullptr;

    void observe() {
        if (!stats) return;
        stats->peak_live_memory_texts = std::max(stats->peak_live_memory_texts, live_texts);
        stats->peak_live_memory_bytes =
            std::max<std::int64_t>(stats->peak_live_memory_bytes,
                                   static_cast<std::int64_t>(root_bytes + sub_bytes));
    }
};

Agent::Agent(RunConfig config, BackendPtr backend)
    : Agent(std::move(config), std::move(backend), PromptSet{}) {
    prompts_ = load_prompts(config_);
}

Agent::Agent(RunConfig config, BackendPtr backend, PromptSet prompts)
    : config_(std::move(config)), backend_(std::move(backend)), prompts_(std::move(prompts)) {
    config_.validate();
    tokenizer_ = make_tokenizer(config_.tokenizer);
}

MemoryState Agent::memorize_pass(const std::string& question, const std::vector<Chunk>& chunks,
                                 int pass_index, TrajectoryLog* log, LiveMemory* live) const {
    std::string memory = kNoMemory;
    if (chunks.empty()) return MemoryState{memory, pass_index, 0};

    for (const Chunk& chunk : chunks) {
        RenderArgs args;
        args.question = question;
        args.memory = memory;
        args.chunk = chunk.text;
        CompletionRequest request;
        request.prompt = render(prompts_, PromptKind::reading, args);
        request.max_tokens = config_.max_response_tokens;
        request.temperature = config_.temperature;
        request.tag = CallTag::read;
        memory = trim(backend_->complete(request));
        if (log) {
            ++log->llm_calls;
            if (config_.log_memories) {
                log->memories.push_back(MemoryState{memory, pass_index, chunk.index});
            }
        }
        if (live) {
            live->sub_bytes = memory.size();
            live->observe();
        }
    }
    return MemoryState{memory, pass_index, chunks.back().index};
}

MemoryState Agent::memorize_while_reading(const std::string& question,
                                          const std::vector<Chunk>& chunks, int pass_index,
                                          TrajectoryLog* log) const {
    return memorize_pass(question, chunks, pass_index, log, nullptr);
}

std::string Agent::answer_from_memory(const std::string& question, const std::string& memory) const {
    RenderArgs args;
    args.question = question;
    args.memory = memory;
    CompletionRequest request;
    request.prompt = render(prompts_, PromptKind::answering, args);
    request.max_tokens = config_.max_response_tokens;
    request.temperature = config_.temperature;
    request.tag = CallTag::answer;
    return parse_boxed_answer(backend_->complete(request));
}

TrajectoryLog Agent::run(const Task& task) const { return run(task, nullptr); }

TrajectoryLog Agent::run(const Task& task, RunStats* stats) const {
    TrajectoryLog log;
    log.task_id = task.id;

    const auto chunks = chunk_document(task.document,
                                       static_cast<std::size_t>(config_.chunk_size_tokens),
                                       *tokenizer_);

    RunStats local_stats;
    LiveMemory live;
    live.stats = &local_stats;
    const auto started = std::chrono::steady_clock::now();

    try {
        // Initial streaming pass, guided by the original question. The
        // evolving buffer becomes the root memory when the pass completes.
        live.live_texts = 1;
        live.observe();
        std::string root = memorize_pass(task.question, chunks, 0, &log, &live).text;
        live.root_bytes = root.size();
        live.sub_bytes = 0;

        std::vector<SubQA> qa_history;
        for (int pass = 1; pass <= config_.max_rereading_passes; ++pass) {
            RenderArgs decompose_args;
            decompose_args.question = task.question;
            decompose_args.memory = root;
            decompose_args.qa_history = qa_history;
            CompletionRequest decompose_request;
            decompose_request.prompt = render(prompts_, PromptKind::decomposing, decompose_args);
            decompose_request.max_tokens = config_.max_response_tokens;
            decompose_request.temperature = config_.temperature;
            decompose_request.tag = CallTag::decompose;
            const std::string decision = backend_->complete(decompose_request);
            ++log.llm_calls;

            const auto sub_question = parse_query(decision);
            if (!sub_question) break;  // memory judged sufficient

            for (const SubQA& prev : qa_history) {
                if (to_lower(trim(prev.sub_question)) == to_lower(trim(*sub_question))) {
                    log::warn("task %s: sub-question repeats an earlier one: %s", task.id.c_str(),
                              sub_question->c_str());
                }
            }

            // Targeted rereading; root memory stays live alongside the
            // evolving sub-memory.
            live.live_texts = 2;
            live.observe();
            const MemoryState sub_memory = memorize_pass(*sub_question, chunks, pass, &log, &live);

            const std::string sub_answer = answer_from_memory(*sub_question, sub_memory.text);
            ++log.llm_calls;

            SubQA subqa{*sub_question, sub_answer, pass};

            // The sub-memory is discarded here; only the (q, a) pair enters
            // the root memory.
            RenderArgs integrate_args;
            integrate_args.question = task.question;
            integrate_args.memory = root;
            integrate_args.subqa = subqa;
            CompletionRequest integrate_request;
            integrate_request.prompt = render(prompts_, PromptKind::integrating, integrate_args);
            integrate_request.max_tokens = config_.max_response_tokens;
            integrate_request.temperature = config_.temperature;
            integrate_request.tag = CallTag::integrate;
            root = trim(backend_->complete(integrate_request));
            ++log.llm_calls;

            live.root_bytes = root.size();
            live.sub_bytes = 0;
            live.live_texts = 1;
            live.observe();

            qa_history.push_back(std::move(subqa));
            log.sub_qas = qa_history;
            log.rereading_passes = pass;
        }

        log.final_answer = answer_from_memory(task.question, root);
        ++log.llm_calls;
    } catch (const BackendError& e) {
        log.incomplete = true;
        log.error = e.what();
    }

    const auto elapsed = std::chrono::steady_clock::now() - started;
    log.wall_time_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    log.peak_memory_bytes = local_stats.peak_live_memory_bytes;
    if (stats) *stats = local_stats;
    return log;
}

std::vector<StepAnswer> Agent::answer_at_every_step(const Task& task,
                                                    const TrajectoryLog& log) const {
    const auto chunks = chunk_document(task.document,
                                       static_cast<std::size_t>(config_.chunk_size_tokens),
                                       *tokenizer_);
    const std::size_t expected =
        static_cast<std::size_t>(log.rereading_passes + 1) * chunks.size();
    if (log.memories.size() != expected) {
        throw std::runtime_error(
            "trajectory lacks full memory snapshots (" + std::to_string(log.memories.size()) +
            " of " + std::to_string(expected) +
            "); re-run with eval-mode logging (log_memories=true)");
    }
    std::vector<StepAnswer> grid;
    grid.reserve(log.memories.size());
    for (const MemoryState& memory : log.memories) {
        StepAnswer step;
        step.pass_index = memory.pass_index;
        step.chunk_index = memory.chunk_index;
        step.answer = answer_from_memory(task.question, memory.text);
        step.correct = outcome_reward(step.answer, task.gold_answers,
                                      matcher_from_string(config_.matcher)) > 0.5;
        grid.push_back(std::move(step));
    }
    return grid;
}

TrajectoryLog run_task(const Task& task, const RunConfig& config, BackendPtr backend) {
    Agent agent(config, std::move(backend));
    return agent.run(task);
}

}  // namespace memreread
