#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace memreread {

// ============================================================================
// Domain types
// ============================================================================

// One evaluation unit: a question over a long document with gold answers.
struct Task {
    std::string id;
    std::string question;
    std::string document;
    std::vector<std::string> gold_answers;
    std::map<std::string, std::string> meta;

    bool operator==(const Task&) const = default;
};

// The bounded text buffer carried across chunks, snapshotted per step.
struct MemoryState {
    std::string text;
    int pass_index = 0;
    int chunk_index = 0;

    bool operator==(const MemoryState&) const = default;
};

// One resolved sub-question produced during a rereading pass.
struct SubQA {
    std::string sub_question;
    std::string sub_answer;
    int pass_index = 0;

    bool operator==(const SubQA&) const = default;
};

// Full record of one agent run. `memories` is ordered by (pass, chunk) and
// holds (rereading_passes + 1) pass groups of T chunk snapshots each when
// eval-mode logging is on.
struct TrajectoryLog {
    std::string task_id;
    std::vector<MemoryState> memories;
    std::vector<SubQA> sub_qas;
    std::string final_answer;
    int rereading_passes = 0;
    int llm_calls = 0;
    std::int64_t peak_memory_bytes = 0;
    std::int64_t wall_time_ms = 0;
    bool incomplete = false;
    std::string error;

    bool operator==(const TrajectoryLog&) const = default;
};

// G trajectories for the same task plus their binary outcome rewards.
struct RolloutGroup {
    std::string task_id;
    std::vector<TrajectoryLog> trajectories;
    std::vector<double> rewards;

    bool operator==(const RolloutGroup&) const = default;
};

struct BackendConfig {
    std::string kind = "scripted";  // scripted | http
    std::string script_path;
    std::string api_base;  // falls back to MEMREREAD_API_BASE
    std::string api_key;   // falls back to MEMREREAD_API_KEY
    std::string model;     // falls back to MEMREREAD_MODEL

    bool operator==(const BackendConfig&) const = default;
};

struct RunConfig {
    int chunk_size_tokens = 5000;
    int max_rereading_passes = 3;  // p_c
    int max_response_tokens = 1024;
    double alpha = 0.95;
    double epsilon_std = 1e-6;
    double temperature = 0.0;  // greedy eval; 1.0 for rollout-group generation
    std::string tokenizer = "whitespace";
    std::string matcher = "exact";  // exact | containment
    bool log_memories = true;       // eval mode keeps every (pass, chunk) snapshot
    std::string prompt_dir;
    double error_rate_threshold = 0.1;
    BackendConfig backend;

    bool operator==(const RunConfig&) const = default;

    void validate() const;  // throws ConfigError
};

// ============================================================================
// Validation
// ============================================================================

// Checks a trajectory against the log invariants for the given task and
// config. Returns one message per violation; empty means valid. Never throws
// on log content.
std::vector<std::string> validate_trajectory(const TrajectoryLog& log, const RunConfig& config,
                                             const Task& task);

// ============================================================================
// JSON wire format (snake_case field names)
// ============================================================================

void to_json(nlohmann::json& j, const Task& v);
void from_json(const nlohmann::json& j, Task& v);
void to_json(nlohmann::json& j, const MemoryState& v);
void from_json(const nlohmann::json& j, MemoryState& v);
void to_json(nlohmann::json& j, const SubQA& v);
void from_json(const nlohmann::json& j, SubQA& v);
void to_json(nlohmann::json& j, const TrajectoryLog& v);
void from_json(const nlohmann::json& j, TrajectoryLog& v);
void to_json(nlohmann::json& j, const RolloutGroup& v);
void from_json(const nlohmann::json& j, RolloutGroup& v);
void to_json(nlohmann::json& j, const BackendConfig& v);
void from_json(const nlohmann::json& j, BackendConfig& v);
void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);

// Strict RunConfig parse: unknown keys are rejected with ConfigError.
RunConfig run_config_from_json_strict(const nlohmann::json& j);

// ============================================================================
// JSONL files
// ============================================================================

std::vector<Task> read_tasks_jsonl(const std::string& path);
std::vector<TrajectoryLog> read_trajectories_jsonl(const std::string& path);
void write_tasks_jsonl(const std::string& path, const std::vector<Task>& tasks);
void write_trajectories_jsonl(const std::string& path, const std::vector<TrajectoryLog>& logs);

// Groups trajectories by task_id, preserving first-seen order.
std::vector<std::vector<const TrajectoryLog*>> group_by_task(const std::vector<TrajectoryLog>& logs);

}  // namespace memreread
