#pragma once

#include <map>
#include <string>
#include <vector>

#include "memreread/agent.hpp"
#include "memreread/backend.hpp"
#include "memreread/core_types.hpp"

namespace memreread {

// Aggregated metrics over one evaluation batch, keyed by the length bucket.
struct EvalReport {
    std::map<std::string, double> accuracy;
    std::map<std::string, double> avg_rereading;
    std::map<std::string, double> avg_calls;
    std::map<std::string, double> avg_wall_ms;
    std::map<std::string, double> peak_memory_bytes;
    std::map<int, double> eta;  // per-pass gain, filled when multiple p_c runs are combined
    int n_samples = 0;
    int n_errors = 0;

    double overall_accuracy() const;
};

void to_json(nlohmann::json& j, const EvalReport& v);

struct EvalResult {
    std::vector<TrajectoryLog> trajectories;
    EvalReport report;
};

// Runs every task through the agent with a bounded worker pool. Per-sample
// backend failures are recorded as incorrect-with-error and never abort the
// batch; callers decide what to do when report.n_errors crosses the
// configured threshold.
EvalResult evaluate(const std::vector<Task>& tasks, const RunConfig& config, BackendPtr backend,
                    int parallelism);

// Aggregates metrics for trajectories produced earlier (the `report`
// subcommand path).
EvalReport aggregate_report(const std::vector<Task>& tasks,
                            const std::vector<TrajectoryLog>& trajectories,
                            const RunConfig& config);

// Length bucket for a task: meta["length"] when present, else the measured
// token count snapped to the nearest grid value.
std::string length_bucket(const Task& task, const Tokenizer& tokenizer);

// Per-pass gain: eta_k = (avg_k - avg_0) / k for every k > 0 present in
// `accuracy_by_pass_limit`, where avg is the mean of the per-length
// accuracies. Requires an entry for p_c = 0.
std::map<int, double> eta_from_accuracies(
    const std::map<int, std::vector<double>>& accuracy_by_pass_limit);

// Per-step accuracy curve over all logged memory snapshots, as CSV
// "step,n,accuracy". Steps are ordinal memorizing steps within each
// trajectory; rows aggregate samples that reached the step.
std::string diagnostics_csv(const std::vector<Task>& tasks,
                            const std::vector<TrajectoryLog>& trajectories,
                            const RunConfig& config, BackendPtr backend);

std::string render_report_table(const EvalReport& report);

}  // namespace memreread
