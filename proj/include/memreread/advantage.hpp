#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "memreread/core_types.hpp"

namespace memreread {

// ============================================================================
// Answer matching
// ============================================================================

enum class Matcher { exact, containment };

Matcher matcher_from_string(const std::string& name);  // throws ConfigError

// Lowercases, maps punctuation to spaces, collapses whitespace, trims.
std::string normalize_answer(std::string_view text);

// 1.0 iff the normalized answer matches any gold answer under the matcher
// (exact equality, or gold contained in the answer), else 0.0.
double outcome_reward(std::string_view final_answer, const std::vector<std::string>& gold_answers,
                      Matcher matcher);

// ============================================================================
// Rereading-adaptive outcome advantages
// ============================================================================

// Group-relative outcome advantages from binary rewards and per-trajectory
// rereading-pass counts.
//
// Homogeneous groups (all rewards equal) standardize the pass counts with the
// population standard deviation, negated for all-correct groups so fewer
// passes earn higher advantage. Mixed groups split by reward: each side gets
// softmax(-passes) weights, correct trajectories summing to +1 and incorrect
// ones to -1.
std::vector<double> outcome_advantages(const std::vector<double>& rewards,
                                       const std::vector<int>& passes, double epsilon);

// ============================================================================
// State (process) rewards and advantages
// ============================================================================

// Set-based unigram recall of the answer's tokens inside the memory text,
// after normalization; <confirmed> markers are stripped first. An answer that
// normalizes to nothing scores 0.
double recall_score(std::string_view memory, std::string_view answer);

// Per-(pass, chunk) increments of the best gold-answer recall across the
// logged memory snapshots. Each pass starts from a fresh NO_MEMORY baseline
// with recall 0. Throws when the log lacks full snapshots.
std::vector<std::vector<double>> state_rewards(const TrajectoryLog& log,
                                               const std::vector<std::string>& gold_answers);

// Step-level advantages: per-position reward minus the group mean, computed
// only over positions present in all trajectories; positions beyond the
// common trajectory length get 0.
std::vector<std::vector<std::vector<double>>> state_advantages(
    const std::vector<std::vector<std::vector<double>>>& rewards_per_trajectory);

std::vector<std::vector<std::vector<double>>> state_advantages(
    const RolloutGroup& group, const std::vector<std::string>& gold_answers);

// ============================================================================
// Overall advantages
// ============================================================================

struct GroupStats {
    double mu_p = 0.0;     // mean rereading passes
    double sigma_p = 0.0;  // population standard deviation of passes
    int G = 0;
};

struct AdvantageTable {
    std::vector<double> outcome;                            // [g]
    std::vector<std::vector<std::vector<double>>> state;    // [g][pass][chunk]
    std::vector<std::vector<std::vector<double>>> overall;  // [g][pass][chunk]
    GroupStats group_stats;
};

// Composes outcome advantages, state advantages and the alpha mix into one
// table. Where the state advantage was zeroed (beyond the common length) the
// overall value reduces to alpha * outcome exactly.
AdvantageTable overall_advantages(const RolloutGroup& group,
                                  const std::vector<std::string>& gold_answers, double alpha,
                                  double epsilon);

void to_json(nlohmann::json& j, const AdvantageTable& v);

}  // namespace memreread
