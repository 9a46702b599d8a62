#include "memreread/advantage.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <stdexcept>

#include "memreread/prompts.hpp"
#include "memreread/util.hpp"

namespace memreread {

// ============================================================================
// Matching
// ============================================================================

Matcher matcher_from_string(const std::string& name) {
    if (name == "exact") return Matcher::exact;
    if (name == "containment") return Matcher::containment;
    throw ConfigError("unknown matcher: " + name + " (expected exact or containment)");
}

std::string normalize_answer(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        char mapped;
        if (std::ispunct(c) || std::isspace(c)) {
            pending_space = true;
            continue;
        }
        mapped = static_cast<char>(std::tolower(c));
        if (pending_space && !out.empty()) out.push_back(' ');
        pending_space = false;
        out.push_back(mapped);
    }
    return out;
}

double outcome_reward(std::string_view final_answer, const std::vector<std::string>& gold_answers,
                      Matcher matcher) {
    const std::string answer = normalize_answer(final_answer);
    for (const std::string& gold_raw : gold_answers) {
        const std::string gold = normalize_answer(gold_raw);
        if (matcher == Matcher::exact) {
            if (answer == gold) return 1.0;
        } else {
            if (!gold.empty() && answer.find(gold) != std::string::npos) return 1.0;
        }
    }
    return 0.0;
}

// ============================================================================
// Outcome advantages
// ============================================================================

std::vector<double> outcome_advantages(const std::vector<double>& rewards,
                                       const std::vector<int>& passes, double epsilon) {
    const std::size_t G = rewards.size();
    if (G == 0) throw std::invalid_argument("outcome_advantages: empty group");
    if (passes.size() != G)
        throw std::invalid_argument("outcome_advantages: rewards/passes size mismatch");

    double reward_sum = 0.0;
    for (double r : rewards) reward_sum += r;
    const bool all_correct = reward_sum == static_cast<double>(G);
    const bool all_incorrect = reward_sum == 0.0;

    std::vector<double> out(G, 0.0);

    if (all_correct || all_incorrect) {
        double mu = 0.0;
        for (int p : passes) mu += p;
        mu /= static_cast<double>(G);
        double var = 0.0;
        for (int p : passes) var += (p - mu) * (p - mu);
        var /= static_cast<double>(G);
        const double sigma = std::sqrt(var);
        const double sign = all_correct ? -1.0 : 1.0;
        for (std::size_t g = 0; g < G; ++g) {
            const double numer = passes[g] - mu;
            out[g] = numer == 0.0 ? 0.0 : sign * numer / (sigma + epsilon);
        }
        return out;
    }

    // Mixed outcomes: softmax(-passes) within each reward class, correct
    // trajectories summing to +1 and incorrect ones to -1.
    double denom_correct = 0.0;
    double denom_incorrect = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
        const double w = std::exp(-static_cast<double>(passes[g]));
        if (rewards[g] > 0.5) {
            denom_correct += w;
        } else {
            denom_incorrect += w;
        }
    }
    for (std::size_t g = 0; g < G; ++g) {
        const double w = std::exp(-static_cast<double>(passes[g]));
        if (rewards[g] > 0.5) {
            out[g] = w / denom_correct;
        } else {
            out[g] = -w / denom_incorrect;
        }
    }
    return out;
}

// ============================================================================
// State rewards / advantages
// ============================================================================

namespace {

std::set<std::string> token_set(std::string_view text) {
    std::set<std::string> tokens;
    const std::string normalized = normalize_answer(text);
    for (std::string& tok : split(normalized, ' ')) {
        if (!tok.empty()) tokens.insert(std::move(tok));
    }
    return tokens;
}

double best_recall(const std::string& memory, const std::vector<std::string>& gold_answers) {
    double best = 0.0;
    for (const std::string& gold : gold_answers) {
        best = std::max(best, recall_score(memory, gold));
    }
    return best;
}

}  // namespace

double recall_score(std::string_view memory, std::string_view answer) {
    const std::set<std::string> answer_tokens = token_set(answer);
    if (answer_tokens.empty()) return 0.0;
    const std::set<std::string> memory_tokens = token_set(strip_confirmed_tags(memory));
    std::size_t hit = 0;
    for (const std::string& tok : answer_tokens) {
        if (memory_tokens.count(tok)) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(answer_tokens.size());
}

std::vector<std::vector<double>> state_rewards(const TrajectoryLog& log,
                                               const std::vector<std::string>& gold_answers) {
    const int passes = log.rereading_passes;
    const std::size_t groups = static_cast<std::size_t>(passes) + 1;
    if (groups == 0 || log.memories.size() % groups != 0) {
        throw std::runtime_error("state_rewards: memories do not form (passes+1) equal pass groups");
    }
    const std::size_t T = log.memories.size() / groups;

    std::vector<std::vector<double>> rewards(groups, std::vector<double>(T, 0.0));
    std::size_t i = 0;
    for (std::size_t p = 0; p < groups; ++p) {
        double prev = 0.0;  // every pass starts from a fresh NO_MEMORY baseline
        for (std::size_t t = 0; t < T; ++t, ++i) {
            const double cur = best_recall(log.memories[i].text, gold_answers);
            rewards[p][t] = cur - prev;
            prev = cur;
        }
    }
    return rewards;
}

std::vector<std::vector<std::vector<double>>> state_advantages(
    const std::vector<std::vector<std::vector<double>>>& rewards_per_trajectory) {
    const std::size_t G = rewards_per_trajectory.size();
    std::vector<std::vector<std::vector<double>>> advantages(G);
    if (G == 0) return advantages;

    // Positions shared by every trajectory: pass count is the varying
    // dimension, chunk count is fixed by the task.
    std::size_t common_passes = SIZE_MAX;
    std::size_t common_chunks = SIZE_MAX;
    for (const auto& rewards : rewards_per_trajectory) {
        common_passes = std::min(common_passes, rewards.size());
        for (const auto& row : rewards) common_chunks = std::min(common_chunks, row.size());
    }
    if (common_chunks == SIZE_MAX) common_chunks = 0;

    for (std::size_t g = 0; g < G; ++g) {
        const auto& rewards = rewards_per_trajectory[g];
        advantages[g].assign(rewards.size(), {});
        for (std::size_t p = 0; p < rewards.size(); ++p) {
            advantages[g][p].assign(rewards[p].size(), 0.0);
        }
    }
    for (std::size_t p = 0; p < common_passes; ++p) {
        for (std::size_t t = 0; t < common_chunks; ++t) {
            double mean = 0.0;
            for (const auto& rewards : rewards_per_trajectory) mean += rewards[p][t];
            mean /= static_cast<double>(G);
            for (std::size_t g = 0; g < G; ++g) {
                advantages[g][p][t] = rewards_per_trajectory[g][p][t] - mean;
            }
        }
    }
    return advantages;
}

std::vector<std::vector<std::vector<double>>> state_advantages(
    const RolloutGroup& group, const std::vector<std::string>& gold_answers) {
    std::vector<std::vector<std::vector<double>>> rewards;
    rewards.reserve(group.trajectories.size());
    for (const TrajectoryLog& log : group.trajectories) {
        rewards.push_back(state_rewards(log, gold_answers));
    }
    return state_advantages(rewards);
}

// ============================================================================
// Overall
// ============================================================================

AdvantageTable overall_advantages(const RolloutGroup& group,
                                  const std::vector<std::string>& gold_answers, double alpha,
                                  double epsilon) {
    const std::size_t G = group.trajectories.size();
    if (G == 0) throw std::invalid_argument("overall_advantages: empty group");
    if (group.rewards.size() != G)
        throw std::invalid_argument("overall_advantages: rewards/trajectories size mismatch");

    std::vector<int> passes(G);
    for (std::size_t g = 0; g < G; ++g) passes[g] = group.trajectories[g].rereading_passes;

    AdvantageTable table;
    table.outcome = outcome_advantages(group.rewards, passes, epsilon);
    table.state = state_advantages(group, gold_answers);

    double mu = 0.0;
    for (int p : passes) mu += p;
    mu /= static_cast<double>(G);
    double var = 0.0;
    for (int p : passes) var += (p - mu) * (p - mu);
    var /= static_cast<double>(G);
    table.group_stats = GroupStats{mu, std::sqrt(var), static_cast<int>(G)};

    table.overall.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        table.overall[g].assign(table.state[g].size(), {});
        for (std::size_t p = 0; p < table.state[g].size(); ++p) {
            table.overall[g][p].resize(table.state[g][p].size());
            for (std::size_t t = 0; t < table.state[g][p].size(); ++t) {
                table.overall[g][p][t] =
                    alpha * table.outcome[g] + (1.0 - alpha) * table.state[g][p][t];
            }
        }
    }
    return table;
}

void to_json(nlohmann::json& j, const AdvantageTable& v) {
    j = nlohmann::json{{"outcome", v.outcome},
                       {"state", v.state},
                       {"overall", v.overall},
                       {"group_stats",
                        {{"mu_p", v.group_stats.mu_p},
                         {"sigma_p", v.group_stats.sigma_p},
                         {"G", v.group_stats.G}}}};
}

}  // namespace memreread
