#include "memreread/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "memreread/advantage.hpp"
#include "memreread/util.hpp"

namespace memreread {

namespace {

const std::size_t kLengthGrid[] = {1000,   2000,   4000,   8000,    16000,  32000,
                                   64000,  128000, 256000, 512000,  1000000};

struct Accumulator {
    double correct = 0.0;
    double passes = 0.0;
    double calls = 0.0;
    double wall_ms = 0.0;
    double peak_bytes = 0.0;
    int n = 0;
};

}  // namespace

double EvalReport::overall_accuracy() const {
    if (accuracy.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [bucket, acc] : accuracy) sum += acc;
    return sum / static_cast<double>(accuracy.size());
}

void to_json(nlohmann::json& j, const EvalReport& v) {
    j = nlohmann::json{{"accuracy", v.accuracy},
                       {"avg_rereading", v.avg_rereading},
                       {"avg_calls", v.avg_calls},
                       {"avg_wall_ms", v.avg_wall_ms},
                       {"peak_memory_bytes", v.peak_memory_bytes},
                       {"eta", nlohmann::json::object()},
                       {"n_samples", v.n_samples},
                       {"n_errors", v.n_errors}};
    for (const auto& [k, value] : v.eta) j["eta"][std::to_string(k)] = value;
}

std::string length_bucket(const Task& task, const Tokenizer& tokenizer) {
    auto it = task.meta.find("length");
    if (it != task.meta.end() && !it->second.empty()) return it->second;
    const std::size_t measured = tokenizer.count(task.document);
    std::size_t best = kLengthGrid[0];
    for (std::size_t grid : kLengthGrid) {
        const auto dist = [&](std::size_t g) {
            return g > measured ? g - measured : measured - g;
        };
        if (dist(grid) < dist(best)) best = grid;
    }
    return std::to_string(best);
}

EvalReport aggregate_report(const std::vector<Task>& tasks,
                            const std::vector<TrajectoryLog>& trajectories,
                            const RunConfig& config) {
    const TokenizerPtr tokenizer = make_tokenizer(config.tokenizer);
    const Matcher matcher = matcher_from_string(config.matcher);

    std::map<std::string, const Task*> by_id;
    for (const Task& task : tasks) by_id[task.id] = &task;

    std::map<std::string, Accumulator> buckets;
    EvalReport report;
    for (const TrajectoryLog& log : trajectories) {
        auto it = by_id.find(log.task_id);
        if (it == by_id.end()) {
            log::warn("trajectory %s has no matching task; skipped", log.task_id.c_str());
            continue;
        }
        const Task& task = *it->second;
        Accumulator& acc = buckets[length_bucket(task, *tokenizer)];
        const bool errored = log.incomplete;
        const double reward =
            errored ? 0.0 : outcome_reward(log.final_answer, task.gold_answers, matcher);
        acc.correct += reward;
        acc.passes += log.rereading_passes;
        acc.calls += log.llm_calls;
        acc.wall_ms += static_cast<double>(log.wall_time_ms);
        acc.peak_bytes = std::max(acc.peak_bytes, static_cast<double>(log.peak_memory_bytes));
        ++acc.n;
        ++report.n_samples;
        if (errored) ++report.n_errors;
    }

    for (const auto& [bucket, acc] : buckets) {
        const double n = static_cast<double>(acc.n);
        report.accuracy[bucket] = acc.correct / n;
        report.avg_rereading[bucket] = acc.passes / n;
        report.avg_calls[bucket] = acc.calls / n;
        report.avg_wall_ms[bucket] = acc.wall_ms / n;
        report.peak_memory_bytes[bucket] = acc.peak_bytes;
    }
    return report;
}

EvalResult evaluate(const std::vector<Task>& tasks, const RunConfig& config, BackendPtr backend,
                    int parallelism) {
    config.validate();
    if (parallelism < 1) parallelism = 1;

    const Agent agent(config, backend);
    EvalResult result;
    result.trajectories.resize(tasks.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                result.trajectories[i] = agent.run(tasks[i]);
            } catch (const std::exception& e) {
                // run() absorbs backend errors; anything else still must not
                // poison the batch.
                TrajectoryLog log;
                log.task_id = tasks[i].id;
                log.incomplete = true;
                log.error = e.what();
                result.trajectories[i] = std::move(log);
            }
        }
    };

    const int n_workers = std::min<int>(parallelism, static_cast<int>(tasks.size()));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(std::max(n_workers, 1)));
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();

    result.report = aggregate_report(tasks, result.trajectories, config);
    return result;
}

std::map<int, double> eta_from_accuracies(
    const std::map<int, std::vector<double>>& accuracy_by_pass_limit) {
    auto base_it = accuracy_by_pass_limit.find(0);
    if (base_it == accuracy_by_pass_limit.end())
        throw std::invalid_argument("eta requires a p_c = 0 baseline");

    auto mean = [](const std::vector<double>& xs) {
        double sum = 0.0;
        for (double x : xs) sum += x;
        return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
    };

    const double base = mean(base_it->second);
    std::map<int, double> eta;
    for (const auto& [k, accs] : accuracy_by_pass_limit) {
        if (k <= 0) continue;
        eta[k] = (mean(accs) - base) / static_cast<double>(k);
    }
    return eta;
}

std::string diagnostics_csv(const std::vector<Task>& tasks,
                            const std::vector<TrajectoryLog>& trajectories,
                            const RunConfig& config, BackendPtr backend) {
    const Agent agent(config, backend);
    std::map<std::string, const Task*> by_id;
    for (const Task& task : tasks) by_id[task.id] = &task;

    // step ordinal -> (reached, correct)
    std::vector<std::pair<int, int>> steps;
    for (const TrajectoryLog& log : trajectories) {
        auto it = by_id.find(log.task_id);
        if (it == by_id.end()) continue;
        const auto grid = agent.answer_at_every_step(*it->second, log);
        for (std::size_t s = 0; s < grid.size(); ++s) {
            if (steps.size() <= s) steps.emplace_back(0, 0);
            steps[s].first += 1;
            steps[s].second += grid[s].correct ? 1 : 0;
        }
    }

    std::ostringstream out;
    out << "step,n,accuracy\n";
    for (std::size_t s = 0; s < steps.size(); ++s) {
        const double acc =
            steps[s].first ? static_cast<double>(steps[s].second) / steps[s].first : 0.0;
        out << s << ',' << steps[s].first << ',' << acc << '\n';
    }
    return out.str();
}

std::string render_report_table(const EvalReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "length" << std::right << std::setw(10) << "accuracy"
        << std::setw(12) << "avg_pass" << std::setw(12) << "avg_calls" << std::setw(14)
        << "avg_wall_ms" << std::setw(14) << "peak_bytes" << '\n';
    for (const auto& [bucket, acc] : report.accuracy) {
        out << std::left << std::setw(10) << bucket << std::right << std::fixed
            << std::setprecision(3) << std::setw(10) << acc << std::setw(12)
            << report.avg_rereading.at(bucket) << std::setw(12) << report.avg_calls.at(bucket)
            << std::setw(14) << std::setprecision(1) << report.avg_wall_ms.at(bucket)
            << std::setw(14) << std::setprecision(0) << report.peak_memory_bytes.at(bucket)
            << '\n';
        out << std::setprecision(6);
    }
    out << "samples: " << report.n_samples << "  errors: " << report.n_errors
        << "  mean accuracy: " << std::setprecision(4) << report.overall_accuracy() << '\n';
    return out.str();
}

}  // namespace memreread
