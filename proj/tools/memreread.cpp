// memreread command line: dataset generation, agent evaluation, report
// rendering, offline advantage computation and trajectory validation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "memreread/advantage.hpp"
#include "memreread/agent.hpp"
#include "memreread/backend.hpp"
#include "memreread/core_types.hpp"
#include "memreread/eval.hpp"
#include "memreread/globalreasoning.hpp"
#include "memreread/tokenizer.hpp"
#include "memreread/util.hpp"

namespace {

using namespace memreread;

constexpr int kExitOk = 0;
constexpr int kExitPartialFailure = 1;
constexpr int kExitConfigError = 2;

std::size_t parse_length(const std::string& text) {
    if (text.empty()) throw ConfigError("empty length value");
    std::string body = to_lower(trim(text));
    std::size_t scale = 1;
    if (body.back() == 'k') {
        scale = 1000;
        body.pop_back();
    } else if (body.back() == 'm') {
        scale = 1000000;
        body.pop_back();
    }
    try {
        return static_cast<std::size_t>(std::stoull(body)) * scale;
    } catch (...) {
        throw ConfigError("bad length value: " + text);
    }
}

std::vector<std::size_t> parse_lengths(const std::string& csv) {
    std::vector<std::size_t> out;
    for (const std::string& part : split(csv, ',')) {
        if (trim(part).empty()) continue;
        out.push_back(parse_length(part));
    }
    if (out.empty()) throw ConfigError("no lengths given");
    return out;
}

// RunConfig assembled from an optional JSON config file plus flag overrides.
struct ConfigFlags {
    std::string config_path;
    RunConfig config;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--chunk-size", config.chunk_size_tokens, "Chunk size in tokens");
        cmd->add_option("--max-passes", config.max_rereading_passes,
                        "Maximum rereading passes (p_c)");
        cmd->add_option("--max-response-tokens", config.max_response_tokens,
                        "Completion length cap");
        cmd->add_option("--alpha", config.alpha, "Outcome advantage weight in [0,1]");
        cmd->add_option("--epsilon", config.epsilon_std, "Stabilizer for pass standardization");
        cmd->add_option("--temperature", config.temperature, "Sampling temperature");
        cmd->add_option("--tokenizer", config.tokenizer, "Tokenizer: whitespace | char4");
        cmd->add_option("--matcher", config.matcher, "Answer matcher: exact | containment");
        cmd->add_option("--prompt-dir", config.prompt_dir,
                        "Directory with reading/answering/decomposing/integrating .txt overrides");
        cmd->add_option("--error-threshold", config.error_rate_threshold,
                        "Abort threshold for per-sample failures");
        cmd->add_flag("--no-log-memories{false}", config.log_memories,
                      "Keep only the latest memory instead of every snapshot");
        cmd->add_option("--backend", config.backend.kind, "Backend kind: scripted | http");
        cmd->add_option("--script", config.backend.script_path, "Scripted backend rule file");
        cmd->add_option("--api-base", config.backend.api_base,
                        "OpenAI-compatible endpoint base URL");
        cmd->add_option("--api-key", config.backend.api_key, "API key");
        cmd->add_option("--model", config.backend.model, "Model name");
    }

    RunConfig resolve(const CLI::App* cmd) const {
        RunConfig resolved;
        if (!config_path.empty()) {
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(read_file(config_path));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
            }
            resolved = run_config_from_json_strict(doc);
        }
        // Flags override file values.
        auto touched = [&](const std::string& flag) { return cmd->count(flag) > 0; };
        if (touched("--chunk-size")) resolved.chunk_size_tokens = config.chunk_size_tokens;
        if (touched("--max-passes")) resolved.max_rereading_passes = config.max_rereading_passes;
        if (touched("--max-response-tokens"))
            resolved.max_response_tokens = config.max_response_tokens;
        if (touched("--alpha")) resolved.alpha = config.alpha;
        if (touched("--epsilon")) resolved.epsilon_std = config.epsilon_std;
        if (touched("--temperature")) resolved.temperature = config.temperature;
        if (touched("--tokenizer")) resolved.tokenizer = config.tokenizer;
        if (touched("--matcher")) resolved.matcher = config.matcher;
        if (touched("--prompt-dir")) resolved.prompt_dir = config.prompt_dir;
        if (touched("--error-threshold"))
            resolved.error_rate_threshold = config.error_rate_threshold;
        if (touched("--no-log-memories")) resolved.log_memories = config.log_memories;
        if (touched("--backend")) resolved.backend.kind = config.backend.kind;
        if (touched("--script")) resolved.backend.script_path = config.backend.script_path;
        if (touched("--api-base")) resolved.backend.api_base = config.backend.api_base;
        if (touched("--api-key")) resolved.backend.api_key = config.backend.api_key;
        if (touched("--model")) resolved.backend.model = config.backend.model;
        resolved.validate();
        log::debug("effective config: %s", nlohmann::json(resolved).dump().c_str());
        return resolved;
    }
};

int cmd_generate(const std::string& task_name, const std::string& lengths_csv, int per_length,
                 std::uint64_t seed, const std::string& corpus, const std::string& out,
                 const std::string& tokenizer_name) {
    const auto type = globalreasoning::task_type_from_string(task_name);
    const auto lengths = parse_lengths(lengths_csv);
    const auto tokenizer = make_tokenizer(tokenizer_name);
    globalreasoning::generate_dataset(type, lengths, per_length, seed, corpus, out, *tokenizer);
    std::printf("wrote %s and %s.meta.jsonl\n", out.c_str(), out.c_str());
    return kExitOk;
}

int cmd_run(const RunConfig& config, const std::string& tasks_path, const std::string& out_traj,
            const std::string& out_report, int parallel) {
    const auto tasks = read_tasks_jsonl(tasks_path);
    if (tasks.empty()) throw ConfigError("no tasks in " + tasks_path);
    auto backend = make_backend(config.backend, make_tokenizer(config.tokenizer));

    EvalResult result = evaluate(tasks, config, backend, parallel);
    if (!out_traj.empty()) write_trajectories_jsonl(out_traj, result.trajectories);
    if (!out_report.empty())
        write_file(out_report, nlohmann::json(result.report).dump(2) + "\n");
    std::cout << render_report_table(result.report);

    const double error_rate = result.report.n_samples == 0
                                  ? 0.0
                                  : static_cast<double>(result.report.n_errors) /
                                        static_cast<double>(result.report.n_samples);
    if (error_rate > config.error_rate_threshold) {
        std::fprintf(stderr, "error[threshold]: %d of %d samples failed (rate %.2f > %.2f)\n",
                     result.report.n_errors, result.report.n_samples, error_rate,
                     config.error_rate_threshold);
        return kExitPartialFailure;
    }
    return kExitOk;
}

int cmd_report(const RunConfig& config, const std::string& tasks_path,
               const std::string& traj_path, const std::string& out_report,
               const std::string& diagnostics_out) {
    const auto tasks = read_tasks_jsonl(tasks_path);
    const auto trajectories = read_trajectories_jsonl(traj_path);
    const EvalReport report = aggregate_report(tasks, trajectories, config);
    if (!out_report.empty()) write_file(out_report, nlohmann::json(report).dump(2) + "\n");
    std::cout << render_report_table(report);
    if (!diagnostics_out.empty()) {
        auto backend = make_backend(config.backend, make_tokenizer(config.tokenizer));
        write_file(diagnostics_out, diagnostics_csv(tasks, trajectories, config, backend));
        std::printf("wrote %s\n", diagnostics_out.c_str());
    }
    return kExitOk;
}

int cmd_advantage(const RunConfig& config, const std::string& tasks_path,
                  const std::string& traj_path, const std::string& out_path) {
    const auto tasks = read_tasks_jsonl(tasks_path);
    const auto trajectories = read_trajectories_jsonl(traj_path);
    const Matcher matcher = matcher_from_string(config.matcher);

    std::map<std::string, const Task*> by_id;
    for (const Task& task : tasks) by_id[task.id] = &task;

    std::ostringstream body;
    int groups_written = 0;
    for (const auto& members : group_by_task(trajectories)) {
        const std::string& task_id = members.front()->task_id;
        auto it = by_id.find(task_id);
        if (it == by_id.end()) {
            log::warn("no task for trajectory group %s; skipped", task_id.c_str());
            continue;
        }
        if (members.size() < 2) {
            log::warn("group %s has fewer than 2 trajectories; skipped", task_id.c_str());
            continue;
        }
        RolloutGroup group;
        group.task_id = task_id;
        for (const TrajectoryLog* log : members) {
            group.trajectories.push_back(*log);
            group.rewards.push_back(
                outcome_reward(log->final_answer, it->second->gold_answers, matcher));
        }
        const AdvantageTable table =
            overall_advantages(group, it->second->gold_answers, config.alpha, config.epsilon_std);
        nlohmann::json line = table;
        line["task_id"] = task_id;
        body << line.dump() << '\n';
        ++groups_written;
    }
    write_file(out_path, body.str());
    std::printf("wrote %d advantage groups to %s\n", groups_written, out_path.c_str());
    return kExitOk;
}

int cmd_validate(const RunConfig& config, const std::string& tasks_path,
                 const std::string& traj_path) {
    const auto tasks = read_tasks_jsonl(tasks_path);
    const auto trajectories = read_trajectories_jsonl(traj_path);
    std::map<std::string, const Task*> by_id;
    for (const Task& task : tasks) by_id[task.id] = &task;

    int violations = 0;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const TrajectoryLog& log = trajectories[i];
        auto it = by_id.find(log.task_id);
        if (it == by_id.end()) {
            std::printf("line %zu (%s): no matching task\n", i + 1, log.task_id.c_str());
            ++violations;
            continue;
        }
        for (const std::string& violation : validate_trajectory(log, config, *it->second)) {
            std::printf("line %zu (%s): %s\n", i + 1, log.task_id.c_str(), violation.c_str());
            ++violations;
        }
    }
    if (violations == 0) {
        std::printf("ok: %zu trajectories valid\n", trajectories.size());
        return kExitOk;
    }
    std::fprintf(stderr, "error[validation]: %d violations\n", violations);
    return kExitPartialFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MemReread: streaming memorize-while-reading agent with adaptive rereading"};
    app.require_subcommand(1);

    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug | info | warn | error");

    // generate
    auto* generate = app.add_subcommand("generate", "Generate a synthetic global-reasoning dataset");
    std::string gen_task = "statistics";
    std::string gen_lengths = "8k";
    int gen_per_length = 1;
    std::uint64_t gen_seed = 0;
    std::string gen_corpus;
    std::string gen_out;
    std::string gen_tokenizer = "whitespace";
    generate->add_option("--task", gen_task, "statistics | variable-tracking")->required();
    generate->add_option("--lengths", gen_lengths, "Comma list of target lengths, e.g. 1k,8k,1m")
        ->required();
    generate->add_option("--per-length", gen_per_length, "Samples per length")->required();
    generate->add_option("--seed", gen_seed, "Master seed");
    generate->add_option("--corpus", gen_corpus, "Background corpus text file")->required();
    generate->add_option("--out", gen_out, "Output task JSONL path")->required();
    generate->add_option("--tokenizer", gen_tokenizer, "Tokenizer: whitespace | char4");

    // run
    auto* run = app.add_subcommand("run", "Run the agent over a task file");
    std::string run_tasks;
    std::string run_out_traj;
    std::string run_out_report;
    int run_parallel = 1;
    ConfigFlags run_flags;
    run->add_option("--tasks", run_tasks, "Task JSONL")->required();
    run->add_option("--out-traj", run_out_traj, "Trajectory JSONL output");
    run->add_option("--out-report", run_out_report, "Report JSON output");
    run->add_option("--parallel", run_parallel, "Concurrent runs");
    run_flags.attach(run);

    // report
    auto* report = app.add_subcommand("report", "Aggregate an existing trajectory file");
    std::string report_tasks;
    std::string report_traj;
    std::string report_out;
    std::string report_diag;
    ConfigFlags report_flags;
    report->add_option("--tasks", report_tasks, "Task JSONL")->required();
    report->add_option("--traj", report_traj, "Trajectory JSONL")->required();
    report->add_option("--out-report", report_out, "Report JSON output");
    report->add_option("--diagnostics-csv", report_diag,
                       "Re-answer every memory snapshot and write a step,accuracy CSV "
                       "(needs a backend)");
    report_flags.attach(report);

    // advantage
    auto* advantage = app.add_subcommand(
        "advantage", "Compute rollout-group advantages from logged trajectories");
    std::string adv_tasks;
    std::string adv_traj;
    std::string adv_out;
    ConfigFlags adv_flags;
    advantage->add_option("--tasks", adv_tasks, "Task JSONL (gold answers)")->required();
    advantage->add_option("--traj", adv_traj, "Trajectory JSONL grouped by task_id")->required();
    advantage->add_option("--out", adv_out, "AdvantageTable JSONL output")->required();
    adv_flags.attach(advantage);

    // validate
    auto* validate = app.add_subcommand("validate", "Check trajectory invariants");
    std::string val_tasks;
    std::string val_traj;
    ConfigFlags val_flags;
    validate->add_option("--tasks", val_tasks, "Task JSONL")->required();
    validate->add_option("--traj", val_traj, "Trajectory JSONL")->required();
    val_flags.attach(validate);

    CLI11_PARSE(app, argc, argv);

    try {
        log::set_level(log::level_from_string(log_level));
        if (generate->parsed()) {
            return cmd_generate(gen_task, gen_lengths, gen_per_length, gen_seed, gen_corpus,
                                gen_out, gen_tokenizer);
        }
        if (run->parsed()) {
            return cmd_run(run_flags.resolve(run), run_tasks, run_out_traj, run_out_report,
                           run_parallel);
        }
        if (report->parsed()) {
            return cmd_report(report_flags.resolve(report), report_tasks, report_traj, report_out,
                              report_diag);
        }
        if (advantage->parsed()) {
            return cmd_advantage(adv_flags.resolve(advantage), adv_tasks, adv_traj, adv_out);
        }
        if (validate->parsed()) {
            return cmd_validate(val_flags.resolve(validate), val_tasks, val_traj);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error[config]: %s\n", e.what());
        return kExitConfigError;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error[io]: %s\n", e.what());
        return kExitConfigError;
    } catch (const BackendError& e) {
        std::fprintf(stderr, "error[backend]: %s\n", e.what());
        return kExitPartialFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error[internal]: %s\n", e.what());
        return kExitConfigError;
    }
    return kExitOk;
}
