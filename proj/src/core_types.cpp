#include "memreread/core_types.hpp"

#include <fstream>
#include <sstream>

#include "memreread/tokenizer.hpp"
#include "memreread/util.hpp"

namespace memreread {

void RunConfig::validate() const {
    if (chunk_size_tokens <= 0) throw ConfigError("chunk_size_tokens must be > 0");
    if (max_rereading_passes < 0) throw ConfigError("max_rereading_passes must be >= 0");
    if (max_response_tokens <= 0) throw ConfigError("max_response_tokens must be > 0");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0, 1]");
    if (epsilon_std < 0.0) throw ConfigError("epsilon_std must be >= 0");
    if (temperature < 0.0) throw ConfigError("temperature must be >= 0");
    if (error_rate_threshold < 0.0 || error_rate_threshold > 1.0)
        throw ConfigError("error_rate_threshold must be in [0, 1]");
    if (matcher != "exact" && matcher != "containment")
        throw ConfigError("unknown matcher: " + matcher);
    if (backend.kind != "scripted" && backend.kind != "http")
        throw ConfigError("unknown backend kind: " + backend.kind);
    make_tokenizer(tokenizer);  // rejects unknown selectors
}

// ============================================================================
// Trajectory validation
// ============================================================================

namespace {

std::string fmt_violation(const char* what, const std::string& detail) {
    return std::string(what) + ": " + detail;
}

}  // namespace

std::vector<std::string> validate_trajectory(const TrajectoryLog& log, const RunConfig& config,
                                             const Task& task) {
    std::vector<std::string> out;

    if (task.gold_answers.empty()) out.push_back("task.gold_answers is empty");
    if (task.question.empty()) out.push_back("task.question is empty");
    if (task.document.empty()) out.push_back("task.document is empty");
    if (log.task_id != task.id)
        out.push_back(fmt_violation("task_id mismatch", log.task_id + " vs " + task.id));

    const int p = log.rereading_passes;
    if (p < 0) out.push_back("rereading_passes is negative");
    if (p > config.max_rereading_passes)
        out.push_back(fmt_violation("rereading_passes exceeds limit",
                                    std::to_string(p) + " > " +
                                        std::to_string(config.max_rereading_passes)));
    if (static_cast<int>(log.sub_qas.size()) != p)
        out.push_back(fmt_violation(
            "sub_qas length does not equal rereading_passes",
            std::to_string(log.sub_qas.size()) + " vs " + std::to_string(p)));

    for (std::size_t i = 0; i < log.sub_qas.size(); ++i) {
        if (log.sub_qas[i].sub_question.empty())
            out.push_back(fmt_violation("empty sub_question", "sub_qas[" + std::to_string(i) + "]"));
    }

    TokenizerPtr tokenizer;
    try {
        tokenizer = make_tokenizer(config.tokenizer);
    } catch (const ConfigError& e) {
        out.push_back(fmt_violation("config", e.what()));
        return out;
    }

    const auto chunks =
        chunk_document(task.document, static_cast<std::size_t>(config.chunk_size_tokens), *tokenizer);
    const std::size_t T = chunks.size();

    if (config.log_memories && p >= 0) {
        const std::size_t expected = static_cast<std::size_t>(p + 1) * T;
        if (log.memories.size() != expected) {
            out.push_back(fmt_violation("memories size mismatch",
                                        std::to_string(log.memories.size()) + " entries, expected " +
                                            std::to_string(expected) + " = (passes+1)*T"));
        } else {
            std::size_t i = 0;
            for (int pass = 0; pass <= p; ++pass) {
                for (std::size_t t = 0; t < T; ++t, ++i) {
                    const MemoryState& m = log.memories[i];
                    if (m.pass_index != pass || m.chunk_index != static_cast<int>(t)) {
                        out.push_back(fmt_violation(
                            "memory snapshot out of place",
                            "entry " + std::to_string(i) + " has (pass,chunk)=(" +
                                std::to_string(m.pass_index) + "," + std::to_string(m.chunk_index) +
                                "), expected (" + std::to_string(pass) + "," + std::to_string(t) +
                                ")"));
                    }
                }
            }
        }
    }

    for (std::size_t i = 0; i < log.memories.size(); ++i) {
        const MemoryState& m = log.memories[i];
        if (m.pass_index > config.max_rereading_passes)
            out.push_back(fmt_violation("memory pass_index exceeds limit",
                                        "entry " + std::to_string(i)));
        if (tokenizer->count(m.text) > static_cast<std::size_t>(config.max_response_tokens))
            out.push_back(fmt_violation("memory text exceeds max_response_tokens",
                                        "entry " + std::to_string(i) + " (pass " +
                                            std::to_string(m.pass_index) + ", chunk " +
                                            std::to_string(m.chunk_index) + ")"));
    }

    if (!log.incomplete && p >= 0) {
        // d: decompose calls issued. The loop either exhausted the pass budget
        // (d = p) or ended on a no-query decompose (d = p + 1).
        const int d = (p == config.max_rereading_passes) ? p : p + 1;
        const std::int64_t expected_calls =
            static_cast<std::int64_t>(T) * (p + 1) + d + 2 * p + 1;
        if (log.llm_calls != expected_calls)
            out.push_back(fmt_violation("llm_calls does not match closed form",
                                        std::to_string(log.llm_calls) + " vs T*(p+1)+d+2p+1 = " +
                                            std::to_string(expected_calls)));
    }

    return out;
}

// ============================================================================
// JSON
// ============================================================================

using nlohmann::json;

void to_json(json& j, const Task& v) {
    j = json{{"id", v.id},
             {"question", v.question},
             {"document", v.document},
             {"gold_answers", v.gold_answers},
             {"meta", v.meta}};
}

void from_json(const json& j, Task& v) {
    j.at("id").get_to(v.id);
    j.at("question").get_to(v.question);
    j.at("document").get_to(v.document);
    j.at("gold_answers").get_to(v.gold_answers);
    v.meta = j.value("meta", std::map<std::string, std::string>{});
}

void to_json(json& j, const MemoryState& v) {
    j = json{{"text", v.text}, {"pass_index", v.pass_index}, {"chunk_index", v.chunk_index}};
}

void from_json(const json& j, MemoryState& v) {
    j.at("text").get_to(v.text);
    j.at("pass_index").get_to(v.pass_index);
    j.at("chunk_index").get_to(v.chunk_index);
}

void to_json(json& j, const SubQA& v) {
    j = json{{"sub_question", v.sub_question},
             {"sub_answer", v.sub_answer},
             {"pass_index", v.pass_index}};
}

void from_json(const json& j, SubQA& v) {
    j.at("sub_question").get_to(v.sub_question);
    j.at("sub_answer").get_to(v.sub_answer);
    j.at("pass_index").get_to(v.pass_index);
}

void to_json(json& j, const TrajectoryLog& v) {
    j = json{{"task_id", v.task_id},
             {"memories", v.memories},
             {"sub_qas", v.sub_qas},
             {"final_answer", v.final_answer},
             {"rereading_passes", v.rereading_passes},
             {"llm_calls", v.llm_calls},
             {"peak_memory_bytes", v.peak_memory_bytes},
             {"wall_time_ms", v.wall_time_ms},
             {"incomplete", v.incomplete}};
    if (!v.error.empty()) j["error"] = v.error;
}

void from_json(const json& j, TrajectoryLog& v) {
    j.at("task_id").get_to(v.task_id);
    j.at("memories").get_to(v.memories);
    j.at("sub_qas").get_to(v.sub_qas);
    j.at("final_answer").get_to(v.final_answer);
    j.at("rereading_passes").get_to(v.rereading_passes);
    j.at("llm_calls").get_to(v.llm_calls);
    j.at("peak_memory_bytes").get_to(v.peak_memory_bytes);
    j.at("wall_time_ms").get_to(v.wall_time_ms);
    v.incomplete = j.value("incomplete", false);
    v.error = j.value("error", std::string{});
}

void to_json(json& j, const RolloutGroup& v) {
    j = json{{"task_id", v.task_id}, {"trajectories", v.trajectories}, {"rewards", v.rewards}};
}

void from_json(const json& j, RolloutGroup& v) {
    j.at("task_id").get_to(v.task_id);
    j.at("trajectories").get_to(v.trajectories);
    j.at("rewards").get_to(v.rewards);
}

void to_json(json& j, const BackendConfig& v) {
    j = json{{"kind", v.kind},
             {"script_path", v.script_path},
             {"api_base", v.api_base},
             {"api_key", v.api_key},
             {"model", v.model}};
}

void from_json(const json& j, BackendConfig& v) {
    v.kind = j.value("kind", v.kind);
    v.script_path = j.value("script_path", v.script_path);
    v.api_base = j.value("api_base", v.api_base);
    v.api_key = j.value("api_key", v.api_key);
    v.model = j.value("model", v.model);
}

void to_json(json& j, const RunConfig& v) {
    j = json{{"chunk_size_tokens", v.chunk_size_tokens},
             {"max_rereading_passes", v.max_rereading_passes},
             {"max_response_tokens", v.max_response_tokens},
             {"alpha", v.alpha},
             {"epsilon_std", v.epsilon_std},
             {"temperature", v.temperature},
             {"tokenizer", v.tokenizer},
             {"matcher", v.matcher},
             {"log_memories", v.log_memories},
             {"prompt_dir", v.prompt_dir},
             {"error_rate_threshold", v.error_rate_threshold},
             {"backend", v.backend}};
}

void from_json(const json& j, RunConfig& v) {
    v.chunk_size_tokens = j.value("chunk_size_tokens", v.chunk_size_tokens);
    v.max_rereading_passes = j.value("max_rereading_passes", v.max_rereading_passes);
    v.max_response_tokens = j.value("max_response_tokens", v.max_response_tokens);
    v.alpha = j.value("alpha", v.alpha);
    v.epsilon_std = j.value("epsilon_std", v.epsilon_std);
    v.temperature = j.value("temperature", v.temperature);
    v.tokenizer = j.value("tokenizer", v.tokenizer);
    v.matcher = j.value("matcher", v.matcher);
    v.log_memories = j.value("log_memories", v.log_memories);
    v.prompt_dir = j.value("prompt_dir", v.prompt_dir);
    v.error_rate_threshold = j.value("error_rate_threshold", v.error_rate_threshold);
    if (j.contains("backend")) j.at("backend").get_to(v.backend);
}

RunConfig run_config_from_json_strict(const nlohmann::json& j) {
    static const char* known[] = {"chunk_size_tokens", "max_rereading_passes",
                                  "max_response_tokens", "alpha",
                                  "epsilon_std", "temperature",
                                  "tokenizer", "matcher",
                                  "log_memories", "prompt_dir",
                                  "error_rate_threshold", "backend"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw ConfigError("unknown config key: " + it.key());
    }
    if (j.contains("backend")) {
        static const char* backend_known[] = {"kind", "script_path", "api_base", "api_key", "model"};
        for (auto it = j.at("backend").begin(); it != j.at("backend").end(); ++it) {
            bool ok = false;
            for (const char* k : backend_known) {
                if (it.key() == k) {
                    ok = true;
                    break;
                }
            }
            if (!ok) throw ConfigError("unknown config key: backend." + it.key());
        }
    }
    RunConfig cfg = j.get<RunConfig>();
    cfg.validate();
    return cfg;
}

// ============================================================================
// JSONL
// ============================================================================

namespace {

template <typename T>
std::vector<T> read_jsonl(const std::string& path, const char* what) {
    std::vector<T> out;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            out.push_back(json::parse(lines[i]).get<T>());
        } catch (const json::exception& e) {
            throw IoError(std::string(what) + " parse error at " + path + ":" +
                          std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& items) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path);
    for (const T& item : items) {
        out << json(item).dump() << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

std::vector<Task> read_tasks_jsonl(const std::string& path) {
    return read_jsonl<Task>(path, "task");
}

std::vector<TrajectoryLog> read_trajectories_jsonl(const std::string& path) {
    return read_jsonl<TrajectoryLog>(path, "trajectory");
}

void write_tasks_jsonl(const std::string& path, const std::vector<Task>& tasks) {
    write_jsonl(path, tasks);
}

void write_trajectories_jsonl(const std::string& path, const std::vector<TrajectoryLog>& logs) {
    write_jsonl(path, logs);
}

std::vector<std::vector<const TrajectoryLog*>> group_by_task(const std::vector<TrajectoryLog>& logs) {
    std::vector<std::vector<const TrajectoryLog*>> groups;
    std::map<std::string, std::size_t> index;
    for (const TrajectoryLog& log : logs) {
        auto it = index.find(log.task_id);
        if (it == index.end()) {
            index.emplace(log.task_id, groups.size());
            groups.push_back({&log});
        } else {
            groups[it->second].push_back(&log);
        }
    }
    return groups;
}

}  // namespace memreread
