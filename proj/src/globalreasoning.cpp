#include "memreread/globalreasoning.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "json.hpp"

namespace memreread {
namespace globalreasoning {

// ============================================================================
// Vocabularies
// ============================================================================

namespace {

const std::vector<std::string> kCities = {
    "City_A", "City_B", "City_C", "City_D", "City_E", "Nova_Prime", "Zion", "Matrix",
};

const std::vector<std::string> kVariables = {
    "sys_timeout", "db_port", "cache_size", "max_retries", "log_level", "worker_count",
};

const std::vector<std::string> kEntityAliases = {
    "Code-Alpha", "Code-Beta",  "Code-Gamma", "Omega-Protocol", "Sector-X",
    "Phantom-9",  "Alias-77",   "Echo-Base",  "Node-Zero",      "Cluster-V",
};

const std::vector<std::string> kStatisticsEvents = {
    "Operation 77-B",
    "Protocol X-9",
    "Class-IV atmospheric disturbance",
    "Category-B logical paradox",
    "unauthorized access trace",
    "encrypted telemetry burst",
};

const std::vector<std::string> kTrackingDescriptors = {
    "core engine parameter",
    "registry key 0x0FA",
    "subsystem coefficient",
    "thread pool minimum size",
    "encryption cipher strength",
    "web server configuration",
};

template <typename T>
const T& pick(const std::vector<T>& pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.next_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
}

std::string make_uuid(Rng& rng) {
    static const char* hex = "0123456789abcdef";
    unsigned char bytes[16];
    for (int i = 0; i < 16; i += 8) {
        std::uint64_t word = rng.next_u64();
        for (int b = 0; b < 8; ++b) bytes[i + b] = static_cast<unsigned char>(word >> (b * 8));
    }
    bytes[6] = static_cast<unsigned char>((bytes[6] & 0x0f) | 0x40);  // version 4
    bytes[8] = static_cast<unsigned char>((bytes[8] & 0x3f) | 0x80);  // variant
    std::string out;
    out.reserve(36);
    for (int i = 0; i < 16; ++i) {
        if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
        out.push_back(hex[bytes[i] >> 4]);
        out.push_back(hex[bytes[i] & 0x0f]);
    }
    return out;
}

std::string seq_label(int n) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%03d", n);
    return buf;
}

std::string log_line(const std::string& descriptor, const std::string& entity, int seq, int value) {
    std::ostringstream out;
    out << "[System Log Seq " << seq_label(seq) << "] The " << descriptor << " '" << entity << "' "
        << (seq == 0 ? "is initially set to" : "is updated to") << " '" << value << "'.";
    return out.str();
}

}  // namespace

const char* task_type_name(TaskType type) {
    return type == TaskType::statistics ? "statistics" : "variable_tracking";
}

TaskType task_type_from_string(const std::string& name) {
    if (name == "statistics") return TaskType::statistics;
    if (name == "variable_tracking" || name == "variable-tracking")
        return TaskType::variable_tracking;
    throw ConfigError("unknown task type: " + name +
                      " (expected statistics or variable-tracking)");
}

// ============================================================================
// Facts
// ============================================================================

FactSet build_facts(const GenSpec& spec, Rng& rng) {
    const int n_facts = spec.n_facts > 0 ? spec.n_facts : static_cast<int>(rng.next_int(3, 10));
    if (n_facts < 3 || n_facts > 10)
        throw std::invalid_argument("n_facts must lie in [3, 10]");
    const int n_distractors = spec.n_distractors >= 0 ? spec.n_distractors : n_facts;

    FactSet facts;
    facts.alias = pick(kEntityAliases, rng);
    do {
        facts.distractor_alias = pick(kEntityAliases, rng);
    } while (facts.distractor_alias == facts.alias);

    if (spec.task_type == TaskType::statistics) {
        facts.true_entity = pick(kCities, rng);
        facts.event_alias = pick(kStatisticsEvents, rng);

        std::set<std::string> seen;
        auto fresh_uuid = [&] {
            std::string id;
            do {
                id = make_uuid(rng);
            } while (!seen.insert(id).second);
            return id;
        };
        for (int i = 0; i < n_facts; ++i) {
            facts.indirect_facts.push_back("The facility in " + facts.alias + " registered a " +
                                           facts.event_alias + " of type " + fresh_uuid() + ".");
        }
        for (int i = 0; i < n_distractors; ++i) {
            facts.distractors.push_back("The facility in " + facts.distractor_alias +
                                        " registered a " + facts.event_alias + " of type " +
                                        fresh_uuid() + ".");
        }
        facts.direct_fact = "Note for all personnel: The facility formally designated as " +
                            facts.alias + " is physically located in " + facts.true_entity +
                            ", and a '" + facts.event_alias +
                            "' is the official designation for a magic anomaly. " +
                            facts.distractor_alias + " is not in " + facts.true_entity + ".";
        facts.question = "How many distinct magic anomalies were registered in the facility in " +
                         facts.true_entity + "? Please use Arabic numerals for your answer.";
        facts.answer = std::to_string(n_facts);
        return facts;
    }

    facts.true_entity = pick(kVariables, rng);
    facts.event_alias = pick(kTrackingDescriptors, rng);

    std::vector<int> seqs(static_cast<std::size_t>(n_facts));
    for (int i = 0; i < n_facts; ++i) seqs[static_cast<std::size_t>(i)] = i;
    rng.shuffle(seqs);

    int answer_value = 0;
    for (int i = 0; i < n_facts; ++i) {
        const int value = static_cast<int>(rng.next_int(1000, 9999));
        if (seqs[static_cast<std::size_t>(i)] == n_facts - 1) answer_value = value;
        facts.indirect_facts.push_back(
            log_line(facts.event_alias, facts.alias, seqs[static_cast<std::size_t>(i)], value));
    }

    std::vector<int> decoy_seqs(static_cast<std::size_t>(n_distractors));
    for (int i = 0; i < n_distractors; ++i) decoy_seqs[static_cast<std::size_t>(i)] = i;
    rng.shuffle(decoy_seqs);
    for (int i = 0; i < n_distractors; ++i) {
        facts.distractors.push_back(log_line(facts.event_alias, facts.distractor_alias,
                                             decoy_seqs[static_cast<std::size_t>(i)],
                                             static_cast<int>(rng.next_int(1000, 9999))));
    }

    facts.direct_fact = "System architecture documentation confirms that the internal alias '" +
                        facts.alias + "' represents the '" + facts.true_entity + "', and the '" +
                        facts.event_alias + "' structurally signifies the configuration variable.";
    facts.question = "According to the system logs, what is the final configuration value of '" +
                     facts.true_entity +
                     "' (indicated by the highest log sequence number)? Please use Arabic "
                     "numerals for your answer.";
    facts.answer = std::to_string(answer_value);
    return facts;
}

// ============================================================================
// Context padding
// ============================================================================

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool terminator =
            (c == '.' || c == '!' || c == '?') &&
            (i + 1 >= text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
        if (terminator || c == '\n') {
            std::string sentence = trim(text.substr(start, i + 1 - start));
            if (!sentence.empty()) out.push_back(std::move(sentence));
            start = i + 1;
        }
    }
    std::string tail = trim(text.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

namespace {

std::string join_segments(const std::vector<std::string>& segments) {
    std::string out;
    std::size_t total = 0;
    for (const auto& s : segments) total += s.size() + 1;
    out.reserve(total);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out.append(segments[i]);
    }
    return out;
}

// Cuts trailing words off the sentence list so its joined token count drops
// to at most `budget`.
void trim_to_budget(std::vector<std::string>& sentences, std::size_t budget,
                    const Tokenizer& tokenizer) {
    std::string joined = join_segments(sentences);
    if (tokenizer.count(joined) <= budget) return;
    std::size_t keep = tokenizer.max_prefix(joined, budget);
    // Snap to a word boundary so no word is cut in half.
    while (keep > 0 && !std::isspace(static_cast<unsigned char>(joined[keep - 1]))) --keep;

    std::size_t offset = 0;
    std::size_t last = sentences.size();
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        const std::size_t begin = offset;
        const std::size_t end = begin + sentences[i].size();
        if (keep <= begin) {
            last = i;
            break;
        }
        if (keep < end) {
            std::string cut = trim(std::string_view(sentences[i]).substr(0, keep - begin));
            if (cut.empty()) {
                last = i;
            } else {
                sentences[i] = std::move(cut);
                last = i + 1;
            }
            break;
        }
        offset = end + 1;  // separator
    }
    sentences.resize(last);
}

// Splits the longest multi-word sentence near its middle whitespace to create
// an extra insertion boundary without changing the token count.
bool split_longest(std::vector<std::string>& sentences) {
    std::size_t best = sentences.size();
    std::size_t best_len = 0;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (sentences[i].size() > best_len &&
            sentences[i].find(' ') != std::string::npos) {
            best = i;
            best_len = sentences[i].size();
        }
    }
    if (best == sentences.size()) return false;
    const std::string& s = sentences[best];
    std::size_t mid = s.size() / 2;
    std::size_t cut = s.find(' ', mid);
    if (cut == std::string::npos) cut = s.rfind(' ', mid);
    if (cut == std::string::npos || cut == 0 || cut + 1 >= s.size()) return false;
    std::string left = trim(std::string_view(s).substr(0, cut));
    std::string right = trim(std::string_view(s).substr(cut + 1));
    if (left.empty() || right.empty()) return false;
    sentences[best] = std::move(left);
    sentences.insert(sentences.begin() + static_cast<std::ptrdiff_t>(best) + 1, std::move(right));
    return true;
}

double token_fraction(const std::string& doc, std::size_t offset, std::size_t total,
                      const Tokenizer& tokenizer) {
    if (total == 0) return 0.0;
    return static_cast<double>(tokenizer.count(std::string_view(doc).substr(0, offset))) /
           static_cast<double>(total);
}

}  // namespace

PlacedSample pad_context(const FactSet& facts, const GenSpec& spec, std::string_view corpus,
                         Rng& rng, const Tokenizer& tokenizer) {
    std::vector<std::string> corpus_sentences = split_sentences(corpus);
    if (corpus_sentences.empty())
        throw std::invalid_argument("background corpus is empty");

    std::vector<std::string> fact_segments = facts.indirect_facts;
    fact_segments.insert(fact_segments.end(), facts.distractors.begin(), facts.distractors.end());

    const std::size_t fact_tokens =
        tokenizer.count(join_segments(fact_segments) + " " + facts.direct_fact);
    if (fact_tokens + 8 > spec.target_tokens)
        throw std::invalid_argument("target_tokens too small for the generated fact set");
    const std::size_t background_budget = spec.target_tokens - fact_tokens;

    // Pull sentences starting from a random corpus position until the
    // background plus facts reach the target, then trim the tail back.
    // Per-sentence counts only estimate the joined total, so the loop
    // re-measures the exact count after each batch.
    std::vector<std::string> background;
    std::size_t idx = static_cast<std::size_t>(
        rng.next_int(0, static_cast<std::int64_t>(corpus_sentences.size()) - 1));
    bool warned = false;
    std::size_t exact = 0;
    while (exact < background_budget) {
        std::size_t batch = 0;
        const std::size_t deficit = background_budget - exact;
        while (batch < deficit + 8) {
            if (idx >= corpus_sentences.size()) {
                idx = 0;
                if (!warned) {
                    log::warn("background corpus shorter than target length; cycling");
                    warned = true;
                }
            }
            background.push_back(corpus_sentences[idx]);
            batch += std::max<std::size_t>(1, tokenizer.count(corpus_sentences[idx]));
            ++idx;
        }
        exact = tokenizer.count(join_segments(background));
    }
    trim_to_budget(background, background_budget, tokenizer);

    // Every splice point gets its own sentence boundary; slots are "before
    // sentence i", so the document always ends with background text.
    const std::size_t needed = fact_segments.size();
    while (background.size() < needed + 2) {
        if (!split_longest(background)) {
            throw std::invalid_argument("background corpus has too few usable sentences");
        }
    }

    std::vector<std::size_t> slots = rng.sample_distinct(background.size(), needed);

    // Merge: at most one fact is queued before any sentence.
    std::vector<std::size_t> fact_at(background.size(), SIZE_MAX);
    for (std::size_t f = 0; f < needed; ++f) fact_at[slots[f]] = f;

    std::vector<std::string> merged;
    std::vector<std::size_t> merged_fact_index;  // position of fact f in `merged`
    merged_fact_index.resize(needed, 0);
    merged.reserve(background.size() + needed);
    for (std::size_t i = 0; i < background.size(); ++i) {
        if (fact_at[i] != SIZE_MAX) {
            merged_fact_index[fact_at[i]] = merged.size();
            merged.push_back(fact_segments[fact_at[i]]);
        }
        merged.push_back(background[i]);
    }

    // Direct-fact slot: a merged-item boundary whose token fraction of the
    // final document falls inside [0.5, 0.9].
    const std::string without_direct = join_segments(merged);
    const std::size_t total_without = tokenizer.count(without_direct);
    const std::size_t direct_tokens = tokenizer.count(facts.direct_fact);
    const std::size_t projected_total = total_without + direct_tokens;

    std::vector<std::size_t> item_offsets(merged.size());
    {
        std::size_t off = 0;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            item_offsets[i] = off;
            off += merged[i].size() + 1;
        }
    }
    const std::size_t lo_bytes = tokenizer.max_prefix(
        without_direct, static_cast<std::size_t>(0.505 * static_cast<double>(projected_total)));
    const std::size_t hi_bytes = tokenizer.max_prefix(
        without_direct, static_cast<std::size_t>(0.895 * static_cast<double>(projected_total)));
    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i < merged.size(); ++i) {
        if (item_offsets[i] >= lo_bytes && item_offsets[i] <= hi_bytes) candidates.push_back(i);
    }
    if (candidates.empty())
        throw std::invalid_argument(
            "no sentence boundary available inside [0.5, 0.9]; corpus sentences too coarse for "
            "this target length");
    const std::size_t direct_item =
        candidates[static_cast<std::size_t>(rng.next_int(0, static_cast<std::int64_t>(candidates.size()) - 1))];

    std::vector<std::string> final_items = merged;
    final_items.insert(final_items.begin() + static_cast<std::ptrdiff_t>(direct_item),
                       facts.direct_fact);

    PlacedSample sample;
    sample.facts = facts;
    sample.task.question = facts.question;
    sample.task.gold_answers = {facts.answer};
    sample.task.document = join_segments(final_items);
    sample.task.meta["family"] = task_type_name(spec.task_type);
    sample.task.meta["length"] = std::to_string(spec.target_tokens);

    const std::size_t total = tokenizer.count(sample.task.document);

    // Byte offsets in the final document.
    std::vector<std::size_t> final_offsets(final_items.size());
    {
        std::size_t off = 0;
        for (std::size_t i = 0; i < final_items.size(); ++i) {
            final_offsets[i] = off;
            off += final_items[i].size() + 1;
        }
    }
    auto item_fraction = [&](std::size_t item) {
        return token_fraction(sample.task.document, final_offsets[item], total, tokenizer);
    };

    sample.direct_position = item_fraction(direct_item);
    for (std::size_t f = 0; f < needed; ++f) {
        std::size_t item = merged_fact_index[f];
        if (item >= direct_item) ++item;  // shifted by the direct insertion
        const double frac = item_fraction(item);
        if (f < facts.indirect_facts.size()) {
            sample.indirect_positions.push_back(frac);
        } else {
            sample.distractor_positions.push_back(frac);
        }
    }
    return sample;
}

PlacedSample generate_sample(const GenSpec& spec, std::string_view corpus,
                             const Tokenizer& tokenizer) {
    Rng rng(spec.seed);
    const FactSet facts = build_facts(spec, rng);
    return pad_context(facts, spec, corpus, rng, tokenizer);
}

// ============================================================================
// Dataset emission
// ============================================================================

void generate_dataset(TaskType type, const std::vector<std::size_t>& lengths, int per_length,
                      std::uint64_t seed, const std::string& corpus_path,
                      const std::string& out_path, const Tokenizer& tokenizer) {
    if (per_length < 1) throw std::invalid_argument("per_length must be >= 1");
    const std::string corpus = read_file(corpus_path);

    std::vector<Task> tasks;
    std::vector<nlohmann::json> meta;
    for (const std::size_t length : lengths) {
        for (int i = 0; i < per_length; ++i) {
            GenSpec spec;
            spec.task_type = type;
            spec.target_tokens = length;
            spec.corpus_path = corpus_path;
            spec.seed = derive_seed(
                derive_seed(derive_seed(seed, task_type_name(type)), static_cast<std::uint64_t>(length)),
                static_cast<std::uint64_t>(i));
            PlacedSample sample = generate_sample(spec, corpus, tokenizer);

            std::ostringstream id;
            id << task_type_name(type) << "-" << length << "-" << i;
            sample.task.id = id.str();

            nlohmann::json m = {
                {"id", sample.task.id},
                {"seed", spec.seed},
                {"n_facts", sample.facts.indirect_facts.size()},
                {"true_entity", sample.facts.true_entity},
                {"alias", sample.facts.alias},
                {"distractor_alias", sample.facts.distractor_alias},
                {"event_alias", sample.facts.event_alias},
                {"answer", sample.facts.answer},
                {"direct_fact", sample.facts.direct_fact},
                {"direct_position", sample.direct_position},
                {"indirect_positions", sample.indirect_positions},
                {"distractor_positions", sample.distractor_positions},
            };
            meta.push_back(std::move(m));
            tasks.push_back(std::move(sample.task));
        }
    }

    write_tasks_jsonl(out_path, tasks);
    std::ostringstream meta_body;
    for (const auto& m : meta) meta_body << m.dump() << '\n';
    write_file(out_path + ".meta.jsonl", meta_body.str());
}

// ============================================================================
// Reference solver
// ============================================================================

namespace {

std::string_view slice_between(std::string_view text, std::string_view after,
                               std::string_view until, std::size_t from = 0) {
    const std::size_t a = text.find(after, from);
    if (a == std::string_view::npos) return {};
    const std::size_t begin = a + after.size();
    const std::size_t b = text.find(until, begin);
    if (b == std::string_view::npos) return {};
    return text.substr(begin, b - begin);
}

std::string solve_statistics(std::string_view document, std::string_view question) {
    const std::string_view city = slice_between(question, "in the facility in ", "?");
    if (city.empty()) throw OracleError("statistics question does not name a city");

    const std::string located = " is physically located in " + std::string(city) + ",";
    const std::size_t loc_pos = document.find(located);
    if (loc_pos == std::string_view::npos)
        throw OracleError("direct fact for city '" + std::string(city) + "' not found");
    static constexpr std::string_view designated = "The facility formally designated as ";
    const std::size_t des_pos = document.rfind(designated, loc_pos);
    if (des_pos == std::string_view::npos) throw OracleError("direct fact lacks the alias clause");
    const std::string alias =
        std::string(document.substr(des_pos + designated.size(),
                                    loc_pos - (des_pos + designated.size())));
    const std::string_view event =
        slice_between(document, "and a '", "' is the official designation for a magic anomaly",
                      loc_pos);
    if (alias.empty() || event.empty())
        throw OracleError("direct fact is malformed (alias or designation missing)");

    const std::string line_prefix =
        "The facility in " + alias + " registered a " + std::string(event) + " of type ";
    std::set<std::string> ids;
    std::size_t pos = 0;
    while (true) {
        const std::size_t p = document.find(line_prefix, pos);
        if (p == std::string_view::npos) break;
        const std::size_t begin = p + line_prefix.size();
        const std::size_t end = document.find('.', begin);
        if (end == std::string_view::npos) break;
        ids.insert(std::string(document.substr(begin, end - begin)));
        pos = end + 1;
    }
    if (ids.empty()) throw OracleError("no registered events found for alias '" + alias + "'");
    return std::to_string(ids.size());
}

std::string solve_tracking(std::string_view document, std::string_view question) {
    const std::string_view variable =
        slice_between(question, "final configuration value of '", "'");
    if (variable.empty()) throw OracleError("tracking question does not name a variable");

    const std::string represents = "' represents the '" + std::string(variable) + "'";
    const std::size_t rep_pos = document.find(represents);
    if (rep_pos == std::string_view::npos)
        throw OracleError("direct fact for variable '" + std::string(variable) + "' not found");
    static constexpr std::string_view alias_marker = "the internal alias '";
    const std::size_t alias_pos = document.rfind(alias_marker, rep_pos);
    if (alias_pos == std::string_view::npos) throw OracleError("direct fact lacks the alias clause");
    const std::string alias = std::string(document.substr(
        alias_pos + alias_marker.size(), rep_pos - (alias_pos + alias_marker.size())));
    if (alias.empty()) throw OracleError("direct fact is malformed (alias missing)");

    static constexpr std::string_view seq_marker = "[System Log Seq ";
    const std::string updated = "'" + alias + "' is updated to '";
    const std::string initial = "'" + alias + "' is initially set to '";

    int best_seq = -1;
    std::string best_value;
    std::size_t pos = 0;
    while (true) {
        const std::size_t p = document.find(seq_marker, pos);
        if (p == std::string_view::npos) break;
        const std::size_t seq_begin = p + seq_marker.size();
        const std::size_t seq_end = document.find(']', seq_begin);
        if (seq_end == std::string_view::npos) break;
        pos = seq_end + 1;

        int seq = -1;
        try {
            seq = std::stoi(std::string(document.substr(seq_begin, seq_end - seq_begin)));
        } catch (...) {
            continue;
        }

        // The value is quoted right after the alias-specific update marker.
        const std::size_t stop = document.find(seq_marker, pos);
        const std::string_view line =
            document.substr(seq_end, (stop == std::string_view::npos ? document.size() : stop) -
                                         seq_end);
        std::size_t v = line.find(updated);
        std::size_t v_len = updated.size();
        if (v == std::string_view::npos) {
            v = line.find(initial);
            v_len = initial.size();
        }
        if (v == std::string_view::npos) continue;
        const std::size_t value_begin = v + v_len;
        const std::size_t value_end = line.find('\'', value_begin);
        if (value_end == std::string_view::npos) continue;
        if (seq > best_seq) {
            best_seq = seq;
            best_value = std::string(line.substr(value_begin, value_end - value_begin));
        }
    }
    if (best_seq < 0)
        throw OracleError("no log entries found for alias '" + alias + "'");
    return best_value;
}

}  // namespace

std::string solve(std::string_view document, std::string_view question, TaskType type) {
    if (type == TaskType::statistics) return solve_statistics(document, question);
    return solve_tracking(document, question);
}

}  // namespace globalreasoning
}  // namespace memreread
