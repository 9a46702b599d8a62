#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "memreread/core_types.hpp"
#include "memreread/tokenizer.hpp"
#include "memreread/util.hpp"

namespace memreread {
namespace globalreasoning {

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class TaskType { statistics, variable_tracking };

const char* task_type_name(TaskType type);
TaskType task_type_from_string(const std::string& name);  // throws ConfigError

// Parameters for one synthetic sample.
struct GenSpec {
    TaskType task_type = TaskType::statistics;
    std::size_t target_tokens = 8000;
    int n_facts = 0;        // 0 draws a value from [3, 10]
    int n_distractors = -1; // -1 matches n_facts
    std::uint64_t seed = 0;
    std::string corpus_path;
};

// The evidence kit of one sample. Statistics samples count distinct event
// ids registered at the aliased facility; variable-tracking samples follow
// the highest-sequence log value of the aliased variable.
struct FactSet {
    std::string direct_fact;
    std::vector<std::string> indirect_facts;
    std::vector<std::string> distractors;
    std::string true_entity;       // city or configuration variable
    std::string alias;             // substituted entity bound to the answer
    std::string distractor_alias;  // decoy entity, never equal to alias
    std::string event_alias;       // event designation / log descriptor
    std::string question;
    std::string answer;
};

// A fact set spliced into background text, with recorded placements as token
// fractions of the final document.
struct PlacedSample {
    Task task;
    FactSet facts;
    std::vector<double> indirect_positions;
    std::vector<double> distractor_positions;
    double direct_position = 0.0;
};

// Deterministically synthesizes the facts, entities, question and answer for
// one sample.
FactSet build_facts(const GenSpec& spec, Rng& rng);

// Extracts background sentences from the corpus (cycling with a warning when
// it is too short), splices the indirect facts and distractors at distinct
// random sentence boundaries and the direct fact at a token fraction drawn
// from [0.5, 0.9], and trims the result to within 2% of the target length.
PlacedSample pad_context(const FactSet& facts, const GenSpec& spec, std::string_view corpus,
                         Rng& rng, const Tokenizer& tokenizer);

// Convenience: build_facts + pad_context under a derived per-sample RNG.
PlacedSample generate_sample(const GenSpec& spec, std::string_view corpus,
                             const Tokenizer& tokenizer);

// Writes `out_path` (Task JSONL) and `out_path + ".meta.jsonl"` (placements
// and fact sets). Deterministic for fixed arguments; per-sample seeds are
// derived independently, so ordering never depends on scheduling.
void generate_dataset(TaskType type, const std::vector<std::size_t>& lengths, int per_length,
                      std::uint64_t seed, const std::string& corpus_path,
                      const std::string& out_path, const Tokenizer& tokenizer);

// Rule-based reference solver. Resolves the alias through the direct fact and
// re-derives the answer by scanning the document; throws OracleError when the
// document does not carry a parseable direct fact.
std::string solve(std::string_view document, std::string_view question, TaskType type);

// Sentence segmentation used for boundary placement (exposed for tests).
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace globalreasoning
}  // namespace memreread
