#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "memreread/core_types.hpp"

namespace memreread {

// Memory placeholder used for the first chunk of every reading pass.
inline constexpr const char* kNoMemory = "NO_MEMORY";

struct RenderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class PromptKind { reading, answering, decomposing, integrating };

const char* prompt_kind_name(PromptKind kind);

// The four prompt templates. Bodies carry the named placeholders {question},
// {memory}, {chunk}, {qa_history}, {subquestion}, {subanswer}.
struct PromptSet {
    std::string reading;
    std::string answering;
    std::string decomposing;
    std::string integrating;

    static PromptSet defaults();

    // Loads reading.txt / answering.txt / decomposing.txt / integrating.txt
    // from a directory; throws IoError when a file is missing.
    static PromptSet from_dir(const std::string& dir);

    const std::string& body(PromptKind kind) const;
};

struct RenderArgs {
    std::string question;
    std::string memory;
    std::optional<std::string> chunk;
    std::optional<std::vector<SubQA>> qa_history;
    std::optional<SubQA> subqa;
};

// Substitutes the placeholders required by `kind` into the template. Throws
// RenderError naming the placeholder when a required argument is absent or the
// template body lacks the placeholder token.
std::string render(const PromptSet& prompts, PromptKind kind, const RenderArgs& args);

// qa_history entries rendered as numbered "Q: ... A: ..." lines.
std::string format_qa_history(const std::vector<SubQA>& history);

// Content of the first well-formed <query>...</query> pair, trimmed. Absent
// when no such pair exists (the sufficiency signal).
std::optional<std::string> parse_query(std::string_view decompose_output);

// Content of the last balanced \boxed{...} group (nesting-aware); falls back
// to the whole output, trimmed, when no balanced group exists.
std::string parse_boxed_answer(std::string_view answer_output);

// Removes <confirmed> and </confirmed> markers, keeping the enclosed text.
std::string strip_confirmed_tags(std::string_view memory);

}  // namespace memreread
