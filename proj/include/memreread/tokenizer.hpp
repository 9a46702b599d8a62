#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace memreread {

// Token counting abstraction. Selectors: "whitespace" (word counting, the
// default) and "char4" (ceil(bytes/4) estimator). Counts are monotone under
// concatenation and count("") == 0 for both.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;

    virtual const char* name() const = 0;
    virtual std::size_t count(std::string_view text) const = 0;

    // Length in bytes of the longest prefix whose token count stays <= budget.
    virtual std::size_t max_prefix(std::string_view text, std::size_t budget) const = 0;
};

using TokenizerPtr = std::shared_ptr<const Tokenizer>;

// throws ConfigError on an unknown selector
TokenizerPtr make_tokenizer(const std::string& selector);

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer);

// Longest prefix with count <= max_tokens, snapped back to a UTF-8 boundary.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens,
                               const Tokenizer& tokenizer);

// One bounded segment of a document. Concatenating the texts of all chunks in
// index order reproduces the document byte for byte.
struct Chunk {
    int index = 0;
    std::string text;
    std::size_t token_count = 0;
};

// Splits a document into chunks of at most chunk_size_tokens tokens each.
// Split points prefer, in order: paragraph breaks, sentence ends, whitespace,
// then a hard character split. Empty document yields an empty list.
std::vector<Chunk> chunk_document(std::string_view document, std::size_t chunk_size_tokens,
                                  const Tokenizer& tokenizer);

}  // namespace memreread
