#include "memreread/tokenizer.hpp"

#include <algorithm>
#include <cctype>

#include "memreread/util.hpp"

namespace memreread {

namespace {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

class WhitespaceTokenizer final : public Tokenizer {
public:
    const char* name() const override { return "whitespace"; }

    std::size_t count(std::string_view text) const override {
        std::size_t n = 0;
        bool in_word = false;
        for (char c : text) {
            if (is_space(c)) {
                in_word = false;
            } else if (!in_word) {
                in_word = true;
                ++n;
            }
        }
        return n;
    }

    std::size_t max_prefix(std::string_view text, std::size_t budget) const override {
        std::size_t n = 0;
        bool in_word = false;
        for (std::size_t i = 0; i < text.size(); ++i) {
            if (is_space(text[i])) {
                in_word = false;
            } else if (!in_word) {
                if (n == budget) return i;  // next word would exceed the budget
                in_word = true;
                ++n;
            }
        }
        return text.size();
    }
};

class CharQuadTokenizer final : public Tokenizer {
public:
    const char* name() const override { return "char4"; }

    std::size_t count(std::string_view text) const override {
        return (text.size() + 3) / 4;
    }

    std::size_t max_prefix(std::string_view text, std::size_t budget) const override {
        if (budget >= text.size() / 4 + 1) return text.size();
        return std::min(text.size(), budget * 4);
    }
};

}  // namespace

TokenizerPtr make_tokenizer(const std::string& selector) {
    if (selector == "whitespace") return std::make_shared<WhitespaceTokenizer>();
    if (selector == "char4") return std::make_shared<CharQuadTokenizer>();
    throw ConfigError("unknown tokenizer: " + selector + " (expected whitespace or char4)");
}

std::size_t count_tokens(std::string_view text, const Tokenizer& tokenizer) {
    return tokenizer.count(text);
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens,
                               const Tokenizer& tokenizer) {
    std::size_t end = tokenizer.max_prefix(text, max_tokens);
    if (end >= text.size()) return std::string(text);
    end = utf8_floor(text, end);
    return std::string(text.substr(0, end));
}

namespace {

// Best split point inside (pos, limit], by boundary priority. Both arguments
// and the result are absolute byte offsets; the next chunk starts at the
// returned offset.
std::size_t pick_split(std::string_view doc, std::size_t pos, std::size_t limit) {
    // Paragraph break: split right after the last "\n\n" that fits.
    for (std::size_t i = limit; i > pos + 1; --i) {
        if (doc[i - 1] == '\n' && doc[i - 2] == '\n') return i;
    }
    // Sentence end: terminator followed by whitespace; the whitespace char
    // stays with the left chunk.
    for (std::size_t i = limit; i > pos + 1; --i) {
        char prev = doc[i - 2];
        if ((prev == '.' || prev == '!' || prev == '?') && is_space(doc[i - 1])) return i;
    }
    // Whitespace.
    for (std::size_t i = limit; i > pos; --i) {
        if (is_space(doc[i - 1])) return i;
    }
    // Hard split; avoid cutting a UTF-8 sequence unless that would stall.
    std::size_t snapped = utf8_floor(doc, limit);
    return snapped > pos ? snapped : limit;
}

}  // namespace

std::vector<Chunk> chunk_document(std::string_view document, std::size_t chunk_size_tokens,
                                  const Tokenizer& tokenizer) {
    std::vector<Chunk> chunks;
    if (document.empty()) return chunks;
    if (chunk_size_tokens == 0) throw ConfigError("chunk_size_tokens must be positive");

    std::size_t pos = 0;
    int index = 0;
    while (pos < document.size()) {
        std::string_view rest = document.substr(pos);
        std::size_t fit = tokenizer.max_prefix(rest, chunk_size_tokens);
        if (fit == 0) fit = 1;  // always make progress (single byte still counts <= 1 token)
        std::size_t split;
        if (fit >= rest.size()) {
            split = document.size();
        } else {
            split = pick_split(document, pos, pos + fit);
        }
        Chunk chunk;
        chunk.index = index++;
        chunk.text = std::string(document.substr(pos, split - pos));
        chunk.token_count = tokenizer.count(chunk.text);
        chunks.push_back(std::move(chunk));
        pos = split;
    }
    return chunks;
}

}  // namespace memreread
