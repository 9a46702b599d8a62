#include <numeric>

#include "doctest.h"
#include "json.hpp"
#include "memreread/tokenizer.hpp"
#include "memreread/util.hpp"

using namespace memreread;

namespace {

// Mix of ascii words, multi-byte unicode, punctuation and paragraph breaks.
std::string random_document(Rng& rng, std::size_t approx_words) {
    static const char* pieces[] = {"alpha", "beta",  "gamma", "delta", "răspuns", "日本語",
                                   "x",     "12345", "émile", "ток",   "a.b",    "q?"};
    std::string out;
    for (std::size_t i = 0; i < approx_words; ++i) {
        out += pieces[rng.next_int(0, 11)];
        switch (rng.next_int(0, 9)) {
            case 0: out += ". "; break;
            case 1: out += "! "; break;
            case 2: out += "?\n"; break;
            case 3: out += "\n\n"; break;
            case 4: out += "  "; break;
            default: out += " "; break;
        }
    }
    if (rng.next_int(0, 1) == 0 && !out.empty()) out.pop_back();
    return out;
}

}  // namespace

TEST_CASE("count_tokens on the whitespace tokenizer") {
    const auto tok = make_tokenizer("whitespace");
    CHECK(tok->count("") == 0);
    CHECK(tok->count("hello world") == 2);
    CHECK(tok->count("  spaced   out  ") == 2);
    CHECK(tok->count("one") == 1);

    // count(s + " " + s) = 2 * count(s)
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const std::string s = random_document(rng, static_cast<std::size_t>(rng.next_int(0, 30)));
        CHECK(tok->count(s + " " + s) == 2 * tok->count(s));
    }
}

TEST_CASE("count_tokens on the char4 estimator") {
    const auto tok = make_tokenizer("char4");
    CHECK(tok->count("") == 0);
    CHECK(tok->count("abcd") == 1);
    CHECK(tok->count("abcde") == 2);
}

TEST_CASE("unknown tokenizer selector is a configuration error") {
    CHECK_THROWS_AS(make_tokenizer("qwen3"), ConfigError);
}

TEST_CASE("token counts are monotone under concatenation") {
    Rng rng(11);
    for (const char* name : {"whitespace", "char4"}) {
        const auto tok = make_tokenizer(name);
        for (int i = 0; i < 200; ++i) {
            const std::string a = random_document(rng, static_cast<std::size_t>(rng.next_int(0, 20)));
            const std::string b = random_document(rng, static_cast<std::size_t>(rng.next_int(0, 20)));
            const auto joined = tok->count(a + b);
            CHECK(joined >= tok->count(a));
            CHECK(joined >= tok->count(b));
        }
    }
}

TEST_CASE("max_prefix returns the longest prefix under budget") {
    Rng rng(17);
    for (const char* name : {"whitespace", "char4"}) {
        const auto tok = make_tokenizer(name);
        for (int i = 0; i < 100; ++i) {
            const std::string s = random_document(rng, static_cast<std::size_t>(rng.next_int(1, 40)));
            const std::size_t budget = static_cast<std::size_t>(rng.next_int(0, 20));
            const std::size_t end = tok->max_prefix(s, budget);
            CHECK(tok->count(std::string_view(s).substr(0, end)) <= budget);
            if (end < s.size()) {
                CHECK(tok->count(std::string_view(s).substr(0, end + 1)) > budget);
            }
        }
    }
}

TEST_CASE("chunking splits a 12000 token document under a 5000 budget") {
    std::string doc;
    for (int i = 0; i < 12000; ++i) {
        doc += "w" + std::to_string(i);
        doc += (i % 17 == 16) ? ".\n" : " ";
    }
    const auto tok = make_tokenizer("whitespace");
    const auto chunks = chunk_document(doc, 5000, *tok);
    REQUIRE(chunks.size() == 3);
    std::size_t total = 0;
    for (const auto& c : chunks) {
        CHECK(c.token_count <= 5000);
        total += c.token_count;
    }
    CHECK(total == 12000);
}

TEST_CASE("chunking an empty document yields no chunks") {
    const auto tok = make_tokenizer("whitespace");
    CHECK(chunk_document("", 100, *tok).empty());
}

TEST_CASE("chunking is lossless and bounded on fuzzed unicode documents") {
    Rng rng(23);
    for (const char* name : {"whitespace", "char4"}) {
        const auto tok = make_tokenizer(name);
        for (int i = 0; i < 500; ++i) {
            const std::string doc =
                random_document(rng, static_cast<std::size_t>(rng.next_int(0, 120)));
            const std::size_t budget = static_cast<std::size_t>(rng.next_int(1, 30));
            const auto chunks = chunk_document(doc, budget, *tok);
            std::string joined;
            for (const auto& c : chunks) {
                CHECK(c.token_count == tok->count(c.text));
                CHECK(c.token_count <= budget);
                CHECK(!c.text.empty());
                joined += c.text;
            }
            REQUIRE(joined == doc);
        }
    }
}

TEST_CASE("chunking is deterministic") {
    Rng rng(29);
    const std::string doc = random_document(rng, 300);
    const auto tok = make_tokenizer("whitespace");
    const auto a = chunk_document(doc, 40, *tok);
    const auto b = chunk_document(doc, 40, *tok);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("chunk boundaries respect the priority order") {
    const auto tok = make_tokenizer("whitespace");

    // A paragraph break inside the window wins over later sentence ends.
    const std::string doc = "one two three.\n\nfour five. six seven eight nine ten";
    const auto chunks = chunk_document(doc, 6, *tok);
    REQUIRE(chunks.size() >= 2);
    CHECK(chunks[0].text == "one two three.\n\n");

    // With no paragraph break, the last sentence end inside the window wins.
    const std::string doc2 = "one two. three four five six seven";
    const auto chunks2 = chunk_document(doc2, 4, *tok);
    REQUIRE(chunks2.size() >= 2);
    CHECK(chunks2[0].text == "one two. ");

    // A single unbroken word longer than the budget still fits as one token.
    const std::string doc3(100, 'x');
    const auto chunks3 = chunk_document(doc3, 1, *tok);
    REQUIRE(chunks3.size() == 1);
    CHECK(chunks3[0].text == doc3);
}

TEST_CASE("golden chunking fixture stays stable") {
    const std::string fixture_dir = MEMREREAD_FIXTURES_DIR;
    const auto doc = read_file(fixture_dir + "/golden_doc.txt");
    const auto expected = nlohmann::json::parse(read_file(fixture_dir + "/golden_chunks.json"));
    const auto tok = make_tokenizer("whitespace");
    const auto chunks = chunk_document(doc, 24, *tok);
    REQUIRE(chunks.size() == expected.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        CHECK(chunks[i].text == expected[i]["text"].get<std::string>());
        CHECK(chunks[i].token_count == expected[i]["token_count"].get<std::size_t>());
    }
}

TEST_CASE("truncate_to_tokens caps generation length") {
    const auto tok = make_tokenizer("whitespace");
    CHECK(truncate_to_tokens("a b c d e", 3, *tok) == "a b c ");
    CHECK(truncate_to_tokens("a b", 10, *tok) == "a b");
    CHECK(tok->count(truncate_to_tokens("a b c d e", 0, *tok)) == 0);
}
