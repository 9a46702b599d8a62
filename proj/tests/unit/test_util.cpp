#include "doctest.h"
#include "memreread/util.hpp"

using namespace memreread;

TEST_CASE("trim strips surrounding whitespace") {
    CHECK(trim("  a b \n") == "a b");
    CHECK(trim("") == "");
    CHECK(trim(" \t\n") == "");
}

TEST_CASE("replace_all handles repeated and absent patterns") {
    CHECK(replace_all("a{x}b{x}", "{x}", "1") == "a1b1");
    CHECK(replace_all("abc", "zz", "1") == "abc");
    CHECK(replace_all("aaa", "a", "aa") == "aaaaaa");
}

TEST_CASE("rng is deterministic and bounded") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_int(3, 10);
        CHECK(x == b.next_int(3, 10));
        CHECK(x >= 3);
        CHECK(x <= 10);
    }
    Rng c(7);
    for (int i = 0; i < 100; ++i) {
        const double d = c.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
}

TEST_CASE("sample_distinct yields k distinct values") {
    Rng rng(1);
    auto picks = rng.sample_distinct(20, 8);
    REQUIRE(picks.size() == 8);
    std::sort(picks.begin(), picks.end());
    CHECK(std::unique(picks.begin(), picks.end()) == picks.end());
    for (auto p : picks) CHECK(p < 20);
}

TEST_CASE("derive_seed separates by part") {
    const auto a = derive_seed(5, std::string_view("alpha"));
    const auto b = derive_seed(5, std::string_view("beta"));
    CHECK(a != b);
    CHECK(derive_seed(5, std::string_view("alpha")) == a);
    CHECK(derive_seed(derive_seed(1, std::uint64_t{2}), std::uint64_t{3}) !=
          derive_seed(derive_seed(1, std::uint64_t{3}), std::uint64_t{2}));
}

TEST_CASE("utf8_floor never lands inside a sequence") {
    const std::string s = "a\xE2\x82\xAC z";  // euro sign is 3 bytes
    CHECK(utf8_floor(s, 0) == 0);
    CHECK(utf8_floor(s, 1) == 1);
    CHECK(utf8_floor(s, 2) == 1);
    CHECK(utf8_floor(s, 3) == 1);
    CHECK(utf8_floor(s, 4) == 4);
    CHECK(utf8_floor(s, 99) == s.size());
}
