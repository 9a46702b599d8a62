#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace memreread {

// ============================================================================
// Errors
// ============================================================================

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Logging
// ============================================================================

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

namespace log {

void set_level(LogLevel level);
LogLevel level();
LogLevel level_from_string(const std::string& name);  // throws ConfigError

void emit(LogLevel level, const char* fmt, ...);

#define MEMREREAD_LOG_FN(name, lvl)                      \
    template <typename... Args>                          \
    inline void name(const char* fmt, Args... args) {    \
        emit(lvl, fmt, args...);                         \
    }

MEMREREAD_LOG_FN(debug, LogLevel::debug)
MEMREREAD_LOG_FN(info, LogLevel::info)
MEMREREAD_LOG_FN(warn, LogLevel::warn)
MEMREREAD_LOG_FN(error, LogLevel::error)

#undef MEMREREAD_LOG_FN

}  // namespace log

// ============================================================================
// Deterministic RNG
//
// Thin splitmix64-based generator. All value mappings are implemented here
// instead of <random> distributions so that outputs are identical across
// platforms and standard libraries.
// ============================================================================

std::uint64_t splitmix64(std::uint64_t& state);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform integer in [lo, hi], inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);

    // Uniform real in [0, 1).
    double next_double();

    // Uniform real in [lo, hi).
    double next_double(double lo, double hi);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct integers from [0, n), in random order.
    std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k);

private:
    std::uint64_t state_;
};

// Mixes an arbitrary list of parts into a single derived seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view part);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t part);

// ============================================================================
// String helpers
// ============================================================================

std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);
std::vector<std::string> split(std::string_view s, char sep);
std::string replace_all(std::string text, std::string_view from, std::string_view to);
std::string to_lower(std::string s);

// Largest byte offset <= pos that does not land inside a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t pos);

// ============================================================================
// File helpers
// ============================================================================

std::string read_file(const std::string& path);                  // throws IoError
void write_file(const std::string& path, std::string_view body); // throws IoError
std::vector<std::string> read_lines(const std::string& path);    // throws IoError

}  // namespace memreread
