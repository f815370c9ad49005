#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tagforge {

// Hex-encoded SHA-256 of a byte string.
std::string sha256_hex(const std::string& data);

// ASCII-only lowercase; bytes >= 0x80 pass through untouched.
std::string ascii_lower(const std::string& s);

// Strips leading/trailing ASCII whitespace.
std::string trim(const std::string& s);

// True if s consists only of ASCII whitespace (or is empty).
bool is_blank(const std::string& s);

// Reads a whole file; throws IoError if unreadable.
std::string read_file(const std::string& path);

// Writes a whole file atomically (tmp + rename); throws IoError on failure.
void write_file(const std::string& path, const std::string& content);

// Uniform integer in [0, n) from a fixed generator, bias-free via rejection
// sampling. mt19937_64 + this routine is the documented reproducible sampler;
// std::uniform_int_distribution is implementation-defined and never used.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

// First k elements of a Fisher-Yates shuffle of [0, n); deterministic in rng.
std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k);

// Formats a double with enough digits to round-trip, locale-independent.
std::string format_double(double v);

// End (one past ']') of the balanced JSON array opening at `start`, honoring
// string literals and escapes; npos if unbalanced. Used to lift JSON arrays
// out of prose-wrapped model responses.
std::size_t find_json_array_end(const std::string& s, std::size_t start);

}  // namespace tagforge
