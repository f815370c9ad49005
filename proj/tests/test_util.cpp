#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tagforge/error.hpp"
#include "tagforge/util.hpp"
#include "test_support.hpp"

using namespace tagforge;

TEST_CASE("sha256_hex matches published vectors") {
  // FIPS 180-2 test vectors.
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("ascii_lower touches only ASCII letters") {
  CHECK(ascii_lower("AbC") == "abc");
  CHECK(ascii_lower("A1!") == "a1!");
  CHECK(ascii_lower("\xC3\x84" "bc") == "\xC3\x84" "bc");  // UTF-8 bytes pass through
}

TEST_CASE("trim and is_blank") {
  CHECK(trim("  x  ") == "x");
  CHECK(trim("\t a b \n") == "a b");
  CHECK(trim("") == "");
  CHECK(trim(" \t\r\n") == "");
  CHECK(is_blank(""));
  CHECK(is_blank(" \t"));
  CHECK(!is_blank(" x "));
}

TEST_CASE("read_file and write_file round-trip and error") {
  testsup::TempDir tmp;
  const std::string path = tmp.path("blob.bin");
  const std::string content = "line1\nline2 with \xE2\x9C\x93 unicode\n";
  write_file(path, content);
  CHECK(read_file(path) == content);
  CHECK_THROWS_AS(read_file(tmp.path("missing.txt")), IoError);
  // Overwrite is atomic-by-rename; the new content fully replaces the old.
  write_file(path, "short");
  CHECK(read_file(path) == "short");
}

TEST_CASE("uniform_below stays in range and is deterministic") {
  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t n = 1 + (static_cast<std::uint64_t>(i) % 97);
    const std::uint64_t x = uniform_below(a, n);
    CHECK(x < n);
    CHECK(x == uniform_below(b, n));
  }
  std::mt19937_64 c(7);
  CHECK(uniform_below(c, 1) == 0);
}

TEST_CASE("uniform_below is unbiased across a non-power-of-two range") {
  // Chi-square over 10 bins, 20000 draws, fixed seed. Critical value for
  // 9 degrees of freedom at p = 0.001 is 27.88.
  std::mt19937_64 rng(2024);
  std::vector<double> counts(10, 0.0);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) counts[uniform_below(rng, 10)] += 1.0;
  const double expected = draws / 10.0;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 27.88);
}

TEST_CASE("sample_indices draws k distinct indices uniformly") {
  std::mt19937_64 rng(11);
  auto picks = sample_indices(rng, 10, 4);
  CHECK(picks.size() == 4);
  std::set<std::size_t> unique(picks.begin(), picks.end());
  CHECK(unique.size() == 4);
  for (auto p : picks) CHECK(p < 10);

  // k == n is a full shuffle (a permutation).
  std::mt19937_64 rng2(11);
  auto all = sample_indices(rng2, 6, 6);
  std::set<std::size_t> perm(all.begin(), all.end());
  CHECK(perm.size() == 6);

  // k == 0 draws nothing.
  std::mt19937_64 rng3(11);
  CHECK(sample_indices(rng3, 5, 0).empty());
}

TEST_CASE("sample_indices inclusion frequencies are uniform") {
  // Each of 8 indices should appear in a 3-of-8 draw with probability 3/8.
  // Chi-square over inclusion counts, 7 dof, p = 0.001 critical 24.32.
  std::mt19937_64 rng(99);
  std::vector<double> inclusion(8, 0.0);
  const int draws = 24000;
  for (int i = 0; i < draws; ++i) {
    for (auto idx : sample_indices(rng, 8, 3)) inclusion[idx] += 1.0;
  }
  const double expected = draws * 3.0 / 8.0;
  double chi2 = 0.0;
  for (double c : inclusion) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 24.32);
}

TEST_CASE("format_double is compact and locale-independent") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.3) == "0.3");
  CHECK(format_double(2.0 / 3.0) == "0.666666666667");
  CHECK(format_double(-4.5) == "-4.5");
}

TEST_CASE("find_json_array_end balances brackets through strings") {
  const std::string s = R"(prose [1, "a ] b", [2, 3]] tail)";
  const std::size_t start = s.find('[');
  const std::size_t end = find_json_array_end(s, start);
  CHECK(s.substr(start, end - start) == R"([1, "a ] b", [2, 3]])");

  CHECK(find_json_array_end("[1, 2", 0) == std::string::npos);
  CHECK(find_json_array_end(R"(["\"]"])", 0) != std::string::npos);
}
