#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tagforge/kernels.hpp"
#include "tagforge/util.hpp"

using namespace tagforge::kernels;

namespace {

// Random unit rows drawn around a few shared directions so that neighbor
// lists are non-trivial at small eps.
Matrix random_unit_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                          std::size_t centers) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> base(centers, std::vector<double>(cols));
  for (auto& c : base) {
    for (auto& v : c) v = gauss(rng);
  }
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.data.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& center = base[tagforge::uniform_below(rng, centers)];
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < cols; ++d) {
      const double v = center[d] + 0.15 * gauss(rng);
      m.data[i * cols + d] = v;
      norm_sq += v * v;
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (std::size_t d = 0; d < cols; ++d) m.data[i * cols + d] *= inv;
  }
  return m;
}

}  // namespace

TEST_CASE("cosine_neighbors serial matches a straight quadratic scan") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix m = random_unit_matrix(rng, 40 + trial * 17, 8, 3);
    const double eps = 0.05 + 0.1 * trial;
    const auto got = cosine_neighbors_serial(m, eps);
    REQUIRE(got.size() == m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
      std::vector<std::int32_t> expected;
      for (std::size_t j = 0; j < m.rows; ++j) {
        double dot = 0.0;
        for (std::size_t d = 0; d < m.cols; ++d) dot += m.row(i)[d] * m.row(j)[d];
        if (1.0 - dot <= eps) expected.push_back(static_cast<std::int32_t>(j));
      }
      CHECK(got[i] == expected);
    }
  }
}

TEST_CASE("cosine_neighbors parallel is bit-identical to serial") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 4; ++trial) {
    const Matrix m = random_unit_matrix(rng, 120, 16, 4);
    const double eps = 0.02 + 0.12 * trial;
    CHECK(cosine_neighbors_parallel(m, eps) == cosine_neighbors_serial(m, eps));
  }
}

TEST_CASE("cosine_neighbors always includes self, even at eps 0") {
  std::mt19937_64 rng(5);
  const Matrix m = random_unit_matrix(rng, 30, 8, 2);
  const auto lists = cosine_neighbors_serial(m, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    bool found = false;
    for (auto j : lists[i]) {
      if (j == static_cast<std::int32_t>(i)) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("duplicate rows are mutual neighbors at eps 0") {
  Matrix m;
  m.rows = 3;
  m.cols = 4;
  m.data = {1, 0, 0, 0, /**/ 1, 0, 0, 0, /**/ 0, 1, 0, 0};
  const auto lists = cosine_neighbors_serial(m, 0.0);
  CHECK(lists[0] == std::vector<std::int32_t>{0, 1});
  CHECK(lists[1] == std::vector<std::int32_t>{0, 1});
  CHECK(lists[2] == std::vector<std::int32_t>{2});
}

TEST_CASE("embed_ngrams is deterministic, unit-norm, and seed-sensitive") {
  const std::vector<std::string> texts = {"information retrieval", "for loop", "数学", "", "ab"};
  Matrix a, b;
  embed_ngrams_serial(texts, 7, 32, a);
  embed_ngrams_serial(texts, 7, 32, b);
  CHECK(a.data == b.data);  // bit-identical rerun
  REQUIRE(a.rows == texts.size());
  REQUIRE(a.cols == 32);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double norm_sq = 0.0;
    for (std::size_t d = 0; d < a.cols; ++d) norm_sq += a.row(i)[d] * a.row(i)[d];
    CHECK(std::abs(norm_sq - 1.0) < 1e-12);
  }

  Matrix c;
  embed_ngrams_serial(texts, 8, 32, c);
  CHECK(a.data != c.data);  // a different seed moves the features

  // Same text embeds to the same row regardless of batch position.
  Matrix d;
  embed_ngrams_serial({"for loop", "information retrieval"}, 7, 32, d);
  CHECK(std::vector<double>(d.row(1), d.row(1) + 32) ==
        std::vector<double>(a.row(0), a.row(0) + 32));
}

TEST_CASE("embed_ngrams parallel is bit-identical to serial") {
  std::vector<std::string> texts;
  for (int i = 0; i < 300; ++i) texts.push_back("synthetic tag number " + std::to_string(i));
  Matrix serial, parallel;
  embed_ngrams_serial(texts, 42, 64, serial);
  embed_ngrams_parallel(texts, 42, 64, parallel);
  CHECK(serial.rows == parallel.rows);
  CHECK(serial.cols == parallel.cols);
  CHECK(serial.data == parallel.data);
}

TEST_CASE("similar strings land closer than unrelated ones") {
  // Not a tight bound, just the embedding's reason to exist: shared trigrams
  // raise cosine similarity.
  Matrix m;
  embed_ngrams_serial({"information retrieval", "information retrievals", "quantum cooking"}, 1,
                      64, m);
  auto dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t d = 0; d < m.cols; ++d) s += m.row(i)[d] * m.row(j)[d];
    return s;
  };
  CHECK(dot(0, 1) > dot(0, 2));
}
