#include "tagforge/kernels.hpp"

#include <cmath>
#include <string>

namespace tagforge::kernels {

namespace {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_ngram(const char* p, std::size_t len, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ splitmix64(seed);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 1099511628211ULL;
  }
  return splitmix64(h);
}

// One text -> one unit row. Identical inputs produce bit-identical rows on
// any platform: integer hashing, fixed accumulation order, IEEE doubles.
void embed_one(const std::string& text, std::uint64_t seed, std::size_t dim, double* row) {
  for (std::size_t d = 0; d < dim; ++d) row[d] = 0.0;
  const std::string padded = "^" + text + "$";
  const std::size_t n = padded.size();
  for (std::size_t i = 0; i + 3 <= n; ++i) {
    const std::uint64_t h = hash_ngram(padded.data() + i, 3, seed);
    const std::size_t bucket = static_cast<std::size_t>(h % dim);
    row[bucket] += (h >> 63) ? 1.0 : -1.0;
  }
  double sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) sq += row[d] * row[d];
  if (sq == 0.0) {
    row[0] = 1.0;
    return;
  }
  const double inv = 1.0 / std::sqrt(sq);
  for (std::size_t d = 0; d < dim; ++d) row[d] *= inv;
}

void neighbors_row(const Matrix& m, double eps, std::size_t i,
                   std::vector<std::int32_t>& out) {
  out.clear();
  const double* a = m.row(i);
  for (std::size_t j = 0; j < m.rows; ++j) {
    if (j == i) {
      out.push_back(static_cast<std::int32_t>(j));
      continue;
    }
    const double* b = m.row(j);
    double dot = 0.0;
    for (std::size_t d = 0; d < m.cols; ++d) dot += a[d] * b[d];
    if (1.0 - dot <= eps) out.push_back(static_cast<std::int32_t>(j));
  }
}

}  // namespace

std::vector<std::vector<std::int32_t>> cosine_neighbors_serial(const Matrix& m, double eps) {
  std::vector<std::vector<std::int32_t>> result(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) neighbors_row(m, eps, i, result[i]);
  return result;
}

std::vector<std::vector<std::int32_t>> cosine_neighbors_parallel(const Matrix& m, double eps) {
  std::vector<std::vector<std::int32_t>> result(m.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.rows); ++i) {
    neighbors_row(m, eps, static_cast<std::size_t>(i), result[static_cast<std::size_t>(i)]);
  }
  return result;
}

void embed_ngrams_serial(const std::vector<std::string>& texts, std::uint64_t seed,
                         std::size_t dim, Matrix& out) {
  out.rows = texts.size();
  out.cols = dim;
  out.data.assign(out.rows * dim, 0.0);
  for (std::size_t i = 0; i < texts.size(); ++i) embed_one(texts[i], seed, dim, out.row(i));
}

void embed_ngrams_parallel(const std::vector<std::string>& texts, std::uint64_t seed,
                           std::size_t dim, Matrix& out) {
  out.rows = texts.size();
  out.cols = dim;
  out.data.assign(out.rows * dim, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(texts.size()); ++i) {
    embed_one(texts[static_cast<std::size_t>(i)], seed, dim,
              out.row(static_cast<std::size_t>(i)));
  }
}

}  // namespace tagforge::kernels
