#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tagforge::kernels {

// Dense row-major matrix of unit-norm embedding rows.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }
};

// Per-row lists of indices j with cosine distance(i, j) <= eps, ascending,
// self included. Rows must be unit vectors. The parallel variant distributes
// whole rows across threads, so its output is bit-identical to the serial
// reference; the serial one is kept as the testing baseline.
std::vector<std::vector<std::int32_t>> cosine_neighbors_serial(const Matrix& m, double eps);
std::vector<std::vector<std::int32_t>> cosine_neighbors_parallel(const Matrix& m, double eps);

// Seeded character-trigram feature hashing into `dim` buckets with +/-1
// signs, then L2 normalization. Inputs are embedded independently, so the
// parallel variant is bit-identical to the serial reference.
void embed_ngrams_serial(const std::vector<std::string>& texts, std::uint64_t seed,
                         std::size_t dim, Matrix& out);
void embed_ngrams_parallel(const std::vector<std::string>& texts, std::uint64_t seed,
                           std::size_t dim, Matrix& out);

}  // namespace tagforge::kernels
