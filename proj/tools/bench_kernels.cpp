#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "tagforge/kernels.hpp"

namespace {

using tagforge::kernels::Matrix;

Matrix random_unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix m;
  m.rows = rows;
  m.cols = cols;
  m.data.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double norm = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = gauss(rng);
      m.data[i * cols + j] = v;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < cols; ++j) m.data[i * cols + j] /= norm;
  }
  return m;
}

std::vector<std::string> synthetic_tags(std::size_t count) {
  std::vector<std::string> tags;
  tags.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    tags.push_back("synthetic tag phrase number " + std::to_string(i));
  }
  return tags;
}

void BM_CosineNeighborsSerial(benchmark::State& state) {
  const Matrix m = random_unit_rows(static_cast<std::size_t>(state.range(0)), 64, 7);
  for (auto _ : state) {
    auto result = tagforge::kernels::cosine_neighbors_serial(m, 0.05);
    benchmark::DoNotOptimize(result);
  }
}

void BM_CosineNeighborsParallel(benchmark::State& state) {
  const Matrix m = random_unit_rows(static_cast<std::size_t>(state.range(0)), 64, 7);
  for (auto _ : state) {
    auto result = tagforge::kernels::cosine_neighbors_parallel(m, 0.05);
    benchmark::DoNotOptimize(result);
  }
}

void BM_EmbedNgramsSerial(benchmark::State& state) {
  const auto tags = synthetic_tags(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Matrix out;
    tagforge::kernels::embed_ngrams_serial(tags, 1, 64, out);
    benchmark::DoNotOptimize(out.data);
  }
}

void BM_EmbedNgramsParallel(benchmark::State& state) {
  const auto tags = synthetic_tags(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    Matrix out;
    tagforge::kernels::embed_ngrams_parallel(tags, 1, 64, out);
    benchmark::DoNotOptimize(out.data);
  }
}

}  // namespace

BENCHMARK(BM_CosineNeighborsSerial)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_CosineNeighborsParallel)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(BM_EmbedNgramsSerial)->Arg(1024)->Arg(8192);
BENCHMARK(BM_EmbedNgramsParallel)->Arg(1024)->Arg(8192);

BENCHMARK_MAIN();
