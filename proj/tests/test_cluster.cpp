#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tagforge/cluster.hpp"
#include "tagforge/error.hpp"
#include "tagforge/util.hpp"

using namespace tagforge;

namespace {

std::vector<double> angle_vec(double degrees) {
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  return {std::cos(rad), std::sin(rad)};
}

// Random unit vectors drawn around shared centers, plus stragglers, so the
// oracle comparison sees clusters, borders, and noise.
std::map<std::string, std::vector<double>> random_embeddings(std::mt19937_64& rng,
                                                             std::size_t count,
                                                             std::size_t dims,
                                                             std::size_t centers) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> base(centers, std::vector<double>(dims));
  for (auto& c : base) {
    for (auto& v : c) v = gauss(rng);
  }
  std::map<std::string, std::vector<double>> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v(dims);
    double norm_sq = 0.0;
    const bool outlier = uniform_below(rng, 5) == 0;
    const auto& center = base[uniform_below(rng, centers)];
    for (std::size_t d = 0; d < dims; ++d) {
      v[d] = outlier ? gauss(rng) : center[d] + 0.2 * gauss(rng);
      norm_sq += v[d] * v[d];
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) x *= inv;
    char name[32];
    std::snprintf(name, sizeof(name), "tag-%04zu", i);
    out[name] = std::move(v);
  }
  return out;
}

}  // namespace

TEST_CASE("semantic_cluster matches the brute-force density oracle") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t count = 20 + uniform_below(rng, 80);
    auto embeddings = random_embeddings(rng, count, 8, 2 + uniform_below(rng, 4));
    ClusterConfig config;
    config.eps = 0.01 + 0.49 * (static_cast<double>(uniform_below(rng, 1000)) / 1000.0);
    config.min_pts = static_cast<int>(1 + uniform_below(rng, 3));
    config.parallel_neighbors = (trial % 2 == 0);
    const auto got = semantic_cluster(embeddings, config);
    const auto want = oracle::brute_cluster(embeddings, config.eps, config.min_pts);
    CHECK(got == want);
  }
}

TEST_CASE("two identical vectors form one cell at min_pts 2") {
  std::map<std::string, std::vector<double>> e;
  e["alpha"] = {1, 0};
  e["beta"] = {1, 0};
  e["gamma"] = {0, 1};
  const auto cells = semantic_cluster(e, {0.0, 2, false});
  REQUIRE(cells.size() == 2);
  CHECK(cells[0] == std::vector<std::string>{"alpha", "beta"});
  CHECK(cells[1] == std::vector<std::string>{"gamma"});
}

TEST_CASE("density-connection chains through core points") {
  // Three directions at 0, 25 and 50 degrees with eps covering only adjacent
  // pairs: the middle point is core and stitches the ends together.
  std::map<std::string, std::vector<double>> e;
  e["left"] = angle_vec(0);
  e["mid"] = angle_vec(25);
  e["right"] = angle_vec(50);
  ClusterConfig config;
  config.eps = 0.2;  // 1-cos(25deg) ~ 0.094 <= eps, 1-cos(50deg) ~ 0.357 > eps
  config.min_pts = 3;
  config.parallel_neighbors = false;
  const auto cells = semantic_cluster(e, config);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0] == std::vector<std::string>{"left", "mid", "right"});
  CHECK(cells == oracle::brute_cluster(e, config.eps, config.min_pts));
}

TEST_CASE("contested border joins the cluster with the smallest core tag") {
  // Two clusters with one border point ("shared") adjacent to a core on each
  // side. Angles: a-side at 0 (two copies) and 25; shared at 50; c-side at 75
  // and 100 (two copies). With min_pts 4, only the 25- and 75-degree points
  // are core; "shared" is border to both.
  auto build = [&](const std::string& a_prefix, const std::string& c_prefix) {
    std::map<std::string, std::vector<double>> e;
    e[a_prefix + "1"] = angle_vec(0);
    e[a_prefix + "2"] = angle_vec(0);
    e[a_prefix + "3"] = angle_vec(25);
    e["shared"] = angle_vec(50);
    e[c_prefix + "1"] = angle_vec(75);
    e[c_prefix + "2"] = angle_vec(100);
    e[c_prefix + "3"] = angle_vec(100);
    return e;
  };
  ClusterConfig config;
  config.eps = 0.2;
  config.min_pts = 4;
  config.parallel_neighbors = false;

  // Case 1: the a-side core tag ("a3") sorts before the c-side core ("c1"),
  // so the shared border lands with the a cluster.
  {
    auto e = build("a", "c");
    const auto cells = semantic_cluster(e, config);
    CHECK(cells == oracle::brute_cluster(e, config.eps, config.min_pts));
    REQUIRE(cells.size() == 2);
    CHECK(cells[0] == std::vector<std::string>{"a1", "a2", "a3", "shared"});
    CHECK(cells[1] == std::vector<std::string>{"c1", "c2", "c3"});
  }
  // Case 2: renaming the a side to z reverses the tie; the border defects.
  {
    auto e = build("z", "c");
    const auto cells = semantic_cluster(e, config);
    CHECK(cells == oracle::brute_cluster(e, config.eps, config.min_pts));
    REQUIRE(cells.size() == 2);
    CHECK(cells[0] == std::vector<std::string>{"c1", "c2", "c3", "shared"});
    CHECK(cells[1] == std::vector<std::string>{"z1", "z2", "z3"});
  }
}

TEST_CASE("lone points stay as singleton cells") {
  std::map<std::string, std::vector<double>> e;
  e["x"] = {1, 0, 0};
  e["y"] = {0, 1, 0};
  e["z"] = {0, 0, 1};
  const auto cells = semantic_cluster(e, {0.1, 2, false});
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == std::vector<std::string>{"x"});
  CHECK(cells[1] == std::vector<std::string>{"y"});
  CHECK(cells[2] == std::vector<std::string>{"z"});
}

TEST_CASE("min_pts 1 makes every point core") {
  std::map<std::string, std::vector<double>> e;
  e["solo"] = {1, 0};
  e["pair1"] = {0, 1};
  e["pair2"] = {0, 1};
  const auto cells = semantic_cluster(e, {0.0, 1, false});
  CHECK(cells == oracle::brute_cluster(e, 0.0, 1));
  REQUIRE(cells.size() == 2);
  CHECK(cells[0] == std::vector<std::string>{"pair1", "pair2"});
  CHECK(cells[1] == std::vector<std::string>{"solo"});
}

TEST_CASE("empty input clusters to nothing") {
  std::map<std::string, std::vector<double>> e;
  CHECK(semantic_cluster(e, {0.05, 2, false}).empty());
}

TEST_CASE("argument validation") {
  std::map<std::string, std::vector<double>> e;
  e["a"] = {1, 0};
  CHECK_THROWS_AS(semantic_cluster(e, {-0.1, 2, false}), ArgumentError);
  CHECK_THROWS_AS(semantic_cluster(e, {0.05, 0, false}), ArgumentError);
  e["bad"] = {};
  CHECK_THROWS_AS(semantic_cluster(e, {0.05, 2, false}), ArgumentError);
  e["bad"] = {1, 0, 0};  // ragged dimensions
  CHECK_THROWS_AS(semantic_cluster(e, {0.05, 2, false}), ArgumentError);
}

TEST_CASE("parallel and serial neighbor paths agree") {
  std::mt19937_64 rng(777);
  auto embeddings = random_embeddings(rng, 150, 8, 3);
  ClusterConfig serial{0.15, 2, false};
  ClusterConfig parallel{0.15, 2, true};
  CHECK(semantic_cluster(embeddings, serial) == semantic_cluster(embeddings, parallel));
}
