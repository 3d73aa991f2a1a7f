#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "tire/grid.hpp"
#include "tire/rng.hpp"

using namespace tire;

namespace {

oracle::CellSet as_set(const std::vector<PixelCoord>& v) {
  return oracle::CellSet(v.begin(), v.end());
}

}  // namespace

TEST_CASE("los_pixels axis-aligned segment") {
  const auto cells = los_pixels({2, 2}, {2, 4}, 8, 8);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0] == PixelCoord{2, 3});
}

TEST_CASE("los_pixels zero-length segment") {
  CHECK(los_pixels({2, 2}, {2, 2}, 8, 8).empty());
}

TEST_CASE("los_pixels out of bounds") {
  CHECK_THROWS_AS(los_pixels({-1, 0}, {2, 2}, 8, 8), ShapeError);
  CHECK_THROWS_AS(los_pixels({0, 0}, {8, 0}, 8, 8), ShapeError);
}

TEST_CASE("los_pixels (0,0)-(2,1) against the supersampling oracle") {
  const auto cells = as_set(los_pixels({0, 0}, {2, 1}, 8, 8));
  const auto sampled = oracle::supersample_los({0, 0}, {2, 1});
  for (const auto& c : sampled) CHECK(cells.count(c) == 1);
  // This segment has no corner crossings, so the two sets agree exactly.
  CHECK(cells.size() == sampled.size());
}

TEST_CASE("los_pixels corner crossing touches both side cells") {
  const auto cells = as_set(los_pixels({0, 0}, {1, 1}, 4, 4));
  CHECK(cells.count({1, 0}) == 1);
  CHECK(cells.count({0, 1}) == 1);
  CHECK(cells.size() == 2);
}

TEST_CASE("los_pixels symmetry and oracle containment on random pairs") {
  Rng rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const PixelCoord a{rng.below_int(32), rng.below_int(32)};
    const PixelCoord b{rng.below_int(32), rng.below_int(32)};
    const auto fwd = as_set(los_pixels(a, b, 32, 32));
    const auto rev = as_set(los_pixels(b, a, 32, 32));
    REQUIRE(fwd == rev);
    // supercover >= any thin-line rasterization
    for (const auto& c : oracle::supersample_los(a, b, 2000)) {
      REQUIRE(fwd.count(c) == 1);
    }
  }
}

TEST_CASE("los_pixels equals the exact geometric supercover") {
  Rng rng(77);
  for (int trial = 0; trial < 400; ++trial) {
    const PixelCoord a{rng.below_int(16), rng.below_int(16)};
    const PixelCoord b{rng.below_int(16), rng.below_int(16)};
    CHECK(as_set(los_pixels(a, b, 16, 16)) == oracle::exact_supercover(a, b, 16, 16));
  }
}

TEST_CASE("max_normalize examples") {
  const Grid g(2, 1, {0.2, 0.4});
  const Grid n = max_normalize(g);
  CHECK(n(0, 0) == doctest::Approx(0.5));
  CHECK(n(1, 0) == 1.0);

  const Grid one(1, 1, {1.0});
  CHECK(max_normalize(one)(0, 0) == 1.0);

  CHECK_THROWS_AS(max_normalize(Grid(2, 1, {0.0, 0.0})), NumericError);
  CHECK_THROWS_AS(max_normalize(Grid(2, 1, {-3.0, -1.0})), NumericError);
}

TEST_CASE("max_normalize is idempotent bit-exactly") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Grid g(6, 5);
    for (auto& v : g.values()) v = rng.uniform(0.0, 3.0);
    g.values()[rng.below(g.size())] = 3.5;  // ensure positive max
    const Grid once = max_normalize(g);
    const Grid twice = max_normalize(once);
    REQUIRE(once.values() == twice.values());
    CHECK(once.max_value() == 1.0);
  }
}

TEST_CASE("euclidean_distance") {
  CHECK(euclidean_distance({0, 0}, {3, 4}) == 5.0);
  CHECK(euclidean_distance({1, 1}, {1, 1}) == 0.0);
  CHECK(euclidean_distance({0, 0}, {1, 1}) == doctest::Approx(1.4142135623730951));
  CHECK(euclidean_distance({0, 0}, {1, 1}) == euclidean_distance({1, 1}, {0, 0}));
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(Grid(0, 3), ShapeError);
  CHECK_THROWS_AS(Grid(2, 2, {1.0, 2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(Grid(1, 1, {std::nan("")}), NumericError);
  const Grid g(3, 2, 0.25);
  CHECK(g.size() == 6);
  CHECK(g.in_bounds({2, 1}));
  CHECK_FALSE(g.in_bounds({3, 0}));
  CHECK_THROWS_AS(g.at({3, 0}), ShapeError);
}

TEST_CASE("binary grid basics") {
  BinaryGrid b(4, 4);
  b.set(1, 2, true);
  CHECK(b.get(1, 2) == 1);
  CHECK(b.count_ones() == 1);
  const Grid g = b.to_grid();
  CHECK(g(1, 2) == 1.0);
  CHECK(g(0, 0) == 0.0);
  const BinaryGrid back = BinaryGrid::from_grid(g);
  CHECK(back.get(1, 2) == 1);
  CHECK(back.count_ones() == 1);
}
