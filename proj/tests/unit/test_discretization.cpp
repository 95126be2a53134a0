#include <cmath>

#include "doctest.h"
#include "occ/discretization.hpp"
#include "occ/error.hpp"
#include "support/random.hpp"

using namespace occ;
using occ::testing::Rng;

TEST_CASE("default grid") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  CHECK(g.nx == 200);
  CHECK(g.ny == 200);
  CHECK(g.nz == 16);
  CHECK(g.num_classes == 17);
  CHECK(g.voxel_size == 0.4);
  CHECK(g.cell_count() == 640000u);
  CHECK_NOTHROW(g.validate());

  const GridSpec small = GridSpec::make(0, 8, 0, 8, 0, 4, 1.0, 5);
  CHECK(small.nx == 8);
  CHECK(small.nz == 4);
  CHECK_THROWS_AS(GridSpec::make(0, 8, 0, 8, 0, 4, -1.0, 5), ValidationError);
  CHECK_THROWS_AS(GridSpec::make(0, 8, 0, 8, 4, 0, 1.0, 5), ValidationError);
}

TEST_CASE("height_to_bin hand cases") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  CHECK(height_to_bin(-1.0, g) == HeightBin{1});
  CHECK(height_to_bin(5.39, g) == HeightBin{16});
  CHECK_FALSE(height_to_bin(6.0, g).has_value());
  CHECK_FALSE(height_to_bin(5.4, g).has_value());
  CHECK_FALSE(height_to_bin(-1.0000001, g).has_value());
  CHECK_FALSE(height_to_bin(std::nan(""), g).has_value());
  CHECK(height_to_bin(-0.6, g) == HeightBin{2});
  // Just below the top edge, the quotient rounds up to nz; it is still bin 16.
  CHECK(height_to_bin(std::nextafter(5.4, 0.0), g) == HeightBin{16});
}

TEST_CASE("voxel_of uses half-open cells") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  CHECK(voxel_of({0, 0, 2.5}, g) == VoxelIndex{100, 100, 8});
  CHECK(voxel_of({-40, -40, -1}, g) == VoxelIndex{0, 0, 0});
  CHECK_FALSE(voxel_of({40, 0, 0}, g).has_value());
  CHECK_FALSE(voxel_of({0, -40.01, 0}, g).has_value());
  CHECK(voxel_of({39.99, 39.99, 5.39}, g) == VoxelIndex{199, 199, 15});
}

TEST_CASE("property: height_to_bin is monotone") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  Rng rng(3);
  int prev = 0;
  for (double z = g.z_min; z < g.z_max; z += 0.0137) {
    const auto b = height_to_bin(z, g);
    REQUIRE(b.has_value());
    CHECK(b->index >= prev);
    CHECK(b->index >= 1);
    CHECK(b->index <= 16);
    prev = b->index;
  }
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(g.z_min, g.z_max);
    const double b = rng.uniform(g.z_min, g.z_max);
    if (a <= b) CHECK(height_to_bin(a, g)->index <= height_to_bin(b, g)->index);
  }
}

TEST_CASE("one_hot_height boundary and invalid pixels") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  ScalarMap m = ScalarMap::empty(2, 1, MapChannel::kHeight);
  m.values[0] = -1.0;
  m.valid[0] = 1;
  const auto v = one_hot_height(m, g);
  CHECK(v.bins == 16);
  CHECK(v.at(0, 0, 0) == 1.0);
  for (int b = 1; b < 16; ++b) CHECK(v.at(b, 0, 0) == 0.0);
  for (int b = 0; b < 16; ++b) CHECK(v.at(b, 0, 1) == 0.0);

  ScalarMap depth = ScalarMap::empty(2, 1, MapChannel::kDepth);
  CHECK_THROWS_AS(one_hot_height(depth, g), ValidationError);
}

TEST_CASE("property: one_hot_height matches pointwise oracle and round trips") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    ScalarMap m = ScalarMap::empty(rng.integer(1, 9), rng.integer(1, 9), MapChannel::kHeight);
    for (std::size_t i = 0; i < m.pixel_count(); ++i) {
      if (rng.coin(0.2)) continue;
      m.values[i] = rng.uniform(-2.0, 6.5);
      m.valid[i] = 1;
    }
    const auto vol = one_hot_height(m, g);
    const auto decoded = argmax_height(vol);
    for (int v = 0; v < m.height; ++v) {
      for (int u = 0; u < m.width; ++u) {
        const auto bin = m.is_valid(u, v) ? height_to_bin(m.value(u, v), g) : std::nullopt;
        for (int b = 0; b < 16; ++b) {
          const double expect = bin && bin->index == b + 1 ? 1.0 : 0.0;
          CHECK(vol.at(b, v, u) == expect);
        }
        if (bin) CHECK(decoded.value(u, v) == bin->index);
      }
    }
  }
}

TEST_CASE("argmax_height ties and brute force") {
  HeightVolume flat = HeightVolume::zeros(3, 2, 16);
  const auto ones = argmax_height(flat);
  CHECK(ones.channel == MapChannel::kHeightBin);
  for (std::size_t i = 0; i < ones.pixel_count(); ++i) {
    CHECK(ones.valid[i] == 1);
    CHECK(ones.values[i] == 1.0);
  }

  HeightVolume tie = HeightVolume::zeros(1, 1, 4);
  tie.at(2, 0, 0) = 3.0;
  tie.at(3, 0, 0) = 3.0;
  CHECK(argmax_height(tie).value(0, 0) == 3.0);

  Rng rng(123);
  HeightVolume r = HeightVolume::zeros(7, 5, 16);
  for (double& x : r.logits) x = static_cast<double>(rng.integer(-3, 3));
  const auto got = argmax_height(r);
  for (int v = 0; v < 5; ++v) {
    for (int u = 0; u < 7; ++u) {
      int best = 0;
      for (int b = 1; b < 16; ++b) {
        if (r.at(b, v, u) > r.at(best, v, u)) best = b;
      }
      CHECK(got.value(u, v) == best + 1);
    }
  }

  r.logits[4] = std::nan("");
  CHECK_THROWS_AS(argmax_height(r), NumericError);
}

TEST_CASE("bin_height_map") {
  const GridSpec g = GridSpec::occ3d_nuscenes();
  ScalarMap m = ScalarMap::empty(3, 1, MapChannel::kHeight);
  m.values = {0.0, 10.0, -1.0};
  m.valid = {1, 1, 0};
  const auto b = bin_height_map(m, g);
  CHECK(b.channel == MapChannel::kHeightBin);
  CHECK(b.is_valid(0, 0));
  CHECK(b.value(0, 0) == 3.0);
  CHECK_FALSE(b.is_valid(1, 0));
  CHECK_FALSE(b.is_valid(2, 0));

  const auto again = bin_height_map(b, g);
  CHECK(again.values[0] == b.values[0]);
  CHECK(again.valid == b.valid);
}
