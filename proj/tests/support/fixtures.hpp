#pragma once

#include "occ/analysis.hpp"

namespace occ::testing {

// Classes 0..2, free label 3.
struct HandIouFixture {
  LabeledVoxelGrid gt = LabeledVoxelGrid::empty(4, 4, 4, 3, 3);
  LabeledVoxelGrid pred = LabeledVoxelGrid::empty(4, 4, 4, 3, 3);

  HandIouFixture() {
    // gt: class 0 fills the x = 0 slab (16), class 1 the x = 1, y < 2 block (8).
    // pred: class 0 on x = 0, y < 3 (12) plus one stray voxel, class 1 on the
    // whole x = 1 slab (16), class 2 on one voxel.
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) {
        gt.at(0, y, z) = 0;
        if (y < 2) gt.at(1, y, z) = 1;
        if (y < 3) pred.at(0, y, z) = 0;
        pred.at(1, y, z) = 1;
      }
    pred.at(3, 3, 3) = 0;
    pred.at(2, 0, 0) = 2;
  }
};

// Hand counts for HandIouFixture: class 0 has 12 shared voxels out of
// 16 + 13 - 12 = 17, class 1 has 8 of 16, class 2 has 0 of 1.
inline constexpr double kHandIou[3] = {12.0 / 17.0, 8.0 / 16.0, 0.0};

}  // namespace occ::testing
