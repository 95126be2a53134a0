#pragma once

#include <cstdint>
#include <vector>

#include "occ/analysis.hpp"
#include "occ/keyvalue.hpp"

namespace occ {

// Objects of a class occupy a box whose base sits on bin z_lo and whose top
// lies in [z_lo, z_hi]; footprints are squares-ish boxes with sides in
// [footprint_min, footprint_max] cells.
struct HeightProfile {
  int class_id = 0;
  int z_lo = 1;
  int z_hi = 1;
  int footprint_min = 1;
  int footprint_max = 1;
};

struct SceneRecipe {
  std::uint64_t seed = 0;
  int num_objects = 0;
  int num_grids = 1;
  int nx = 16;
  int ny = 16;
  int nz = 16;
  std::uint8_t num_classes = 17;
  std::uint8_t free_label = 17;
  std::vector<HeightProfile> profiles;

  // Keys: seed, num_objects, num_grids, nx, ny, nz, num_classes, free_label,
  // and repeated `profile=<class>:<z_lo>-<z_hi>:<fp_min>-<fp_max>`.
  static SceneRecipe from_config(const KeyValueFile& config);
  void validate() const;
};

// Grid `index` of the recipe. Same recipe and index -> identical grid on
// every platform (the generator only uses mt19937_64's raw output).
LabeledVoxelGrid synthesize_grid(const SceneRecipe& recipe, int index);
std::vector<LabeledVoxelGrid> synthesize(const SceneRecipe& recipe);

}  // namespace occ
