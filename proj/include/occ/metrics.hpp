#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "occ/analysis.hpp"

namespace occ {

struct IouReport {
  std::vector<std::uint64_t> intersection;
  std::vector<std::uint64_t> union_count;
  // Empty for classes absent from both grids.
  std::vector<std::optional<double>> per_class;
  double miou = 0.0;
};

// Per-class IoU over the semantic classes (free voxels excluded) and their
// mean over classes present in either grid. Throws DimensionError on layout
// mismatch, EmptyDataError when no class is present at all.
IouReport miou(const LabeledVoxelGrid& prediction, const LabeledVoxelGrid& ground_truth);

void write_iou_csv(std::ostream& out, const IouReport& report);

}  // namespace occ
