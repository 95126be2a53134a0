#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "occ/pooling.hpp"

namespace occ {

// Semantic voxel labels; x-major with z fastest: index = (x * ny + y) * nz + z.
// Labels below num_classes are semantic classes, `free_label` marks empty
// space and must be >= num_classes.
struct LabeledVoxelGrid {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  std::uint8_t free_label = 17;
  std::uint8_t num_classes = 17;
  std::vector<std::uint8_t> labels;

  static LabeledVoxelGrid filled(int nx, int ny, int nz, std::uint8_t num_classes,
                                 std::uint8_t free_label, std::uint8_t label);
  static LabeledVoxelGrid empty(int nx, int ny, int nz, std::uint8_t num_classes,
                                std::uint8_t free_label) {
    return filled(nx, ny, nz, num_classes, free_label, free_label);
  }

  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(x) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(nz) +
           static_cast<std::size_t>(z);
  }
  std::uint8_t& at(int x, int y, int z) { return labels[index(x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return labels[index(x, y, z)]; }
  bool is_occupied(std::uint8_t label) const { return label != free_label; }
  std::size_t voxel_count() const { return labels.size(); }

  void validate() const;
  bool same_layout(const LabeledVoxelGrid& other) const;
};

// counts[j * nz + z]: voxels of class j in height bin z + 1.
struct HeightClassHistogram {
  int num_classes = 0;
  int nz = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(int cls, int z) const {
    return counts[static_cast<std::size_t>(cls) * static_cast<std::size_t>(nz) + static_cast<std::size_t>(z)];
  }
  std::uint64_t total() const;
  std::uint64_t class_total(int cls) const;
  std::uint64_t layer_total(int z) const;
};

// Throws DimensionError when the grids do not share a layout.
HeightClassHistogram class_height_histogram(std::span<const LabeledVoxelGrid> grids);

// cdf[z] = fraction of occupied voxels with bin <= z + 1. Throws
// EmptyDataError on an empty histogram.
std::vector<double> height_cdf(const HeightClassHistogram& hist);

// How each subspace's entropy is weighted.
//  kOccupied: by its share of the grid's occupied voxels. The sum is then the
//             conditional entropy H(class | subspace) and never increases when
//             a scheme is refined.
//  kVolume:   by its share of the grid volume (s_k / s_vox as cell counts).
enum class SubspaceWeighting { kOccupied, kVolume };

struct EntropyOptions {
  SubspaceWeighting weighting = SubspaceWeighting::kOccupied;
  int threads = 1;
};

// Weighted average, in bits, of within-subspace class entropies, averaged
// over grids. Free voxels are not counted; 0 log 0 = 0 and subspaces without
// occupied voxels contribute 0. Throws EmptyDataError if a grid has no
// occupied voxel and ValidationError if the scheme does not fit the grid.
double weighted_entropy(std::span<const LabeledVoxelGrid> grids, const DecouplingScheme& scheme,
                        EntropyOptions options = {});

// Single-grid term of weighted_entropy.
double grid_entropy(const LabeledVoxelGrid& grid, const DecouplingScheme& scheme,
                    SubspaceWeighting weighting = SubspaceWeighting::kOccupied);

// Decoupling schemes evaluated in the reference entropy table.
std::vector<DecouplingScheme> reference_entropy_schemes();

struct EntropyRow {
  DecouplingScheme scheme;
  double entropy = 0.0;
};

void write_histogram_csv(std::ostream& out, const HeightClassHistogram& hist);
void write_cdf_csv(std::ostream& out, std::span<const double> cdf);
void write_entropy_csv(std::ostream& out, std::span<const EntropyRow> rows);

}  // namespace occ
