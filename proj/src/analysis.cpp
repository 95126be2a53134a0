#include "occ/analysis.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "occ/csv.hpp"
#include "occ/error.hpp"
#include "occ/summation.hpp"
#include "parallel.hpp"

namespace occ {

LabeledVoxelGrid LabeledVoxelGrid::filled(int nx, int ny, int nz, std::uint8_t num_classes,
                                          std::uint8_t free_label, std::uint8_t label) {
  LabeledVoxelGrid g;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.num_classes = num_classes;
  g.free_label = free_label;
  g.labels.assign(static_cast<std::size_t>(nx) * ny * nz, label);
  g.validate();
  return g;
}

void LabeledVoxelGrid::validate() const {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw ValidationError("voxel grid dimensions must be positive");
  if (num_classes == 0) throw ValidationError("voxel grid needs at least one class");
  if (free_label < num_classes) throw ValidationError("free label collides with a semantic class id");
  if (labels.size() != static_cast<std::size_t>(nx) * ny * nz) {
    throw DimensionError("label buffer does not match grid " + std::to_string(nx) + "x" + std::to_string(ny) +
                         "x" + std::to_string(nz));
  }
  for (std::uint8_t l : labels) {
    if (l >= num_classes && l != free_label) {
      throw ValidationError("label " + std::to_string(l) + " is neither a class nor the free label");
    }
  }
}

bool LabeledVoxelGrid::same_layout(const LabeledVoxelGrid& o) const {
  return nx == o.nx && ny == o.ny && nz == o.nz && num_classes == o.num_classes && free_label == o.free_label;
}

std::uint64_t HeightClassHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::uint64_t HeightClassHistogram::class_total(int cls) const {
  std::uint64_t t = 0;
  for (int z = 0; z < nz; ++z) t += at(cls, z);
  return t;
}

std::uint64_t HeightClassHistogram::layer_total(int z) const {
  std::uint64_t t = 0;
  for (int j = 0; j < num_classes; ++j) t += at(j, z);
  return t;
}

HeightClassHistogram class_height_histogram(std::span<const LabeledVoxelGrid> grids) {
  if (grids.empty()) throw EmptyDataError("no grids supplied");
  const LabeledVoxelGrid& first = grids.front();
  HeightClassHistogram hist;
  hist.num_classes = first.num_classes;
  hist.nz = first.nz;
  hist.counts.assign(static_cast<std::size_t>(hist.num_classes) * hist.nz, 0);
  for (const auto& g : grids) {
    if (!g.same_layout(first)) throw DimensionError("grids do not share a layout");
    g.validate();
    for (std::size_t i = 0; i < g.labels.size(); ++i) {
      const std::uint8_t l = g.labels[i];
      if (!g.is_occupied(l)) continue;
      const std::size_t z = i % static_cast<std::size_t>(g.nz);
      ++hist.counts[static_cast<std::size_t>(l) * hist.nz + z];
    }
  }
  return hist;
}

std::vector<double> height_cdf(const HeightClassHistogram& hist) {
  const std::uint64_t total = hist.total();
  if (total == 0) throw EmptyDataError("histogram holds no occupied voxels");
  std::vector<double> cdf(static_cast<std::size_t>(hist.nz));
  std::uint64_t running = 0;
  for (int z = 0; z < hist.nz; ++z) {
    running += hist.layer_total(z);
    cdf[static_cast<std::size_t>(z)] = static_cast<double>(running) / static_cast<double>(total);
  }
  return cdf;
}

double grid_entropy(const LabeledVoxelGrid& grid, const DecouplingScheme& scheme, SubspaceWeighting weighting) {
  grid.validate();
  scheme.validate(grid.nz);
  const std::size_t classes = grid.num_classes;
  const std::size_t intervals = scheme.size();

  std::vector<int> interval_of_layer(static_cast<std::size_t>(grid.nz));
  for (int z = 0; z < grid.nz; ++z) interval_of_layer[static_cast<std::size_t>(z)] = scheme.interval_of(z + 1);

  std::vector<std::uint64_t> counts(intervals * classes, 0);
  std::uint64_t occupied = 0;
  for (std::size_t i = 0; i < grid.labels.size(); ++i) {
    const std::uint8_t l = grid.labels[i];
    if (!grid.is_occupied(l)) continue;
    const auto k = static_cast<std::size_t>(interval_of_layer[i % static_cast<std::size_t>(grid.nz)]);
    ++counts[k * classes + l];
    ++occupied;
  }
  if (occupied == 0) throw EmptyDataError("grid has no occupied voxels");

  CompensatedSum total;
  for (std::size_t k = 0; k < intervals; ++k) {
    std::uint64_t in_subspace = 0;
    for (std::size_t j = 0; j < classes; ++j) in_subspace += counts[k * classes + j];
    if (in_subspace == 0) continue;
    double inner = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      const std::uint64_t q = counts[k * classes + j];
      if (q == 0) continue;
      const double p = static_cast<double>(q) / static_cast<double>(in_subspace);
      inner += p * std::log2(p);
    }
    const double share = weighting == SubspaceWeighting::kOccupied
                             ? static_cast<double>(in_subspace) / static_cast<double>(occupied)
                             : static_cast<double>(scheme[k].size()) / static_cast<double>(grid.nz);
    total.add(-share * inner);
  }
  const double e = total.value();
  return e <= 0.0 ? 0.0 : e;
}

double weighted_entropy(std::span<const LabeledVoxelGrid> grids, const DecouplingScheme& scheme,
                        EntropyOptions options) {
  if (grids.empty()) throw EmptyDataError("no grids supplied");
  for (const auto& g : grids) {
    if (!g.same_layout(grids.front())) throw DimensionError("grids do not share a layout");
  }
  std::vector<double> per_grid(grids.size());
  detail::parallel_for(grids.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) per_grid[i] = grid_entropy(grids[i], scheme, options.weighting);
  });
  return compensated_sum(per_grid) / static_cast<double>(grids.size());
}

std::vector<DecouplingScheme> reference_entropy_schemes() {
  std::vector<DecouplingScheme> out;
  for (const char* s : {"1-16", "1-8,9-16", "1-10,11-16", "1-12,13-16", "1-4,5-8,9-16", "1-6,7-12,13-16",
                        "1-7,8-11,12-16", "1-8,9-12,13-16", "1-2,3-6,7-12,13-16", "1-6,7-12,13-14,15-16"}) {
    out.push_back(DecouplingScheme::parse(s));
  }
  return out;
}

void write_histogram_csv(std::ostream& out, const HeightClassHistogram& hist) {
  out << "class,height_bin,count,class_fraction\n";
  for (int j = 0; j < hist.num_classes; ++j) {
    const std::uint64_t class_total = hist.class_total(j);
    for (int z = 0; z < hist.nz; ++z) {
      const std::uint64_t c = hist.at(j, z);
      const double fraction = class_total == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(class_total);
      out << j << ',' << (z + 1) << ',' << c << ',' << format_number(fraction) << '\n';
    }
  }
}

void write_cdf_csv(std::ostream& out, std::span<const double> cdf) {
  out << "height_bin,cdf\n";
  for (std::size_t z = 0; z < cdf.size(); ++z) out << (z + 1) << ',' << format_number(cdf[z]) << '\n';
}

void write_entropy_csv(std::ostream& out, std::span<const EntropyRow> rows) {
  out << "scheme,intervals,entropy\n";
  for (const auto& r : rows) {
    out << '"' << r.scheme.to_string() << "\"," << r.scheme.size() << ',' << format_number(r.entropy) << '\n';
  }
}

}  // namespace occ
