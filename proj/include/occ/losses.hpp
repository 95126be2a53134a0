#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occ/analysis.hpp"

namespace occ {

enum class Reduction { kSum, kMean };

inline constexpr double kProbabilityEpsilon = 1e-7;
inline constexpr double kMinClassWeight = 1e-3;
inline constexpr double kMaxClassWeight = 1e3;

// -sum(y log p + (1 - y) log(1 - p)) over supervised entries, p clamped to
// [eps, 1 - eps]. Throws EmptyDataError when nothing is supervised.
double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels,
                Reduction reduction = Reduction::kSum);
// Only entries with supervised[i] != 0 take part.
double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels,
                std::span<const std::uint8_t> supervised, Reduction reduction = Reduction::kSum);

struct ClassWeights {
  std::vector<double> values;
  std::vector<int> absent_classes;  // classes that fell back to kMaxClassWeight
};

// w_j = occupied / (num_classes * count_j), clamped to [1e-3, 1e3].
ClassWeights inverse_frequency_weights(std::span<const LabeledVoxelGrid> grids);

// -sum_i sum_j w_j y_ij log softmax(r_i)_j. `logits` is voxel-major in grid
// order with L scores per voxel. With L == num_classes free voxels are not
// supervised; with L == num_classes + 1 they are labelled as class L - 1.
// `weights` must have L entries.
double weighted_ce(std::span<const double> logits, const LabeledVoxelGrid& labels,
                   std::span<const double> weights, Reduction reduction = Reduction::kSum);

struct LossLambdas {
  double depth_bce = 0.05;
  double height_bce = 0.1;
  double ce = 10.0;
  double scal_sem = 0.2;
  double scal_geo = 0.2;

  static LossLambdas defaults() { return {}; }
  // Configuration trained without depth supervision.
  static LossLambdas without_depth_supervision() {
    LossLambdas l;
    l.depth_bce = 0.0;
    return l;
  }
};

struct LossParts {
  double depth_bce = 0.0;
  double height_bce = 0.0;
  double ce = 0.0;
  double scal_sem = 0.0;
  double scal_geo = 0.0;
};

struct LossBreakdown {
  LossParts parts;
  LossLambdas lambdas;
  double total = 0.0;
};

// Weighted sum of the five parts, accumulated with compensation so that e.g.
// unit parts under the default lambdas give exactly 10.55. Throws
// NumericError on non-finite input.
LossBreakdown total_loss(const LossParts& parts, const LossLambdas& lambdas = {});

}  // namespace occ
