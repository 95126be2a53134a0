#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "occ/pooling.hpp"

namespace occ {

// Weights of the two-stage aggregation block for C channels and reduction r:
//   channel stage  fc1: 2C -> 2C/r,  fc2: 2C/r -> C
//   spatial stage  conv1: C -> C/r,  conv2: C/r -> 1   (3x3, stride 1, zero pad 1)
// Linear weights are row-major (out x in); conv weights are out x in x 3 x 3.
struct SfaParams {
  int channels = 0;
  int reduction = 16;
  std::vector<double> fc1_weight;
  std::vector<double> fc1_bias;
  std::vector<double> fc2_weight;
  std::vector<double> fc2_bias;
  std::vector<double> conv1_weight;
  std::vector<double> conv1_bias;
  std::vector<double> conv2_weight;
  std::vector<double> conv2_bias;

  static SfaParams zeros(int channels, int reduction);
  // Uniform in [-scale, scale] from a fixed-seed generator.
  static SfaParams random(int channels, int reduction, std::uint64_t seed, double scale = 0.1);

  int squeeze_width() const { return 2 * channels / reduction; }
  int conv_width() const { return channels / reduction; }

  // Blocks in serialization order.
  std::vector<std::vector<double>*> blocks();
  std::vector<const std::vector<double>*> blocks() const;
  static const std::vector<std::string>& block_names();
  std::size_t parameter_count() const;

  // r must divide C, all block sizes must match.
  void validate() const;
};

struct ChannelStageOutput {
  std::vector<double> affinity;  // C entries in (0, 1)
  FeatureMap db_scaled;          // affinity * F_db
  FeatureMap hr_scaled;          // (1 - affinity) * F_hr
};

struct SpatialStageOutput {
  std::vector<double> affinity;  // H x W entries in (0, 1), broadcast over channels
  FeatureMap aggregated;
};

struct AffinityOutputs {
  std::vector<double> channel_affinity;
  std::vector<double> spatial_affinity;
  FeatureMap db_scaled;
  FeatureMap hr_scaled;
  FeatureMap aggregated;
};

ChannelStageOutput channel_stage(const FeatureMap& depth_based, const FeatureMap& height_refined,
                                 const SfaParams& params);
SpatialStageOutput spatial_stage(const FeatureMap& db_scaled, const FeatureMap& hr_scaled,
                                 const SfaParams& params);
AffinityOutputs sfa_forward(const FeatureMap& depth_based, const FeatureMap& height_refined,
                            const SfaParams& params);

// Sum of squares of the aggregated map.
double sfa_loss(const FeatureMap& depth_based, const FeatureMap& height_refined, const SfaParams& params);

// Analytic gradients of sfa_loss. `params` holds dL/dtheta with the same
// layout as the parameters.
struct SfaGradients {
  double loss = 0.0;
  SfaParams params;
  FeatureMap depth_based;
  FeatureMap height_refined;
};

SfaGradients sfa_backward(const FeatureMap& depth_based, const FeatureMap& height_refined,
                          const SfaParams& params);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_entry;
  std::size_t checked = 0;
  // Coordinates whose +-step perturbation flips a ReLU input across zero.
  // Central differences are meaningless there, so they are counted, not compared.
  std::size_t skipped_kinks = 0;
};

// Relative error per coordinate is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;

// Compares sfa_backward with central differences over every parameter and
// every input entry.
GradCheckReport grad_check(const FeatureMap& depth_based, const FeatureMap& height_refined,
                           const SfaParams& params, double step = 1e-4);

}  // namespace occ
