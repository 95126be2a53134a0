#include "occ/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "occ/error.hpp"
#include "occ/summation.hpp"

namespace occ {
namespace {

double clamp_probability(double p) { return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon); }

}  // namespace

double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels,
                std::span<const std::uint8_t> supervised, Reduction reduction) {
  if (predictions.size() != labels.size() || supervised.size() != labels.size()) {
    throw DimensionError("bce: " + std::to_string(predictions.size()) + " predictions, " +
                         std::to_string(labels.size()) + " labels, " + std::to_string(supervised.size()) +
                         " mask entries");
  }
  double loss = 0.0;
  std::size_t count = 0;
  for (std::size_t g = 0; g < predictions.size(); ++g) {
    if (!supervised[g]) continue;
    if (!std::isfinite(predictions[g])) throw NumericError("bce: non-finite prediction");
    if (labels[g] > 1) throw ValidationError("bce: labels must be 0 or 1");
    const double p = clamp_probability(predictions[g]);
    const double y = labels[g];
    loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    ++count;
  }
  if (count == 0) throw EmptyDataError("bce: no supervised entries");
  return reduction == Reduction::kMean ? loss / static_cast<double>(count) : loss;
}

double bce_loss(std::span<const double> predictions, std::span<const std::uint8_t> labels, Reduction reduction) {
  const std::vector<std::uint8_t> all(labels.size(), 1);
  return bce_loss(predictions, labels, all, reduction);
}

ClassWeights inverse_frequency_weights(std::span<const LabeledVoxelGrid> grids) {
  if (grids.empty()) throw EmptyDataError("no grids supplied");
  const LabeledVoxelGrid& first = grids.front();
  std::vector<std::uint64_t> counts(first.num_classes, 0);
  std::uint64_t occupied = 0;
  for (const auto& g : grids) {
    if (!g.same_layout(first)) throw DimensionError("grids do not share a layout");
    g.validate();
    for (std::uint8_t l : g.labels) {
      if (!g.is_occupied(l)) continue;
      ++counts[l];
      ++occupied;
    }
  }
  if (occupied == 0) throw EmptyDataError("grids hold no occupied voxels");
  ClassWeights w;
  w.values.resize(counts.size());
  const double classes = static_cast<double>(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) {
      w.values[j] = kMaxClassWeight;
      w.absent_classes.push_back(static_cast<int>(j));
      continue;
    }
    const double raw = static_cast<double>(occupied) / (classes * static_cast<double>(counts[j]));
    w.values[j] = std::clamp(raw, kMinClassWeight, kMaxClassWeight);
  }
  return w;
}

double weighted_ce(std::span<const double> logits, const LabeledVoxelGrid& labels, std::span<const double> weights,
                   Reduction reduction) {
  labels.validate();
  const std::size_t voxels = labels.voxel_count();
  if (logits.size() % voxels != 0) {
    throw DimensionError("ce: " + std::to_string(logits.size()) + " logits for " + std::to_string(voxels) +
                         " voxels");
  }
  const std::size_t scores = logits.size() / voxels;
  const bool free_channel = scores == static_cast<std::size_t>(labels.num_classes) + 1;
  if (scores != labels.num_classes && !free_channel) {
    throw DimensionError("ce: " + std::to_string(scores) + " scores per voxel, grid has " +
                         std::to_string(labels.num_classes) + " classes");
  }
  if (weights.size() != scores) {
    throw DimensionError("ce: " + std::to_string(weights.size()) + " class weights for " + std::to_string(scores) +
                         " scores");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("ce: class weights must be positive and finite");
  }
  for (double r : logits) {
    if (!std::isfinite(r)) throw NumericError("ce: non-finite logits");
  }

  double loss = 0.0;
  double weight_mass = 0.0;
  for (std::size_t i = 0; i < voxels; ++i) {
    const std::uint8_t l = labels.labels[i];
    std::size_t target = l;
    if (!labels.is_occupied(l)) {
      if (!free_channel) continue;
      target = scores - 1;
    }
    const double* r = logits.data() + i * scores;
    const double m = *std::max_element(r, r + scores);
    double z = 0.0;
    for (std::size_t j = 0; j < scores; ++j) z += std::exp(r[j] - m);
    const double log_softmax = r[target] - m - std::log(z);
    loss -= weights[target] * log_softmax;
    weight_mass += weights[target];
  }
  if (reduction == Reduction::kMean) {
    if (weight_mass == 0.0) throw EmptyDataError("ce: no supervised voxels");
    return loss / weight_mass;
  }
  return loss;
}

LossBreakdown total_loss(const LossParts& parts, const LossLambdas& lambdas) {
  const double terms[][2] = {{lambdas.depth_bce, parts.depth_bce},
                             {lambdas.height_bce, parts.height_bce},
                             {lambdas.ce, parts.ce},
                             {lambdas.scal_sem, parts.scal_sem},
                             {lambdas.scal_geo, parts.scal_geo}};
  CompensatedSum sum;
  for (const auto& t : terms) {
    if (!std::isfinite(t[0]) || !std::isfinite(t[1])) throw NumericError("loss parts and lambdas must be finite");
    sum.add(t[0] * t[1]);
  }
  return {parts, lambdas, sum.value()};
}

}  // namespace occ
