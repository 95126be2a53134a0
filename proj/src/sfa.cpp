#include "occ/sfa.hpp"

#include <cmath>
#include <random>
#include <string>

#include "occ/error.hpp"

namespace occ {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

void check_pair(const FeatureMap& a, const FeatureMap& b, int channels) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
    throw DimensionError("aggregation inputs differ: " + std::to_string(a.channels) + "x" +
                         std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                         std::to_string(b.channels) + "x" + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
  }
  if (a.channels != channels) {
    throw DimensionError("inputs carry " + std::to_string(a.channels) + " channels, parameters expect " +
                         std::to_string(channels));
  }
  if (a.data.size() != static_cast<std::size_t>(a.channels) * a.pixel_count() ||
      b.data.size() != a.data.size()) {
    throw DimensionError("feature buffer does not match its shape");
  }
}

// 3x3, stride 1, zero padding 1. `in` is in_ch x h x w, `weight` out_ch x in_ch x 3 x 3.
std::vector<double> conv3x3(const std::vector<double>& in, int in_ch, int h, int w,
                            const std::vector<double>& weight, const std::vector<double>& bias, int out_ch) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> out(static_cast<std::size_t>(out_ch) * plane);
  for (int o = 0; o < out_ch; ++o) {
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_ch; ++i) {
          const double* kernel = &weight[(static_cast<std::size_t>(o) * in_ch + i) * 9];
          for (int dy = 0; dy < 3; ++dy) {
            const int y = v + dy - 1;
            if (y < 0 || y >= h) continue;
            for (int dx = 0; dx < 3; ++dx) {
              const int x = u + dx - 1;
              if (x < 0 || x >= w) continue;
              acc += kernel[dy * 3 + dx] * in[static_cast<std::size_t>(i) * plane + static_cast<std::size_t>(y) * w + x];
            }
          }
        }
        out[static_cast<std::size_t>(o) * plane + static_cast<std::size_t>(v) * w + u] = acc;
      }
    }
  }
  return out;
}

// Accumulates weight/bias gradients and returns the input gradient of conv3x3.
std::vector<double> conv3x3_backward(const std::vector<double>& in, int in_ch, int h, int w,
                                     const std::vector<double>& weight, int out_ch,
                                     const std::vector<double>& grad_out, std::vector<double>& grad_weight,
                                     std::vector<double>& grad_bias) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> grad_in(static_cast<std::size_t>(in_ch) * plane, 0.0);
  for (int o = 0; o < out_ch; ++o) {
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const double g = grad_out[static_cast<std::size_t>(o) * plane + static_cast<std::size_t>(v) * w + u];
        grad_bias[static_cast<std::size_t>(o)] += g;
        for (int i = 0; i < in_ch; ++i) {
          const std::size_t kbase = (static_cast<std::size_t>(o) * in_ch + i) * 9;
          for (int dy = 0; dy < 3; ++dy) {
            const int y = v + dy - 1;
            if (y < 0 || y >= h) continue;
            for (int dx = 0; dx < 3; ++dx) {
              const int x = u + dx - 1;
              if (x < 0 || x >= w) continue;
              const std::size_t src = static_cast<std::size_t>(i) * plane + static_cast<std::size_t>(y) * w + x;
              grad_weight[kbase + dy * 3 + dx] += g * in[src];
              grad_in[src] += g * weight[kbase + dy * 3 + dx];
            }
          }
        }
      }
    }
  }
  return grad_in;
}

struct ForwardTrace {
  std::vector<double> pooled;      // 2C
  std::vector<double> fc1_pre;     // squeeze width
  std::vector<double> fc1_out;
  std::vector<double> channel_affinity;
  FeatureMap db_scaled;
  FeatureMap hr_scaled;
  std::vector<double> fused;       // db_scaled + hr_scaled
  std::vector<double> conv1_pre;   // conv width x H x W
  std::vector<double> conv1_out;
  std::vector<double> spatial_affinity;
  FeatureMap aggregated;
};

void channel_forward(const FeatureMap& db, const FeatureMap& hr, const SfaParams& p, ForwardTrace& t) {
  const int c_in = p.channels;
  const int hidden = p.squeeze_width();
  const std::size_t plane = db.pixel_count();
  t.pooled.assign(static_cast<std::size_t>(2 * c_in), 0.0);
  for (int c = 0; c < c_in; ++c) {
    double sd = 0.0;
    double sh = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      sd += db.data[static_cast<std::size_t>(c) * plane + i];
      sh += hr.data[static_cast<std::size_t>(c) * plane + i];
    }
    t.pooled[static_cast<std::size_t>(c)] = sd / static_cast<double>(plane);
    t.pooled[static_cast<std::size_t>(c_in + c)] = sh / static_cast<double>(plane);
  }
  t.fc1_pre.assign(static_cast<std::size_t>(hidden), 0.0);
  t.fc1_out.assign(static_cast<std::size_t>(hidden), 0.0);
  for (int o = 0; o < hidden; ++o) {
    double acc = p.fc1_bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < 2 * c_in; ++i) {
      acc += p.fc1_weight[static_cast<std::size_t>(o) * (2 * c_in) + i] * t.pooled[static_cast<std::size_t>(i)];
    }
    t.fc1_pre[static_cast<std::size_t>(o)] = acc;
    t.fc1_out[static_cast<std::size_t>(o)] = relu(acc);
  }
  t.channel_affinity.assign(static_cast<std::size_t>(c_in), 0.0);
  for (int o = 0; o < c_in; ++o) {
    double acc = p.fc2_bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < hidden; ++i) {
      acc += p.fc2_weight[static_cast<std::size_t>(o) * hidden + i] * t.fc1_out[static_cast<std::size_t>(i)];
    }
    t.channel_affinity[static_cast<std::size_t>(o)] = sigmoid(acc);
  }
  t.db_scaled = db;
  t.hr_scaled = hr;
  for (int c = 0; c < c_in; ++c) {
    const double a = t.channel_affinity[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < plane; ++i) {
      t.db_scaled.data[static_cast<std::size_t>(c) * plane + i] *= a;
      t.hr_scaled.data[static_cast<std::size_t>(c) * plane + i] *= 1.0 - a;
    }
  }
}

void spatial_forward(const FeatureMap& dbs, const FeatureMap& hrs, const SfaParams& p, ForwardTrace& t) {
  const int h = dbs.height;
  const int w = dbs.width;
  const std::size_t plane = dbs.pixel_count();
  t.fused.resize(dbs.data.size());
  for (std::size_t i = 0; i < dbs.data.size(); ++i) t.fused[i] = dbs.data[i] + hrs.data[i];
  t.conv1_pre = conv3x3(t.fused, p.channels, h, w, p.conv1_weight, p.conv1_bias, p.conv_width());
  t.conv1_out.resize(t.conv1_pre.size());
  for (std::size_t i = 0; i < t.conv1_pre.size(); ++i) t.conv1_out[i] = relu(t.conv1_pre[i]);
  const std::vector<double> logits = conv3x3(t.conv1_out, p.conv_width(), h, w, p.conv2_weight, p.conv2_bias, 1);
  t.spatial_affinity.resize(plane);
  for (std::size_t i = 0; i < plane; ++i) t.spatial_affinity[i] = sigmoid(logits[i]);
  t.aggregated = dbs;
  for (int c = 0; c < dbs.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t k = static_cast<std::size_t>(c) * plane + i;
      const double a = t.spatial_affinity[i];
      t.aggregated.data[k] = hrs.data[k] + a * (dbs.data[k] - hrs.data[k]);
    }
  }
}

ForwardTrace forward(const FeatureMap& db, const FeatureMap& hr, const SfaParams& p) {
  p.validate();
  check_pair(db, hr, p.channels);
  ForwardTrace t;
  channel_forward(db, hr, p, t);
  spatial_forward(t.db_scaled, t.hr_scaled, p, t);
  return t;
}

double sum_of_squares(const FeatureMap& m) {
  double s = 0.0;
  for (double x : m.data) s += x * x;
  return s;
}

std::vector<std::uint8_t> relu_pattern(const ForwardTrace& t) {
  std::vector<std::uint8_t> pattern;
  pattern.reserve(t.fc1_pre.size() + t.conv1_pre.size());
  for (double x : t.fc1_pre) pattern.push_back(x > 0.0);
  for (double x : t.conv1_pre) pattern.push_back(x > 0.0);
  return pattern;
}

double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

SfaParams SfaParams::zeros(int channels, int reduction) {
  SfaParams p;
  p.channels = channels;
  p.reduction = reduction;
  if (channels <= 0 || reduction <= 0 || channels % reduction != 0) {
    throw ValidationError("reduction " + std::to_string(reduction) + " must divide channel count " +
                          std::to_string(channels));
  }
  const auto hidden = static_cast<std::size_t>(p.squeeze_width());
  const auto mid = static_cast<std::size_t>(p.conv_width());
  const auto c = static_cast<std::size_t>(channels);
  p.fc1_weight.assign(hidden * 2 * c, 0.0);
  p.fc1_bias.assign(hidden, 0.0);
  p.fc2_weight.assign(c * hidden, 0.0);
  p.fc2_bias.assign(c, 0.0);
  p.conv1_weight.assign(mid * c * 9, 0.0);
  p.conv1_bias.assign(mid, 0.0);
  p.conv2_weight.assign(mid * 9, 0.0);
  p.conv2_bias.assign(1, 0.0);
  return p;
}

SfaParams SfaParams::random(int channels, int reduction, std::uint64_t seed, double scale) {
  SfaParams p = zeros(channels, reduction);
  std::mt19937_64 rng(seed);
  for (auto* block : p.blocks()) {
    for (double& x : *block) x = scale * (2.0 * uniform_unit(rng) - 1.0);
  }
  return p;
}

std::vector<std::vector<double>*> SfaParams::blocks() {
  return {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias, &conv1_weight, &conv1_bias, &conv2_weight, &conv2_bias};
}

std::vector<const std::vector<double>*> SfaParams::blocks() const {
  return {&fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias, &conv1_weight, &conv1_bias, &conv2_weight, &conv2_bias};
}

const std::vector<std::string>& SfaParams::block_names() {
  static const std::vector<std::string> names = {"fc1_weight",   "fc1_bias",   "fc2_weight",   "fc2_bias",
                                                 "conv1_weight", "conv1_bias", "conv2_weight", "conv2_bias"};
  return names;
}

std::size_t SfaParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* b : blocks()) n += b->size();
  return n;
}

void SfaParams::validate() const {
  const SfaParams shape = zeros(channels, reduction);
  const auto mine = blocks();
  const auto expected = shape.blocks();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->size() != expected[i]->size()) {
      throw DimensionError("parameter block " + block_names()[i] + " has " + std::to_string(mine[i]->size()) +
                           " entries, expected " + std::to_string(expected[i]->size()));
    }
    for (double x : *mine[i]) {
      if (!std::isfinite(x)) throw NumericError("parameter block " + block_names()[i] + " is not finite");
    }
  }
}

ChannelStageOutput channel_stage(const FeatureMap& depth_based, const FeatureMap& height_refined,
                                 const SfaParams& params) {
  params.validate();
  check_pair(depth_based, height_refined, params.channels);
  ForwardTrace t;
  channel_forward(depth_based, height_refined, params, t);
  return {std::move(t.channel_affinity), std::move(t.db_scaled), std::move(t.hr_scaled)};
}

SpatialStageOutput spatial_stage(const FeatureMap& db_scaled, const FeatureMap& hr_scaled, const SfaParams& params) {
  params.validate();
  check_pair(db_scaled, hr_scaled, params.channels);
  ForwardTrace t;
  spatial_forward(db_scaled, hr_scaled, params, t);
  return {std::move(t.spatial_affinity), std::move(t.aggregated)};
}

AffinityOutputs sfa_forward(const FeatureMap& depth_based, const FeatureMap& height_refined, const SfaParams& params) {
  ForwardTrace t = forward(depth_based, height_refined, params);
  return {std::move(t.channel_affinity), std::move(t.spatial_affinity), std::move(t.db_scaled),
          std::move(t.hr_scaled), std::move(t.aggregated)};
}

double sfa_loss(const FeatureMap& depth_based, const FeatureMap& height_refined, const SfaParams& params) {
  return sum_of_squares(forward(depth_based, height_refined, params).aggregated);
}

SfaGradients sfa_backward(const FeatureMap& db, const FeatureMap& hr, const SfaParams& p) {
  const ForwardTrace t = forward(db, hr, p);
  const int c_in = p.channels;
  const int hidden = p.squeeze_width();
  const int mid = p.conv_width();
  const int h = db.height;
  const int w = db.width;
  const std::size_t plane = db.pixel_count();

  SfaGradients g;
  g.loss = sum_of_squares(t.aggregated);
  g.params = SfaParams::zeros(c_in, p.reduction);
  g.depth_based = FeatureMap::zeros(c_in, h, w);
  g.height_refined = FeatureMap::zeros(c_in, h, w);

  // Aggregation: F = A * Dcs + (1 - A) * Hcs.
  std::vector<double> g_db_scaled(db.data.size());
  std::vector<double> g_hr_scaled(db.data.size());
  std::vector<double> g_spatial(plane, 0.0);
  for (int c = 0; c < c_in; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t k = static_cast<std::size_t>(c) * plane + i;
      const double gf = 2.0 * t.aggregated.data[k];
      const double a = t.spatial_affinity[i];
      g_db_scaled[k] = a * gf;
      g_hr_scaled[k] = (1.0 - a) * gf;
      g_spatial[i] += gf * (t.db_scaled.data[k] - t.hr_scaled.data[k]);
    }
  }

  // Spatial stage back to the fused map.
  std::vector<double> g_logits(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double a = t.spatial_affinity[i];
    g_logits[i] = g_spatial[i] * a * (1.0 - a);
  }
  std::vector<double> g_conv1_out = conv3x3_backward(t.conv1_out, mid, h, w, p.conv2_weight, 1, g_logits,
                                                     g.params.conv2_weight, g.params.conv2_bias);
  for (std::size_t i = 0; i < g_conv1_out.size(); ++i) {
    if (!(t.conv1_pre[i] > 0.0)) g_conv1_out[i] = 0.0;
  }
  const std::vector<double> g_fused = conv3x3_backward(t.fused, c_in, h, w, p.conv1_weight, mid, g_conv1_out,
                                                       g.params.conv1_weight, g.params.conv1_bias);
  for (std::size_t k = 0; k < g_fused.size(); ++k) {
    g_db_scaled[k] += g_fused[k];
    g_hr_scaled[k] += g_fused[k];
  }

  // Channel scaling: Dcs = a * D, Hcs = (1 - a) * H.
  std::vector<double> g_affinity(static_cast<std::size_t>(c_in), 0.0);
  for (int c = 0; c < c_in; ++c) {
    const double a = t.channel_affinity[static_cast<std::size_t>(c)];
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      const std::size_t k = static_cast<std::size_t>(c) * plane + i;
      g.depth_based.data[k] = a * g_db_scaled[k];
      g.height_refined.data[k] = (1.0 - a) * g_hr_scaled[k];
      acc += g_db_scaled[k] * db.data[k] - g_hr_scaled[k] * hr.data[k];
    }
    g_affinity[static_cast<std::size_t>(c)] = acc;
  }

  // Squeeze MLP.
  std::vector<double> g_fc1_out(static_cast<std::size_t>(hidden), 0.0);
  for (int o = 0; o < c_in; ++o) {
    const double a = t.channel_affinity[static_cast<std::size_t>(o)];
    const double gz = g_affinity[static_cast<std::size_t>(o)] * a * (1.0 - a);
    g.params.fc2_bias[static_cast<std::size_t>(o)] = gz;
    for (int i = 0; i < hidden; ++i) {
      const std::size_t wi = static_cast<std::size_t>(o) * hidden + i;
      g.params.fc2_weight[wi] = gz * t.fc1_out[static_cast<std::size_t>(i)];
      g_fc1_out[static_cast<std::size_t>(i)] += gz * p.fc2_weight[wi];
    }
  }
  std::vector<double> g_pooled(static_cast<std::size_t>(2 * c_in), 0.0);
  for (int o = 0; o < hidden; ++o) {
    const double gz = t.fc1_pre[static_cast<std::size_t>(o)] > 0.0 ? g_fc1_out[static_cast<std::size_t>(o)] : 0.0;
    g.params.fc1_bias[static_cast<std::size_t>(o)] = gz;
    for (int i = 0; i < 2 * c_in; ++i) {
      const std::size_t wi = static_cast<std::size_t>(o) * (2 * c_in) + i;
      g.params.fc1_weight[wi] = gz * t.pooled[static_cast<std::size_t>(i)];
      g_pooled[static_cast<std::size_t>(i)] += gz * p.fc1_weight[wi];
    }
  }
  const double inv_plane = 1.0 / static_cast<double>(plane);
  for (int c = 0; c < c_in; ++c) {
    const double gd = g_pooled[static_cast<std::size_t>(c)] * inv_plane;
    const double gh = g_pooled[static_cast<std::size_t>(c_in + c)] * inv_plane;
    for (std::size_t i = 0; i < plane; ++i) {
      g.depth_based.data[static_cast<std::size_t>(c) * plane + i] += gd;
      g.height_refined.data[static_cast<std::size_t>(c) * plane + i] += gh;
    }
  }
  return g;
}

GradCheckReport grad_check(const FeatureMap& depth_based, const FeatureMap& height_refined, const SfaParams& params,
                           double step) {
  const SfaGradients analytic = sfa_backward(depth_based, height_refined, params);

  FeatureMap db = depth_based;
  FeatureMap hr = height_refined;
  SfaParams p = params;
  GradCheckReport report;

  auto check = [&](double& slot, double expected, const std::string& name) {
    const double saved = slot;
    slot = saved + step;
    const ForwardTrace plus = forward(db, hr, p);
    slot = saved - step;
    const ForwardTrace minus = forward(db, hr, p);
    slot = saved;
    if (relu_pattern(plus) != relu_pattern(minus)) {
      ++report.skipped_kinks;
      return;
    }
    const double numeric = (sum_of_squares(plus.aggregated) - sum_of_squares(minus.aggregated)) / (2.0 * step);
    const double denom = std::max({std::abs(expected), std::abs(numeric), kGradCheckFloor});
    const double err = std::abs(expected - numeric) / denom;
    ++report.checked;
    if (report.worst_entry.empty() || err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_entry = name;
    }
  };

  auto blocks = p.blocks();
  const auto grad_blocks = analytic.params.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i = 0; i < blocks[b]->size(); ++i) {
      check((*blocks[b])[i], (*grad_blocks[b])[i], SfaParams::block_names()[b] + "[" + std::to_string(i) + "]");
    }
  }
  for (std::size_t i = 0; i < db.data.size(); ++i) {
    check(db.data[i], analytic.depth_based.data[i], "depth_based[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < hr.data.size(); ++i) {
    check(hr.data[i], analytic.height_refined.data[i], "height_refined[" + std::to_string(i) + "]");
  }
  return report;
}

}  // namespace occ
