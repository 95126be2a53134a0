#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "occ/analysis.hpp"
#include "occ/csv.hpp"
#include "occ/error.hpp"
#include "occ/formats.hpp"
#include "occ/keyvalue.hpp"
#include "occ/losses.hpp"
#include "occ/metrics.hpp"
#include "occ/pooling.hpp"
#include "occ/sfa.hpp"
#include "occ/synth.hpp"

namespace occ::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;
constexpr int kExitNumeric = 4;

// Process-wide settings shared by every subcommand.
struct Global {
  int threads = 1;
};

// Writes to `path`, or to stdout when it is empty.
template <typename Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty()) {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw ParseError("write to '" + path + "' failed");
}

std::vector<LabeledVoxelGrid> load_grids(const std::string& dir) {
  if (!fs::is_directory(dir)) throw ParseError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ocvg") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyDataError("no .ocvg grids in '" + dir + "'");
  std::vector<LabeledVoxelGrid> grids;
  grids.reserve(files.size());
  for (const auto& f : files) grids.push_back(load<LabeledVoxelGrid>(f.string()));
  return grids;
}

GridSpec load_grid_spec(const std::string& path) {
  return path.empty() ? GridSpec::occ3d_nuscenes() : parse_grid_spec(read_text_file(path));
}

void add_gen_heightmap(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("gen-heightmap", "Project a LiDAR cloud and z-buffer it into a height or depth map");
  auto points = std::make_shared<std::string>();
  auto rig = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto channel = std::make_shared<std::string>("height");
  auto grid = std::make_shared<std::string>();
  cmd->add_option("--points", *points, "OCPC point cloud")->required();
  cmd->add_option("--rig", *rig, "camera rig text file")->required();
  cmd->add_option("--out", *out, "OCSM output")->required();
  cmd->add_option("--channel", *channel, "height, depth or bin (height bins of --grid)")
      ->check(CLI::IsMember({"height", "depth", "bin"}));
  cmd->add_option("--grid", *grid, "grid text file for --channel bin");
  cmd->callback([=] {
    const PointCloud cloud = load<PointCloud>(*points);
    const CameraRig r = parse_camera_rig(read_text_file(*rig));
    ScalarMap map = lidar_ground_truth(cloud, r, *channel == "depth" ? MapChannel::kDepth : MapChannel::kHeight);
    if (*channel == "bin") map = bin_height_map(map, load_grid_spec(*grid));
    save(*out, map);
  });
}

void add_project(CLI::App& app, const Global& global) {
  auto* cmd = app.add_subcommand("project", "Lift image features into a BEV, voxel or height-subspace volume");
  struct Args {
    std::string mode, features, depth, rig, grid, heightmap, scheme = "1-4,5-8,9-16", out;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--mode", a->mode, "bev, voxel or mghs")->required()->check(CLI::IsMember({"bev", "voxel", "mghs"}));
  cmd->add_option("--features", a->features, "OCFM context features")->required();
  cmd->add_option("--depth", a->depth, "OCDD depth distribution")->required();
  cmd->add_option("--rig", a->rig, "camera rig text file")->required();
  cmd->add_option("--grid", a->grid, "grid text file (default 200x200x16 at 0.4 m)");
  cmd->add_option("--heightmap", a->heightmap, "OCSM height map (metric or bins), mghs only");
  cmd->add_option("--scheme", a->scheme, "height intervals, mghs only");
  cmd->add_option("--out", a->out, "OCFV file (bev, voxel) or output directory (mghs)")->required();
  cmd->callback([a, &global] {
    const FeatureMap ctx = load<FeatureMap>(a->features);
    const DepthDistribution depth = load<DepthDistribution>(a->depth);
    const CameraRig rig = parse_camera_rig(read_text_file(a->rig));
    const GridSpec spec = load_grid_spec(a->grid);
    const PoolOptions opts{global.threads};
    if (a->mode != "mghs") {
      const Frustum f = gen_frustum(ctx, depth, rig, spec);
      save(a->out, a->mode == "bev" ? bev_pool(f, ctx, spec, opts) : voxel_pool(f, ctx, spec, opts));
      return;
    }
    if (a->heightmap.empty()) throw ValidationError("--mode mghs needs --heightmap");
    const ScalarMap h = load<ScalarMap>(a->heightmap);
    const DecouplingScheme scheme = DecouplingScheme::parse(a->scheme);
    const auto subspaces = mghs_project(ctx, depth, h, scheme, rig, spec, opts);
    fs::create_directories(a->out);
    KeyValueFile manifest;
    manifest.set("scheme", scheme.to_string());
    manifest.set("channels", std::to_string(ctx.channels));
    manifest.set("nx", std::to_string(spec.nx));
    manifest.set("ny", std::to_string(spec.ny));
    for (std::size_t k = 0; k < subspaces.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "subspace_%02zu.ocfv", k);
      save((fs::path(a->out) / name).string(), subspaces[k]);
      manifest.set("subspace", std::to_string(scheme[k].lo) + "-" + std::to_string(scheme[k].hi) + " " + name);
    }
    write_text_file((fs::path(a->out) / "manifest.txt").string(), manifest.to_string());
  });
}

void add_entropy(CLI::App& app, const Global& global) {
  auto* cmd = app.add_subcommand("entropy", "Weighted subspace entropy of labelled grids per decoupling scheme");
  struct Args {
    std::string grids, csv, weighting = "occupied";
    std::vector<std::string> schemes;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--grids", a->grids, "directory of .ocvg grids")->required();
  cmd->add_option("--scheme", a->schemes, "height intervals; repeatable (default: reference table schemes)");
  cmd->add_option("--weighting", a->weighting, "subspace weights: occupied (share of occupied voxels) or volume")
      ->check(CLI::IsMember({"occupied", "volume"}));
  cmd->add_option("--csv", a->csv, "output CSV (default stdout)");
  cmd->callback([a, &global] {
    const auto grids = load_grids(a->grids);
    std::vector<DecouplingScheme> schemes;
    for (const auto& s : a->schemes) schemes.push_back(DecouplingScheme::parse(s));
    if (schemes.empty()) schemes = reference_entropy_schemes();
    EntropyOptions opts;
    opts.threads = global.threads;
    opts.weighting = a->weighting == "volume" ? SubspaceWeighting::kVolume : SubspaceWeighting::kOccupied;
    std::vector<EntropyRow> rows;
    for (const auto& s : schemes) rows.push_back({s, weighted_entropy(grids, s, opts)});
    emit(a->csv, [&](std::ostream& out) { write_entropy_csv(out, rows); });
  });
}

void add_histogram(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("histogram", "Class counts per height bin over a directory of grids");
  auto grids = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  cmd->add_option("--grids", *grids, "directory of .ocvg grids")->required();
  cmd->add_option("--csv", *csv, "output CSV (default stdout)");
  cmd->callback([=] {
    const auto g = load_grids(*grids);
    const auto hist = class_height_histogram(g);
    emit(*csv, [&](std::ostream& out) { write_histogram_csv(out, hist); });
  });
}

void add_cdf(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("cdf", "Cumulative share of occupied voxels by height bin");
  auto grids = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  cmd->add_option("--grids", *grids, "directory of .ocvg grids")->required();
  cmd->add_option("--csv", *csv, "output CSV (default stdout)");
  cmd->callback([=] {
    const auto g = load_grids(*grids);
    const auto cdf = height_cdf(class_height_histogram(g));
    emit(*csv, [&](std::ostream& out) { write_cdf_csv(out, cdf); });
  });
}

FeatureMap seeded_features(std::mt19937_64& rng, int channels, int size) {
  FeatureMap m = FeatureMap::zeros(channels, size, size);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : m.data) x = u(rng);
  return m;
}

void add_sfa_check(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("sfa-check", "Compare analytic aggregation gradients with central differences");
  struct Args {
    int channels = 8, size = 6, seeds = 10, reduction = 4;
    double step = 1e-4, tolerance = 1e-4;
    std::string params, csv;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--channels", a->channels, "feature channels C")->check(CLI::PositiveNumber);
  cmd->add_option("--size", a->size, "height and width of the feature maps")->check(CLI::PositiveNumber);
  cmd->add_option("--seeds", a->seeds, "number of seeded configurations")->check(CLI::PositiveNumber);
  cmd->add_option("--reduction", a->reduction, "reduction ratio r; must divide C")->check(CLI::PositiveNumber);
  cmd->add_option("--step", a->step, "finite-difference step")->check(CLI::PositiveNumber);
  cmd->add_option("--tolerance", a->tolerance, "largest accepted relative error")->check(CLI::PositiveNumber);
  cmd->add_option("--params", a->params, "OCSP parameters to use for every seed instead of seeded ones");
  cmd->add_option("--csv", a->csv, "output CSV (default stdout)");
  cmd->callback([a] {
    std::optional<SfaParams> fixed;
    if (!a->params.empty()) {
      fixed = load<SfaParams>(a->params);
      if (fixed->channels != a->channels) {
        throw DimensionError("parameters are for " + std::to_string(fixed->channels) + " channels, --channels is " +
                             std::to_string(a->channels));
      }
    } else {
      SfaParams::zeros(a->channels, a->reduction);  // rejects r not dividing C
    }
    std::ostringstream table;
    table << "seed,checked,skipped_kinks,max_relative_error,worst_entry\n";
    double worst = 0.0;
    for (int s = 0; s < a->seeds; ++s) {
      const auto seed = static_cast<std::uint64_t>(s);
      std::mt19937_64 rng(seed);
      const FeatureMap db = seeded_features(rng, a->channels, a->size);
      const FeatureMap hr = seeded_features(rng, a->channels, a->size);
      const SfaParams p = fixed ? *fixed : SfaParams::random(a->channels, a->reduction, seed);
      const GradCheckReport r = grad_check(db, hr, p, a->step);
      worst = std::max(worst, r.max_relative_error);
      table << s << ',' << r.checked << ',' << r.skipped_kinks << ',' << format_number(r.max_relative_error) << ','
            << r.worst_entry << '\n';
    }
    emit(a->csv, [&](std::ostream& out) { out << table.str(); });
    if (!(worst < a->tolerance)) {
      throw NumericError("gradient check failed: max relative error " + format_number(worst) + " >= " +
                         format_number(a->tolerance));
    }
  });
}

void add_eval(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("eval", "Per-class IoU and mIoU of a predicted grid");
  auto pred = std::make_shared<std::string>();
  auto gt = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  cmd->add_option("--pred", *pred, "predicted .ocvg")->required();
  cmd->add_option("--gt", *gt, "ground-truth .ocvg")->required();
  cmd->add_option("--csv", *csv, "output CSV (default stdout)");
  cmd->callback([=] {
    const IouReport r = miou(load<LabeledVoxelGrid>(*pred), load<LabeledVoxelGrid>(*gt));
    emit(*csv, [&](std::ostream& out) { write_iou_csv(out, r); });
  });
}

void add_loss(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("loss", "Weighted total of precomputed loss terms");
  auto config = std::make_shared<std::string>();
  auto csv = std::make_shared<std::string>();
  cmd->add_option("--config", *config, "key=value file: depth_bce, height_bce, ce, scal_sem, scal_geo, "
                                       "lambda1..lambda5, mode=default|no-depth")
      ->required();
  cmd->add_option("--csv", *csv, "output CSV (default stdout)");
  cmd->callback([=] {
    const KeyValueFile kv = KeyValueFile::load(*config);
    const std::string mode = kv.contains("mode") ? kv.get("mode") : "default";
    if (mode != "default" && mode != "no-depth") throw ParseError("mode must be default or no-depth, got '" + mode + "'");
    LossLambdas l = mode == "no-depth" ? LossLambdas::without_depth_supervision() : LossLambdas::defaults();
    l.depth_bce = kv.get_double("lambda1", l.depth_bce);
    l.height_bce = kv.get_double("lambda2", l.height_bce);
    l.ce = kv.get_double("lambda3", l.ce);
    l.scal_sem = kv.get_double("lambda4", l.scal_sem);
    l.scal_geo = kv.get_double("lambda5", l.scal_geo);
    if (mode == "no-depth" && l.depth_bce != 0.0) throw ValidationError("mode no-depth requires lambda1 = 0");
    LossParts p;
    p.depth_bce = kv.get_double("depth_bce", 0.0);
    p.height_bce = kv.get_double("height_bce", 0.0);
    p.ce = kv.get_double("ce", 0.0);
    p.scal_sem = kv.get_double("scal_sem", 0.0);
    p.scal_geo = kv.get_double("scal_geo", 0.0);
    const LossBreakdown b = total_loss(p, l);
    emit(*csv, [&](std::ostream& out) {
      out << "term,lambda,value,weighted\n";
      const std::pair<const char*, std::pair<double, double>> rows[] = {{"depth_bce", {l.depth_bce, p.depth_bce}},
                                                                        {"height_bce", {l.height_bce, p.height_bce}},
                                                                        {"ce", {l.ce, p.ce}},
                                                                        {"scal_sem", {l.scal_sem, p.scal_sem}},
                                                                        {"scal_geo", {l.scal_geo, p.scal_geo}}};
      for (const auto& [name, lv] : rows) {
        out << name << ',' << format_number(lv.first) << ',' << format_number(lv.second) << ','
            << format_number(lv.first * lv.second) << '\n';
      }
      out << "total,,," << format_number(b.total) << '\n';
    });
  });
}

void add_synth(CLI::App& app, const Global&) {
  auto* cmd = app.add_subcommand("synth", "Generate labelled grids from a scene recipe");
  auto recipe = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  cmd->add_option("--recipe", *recipe, "key=value scene recipe")->required();
  cmd->add_option("--out-dir", *out_dir, "directory for grid_NNN.ocvg files")->required();
  cmd->callback([=] {
    const SceneRecipe r = SceneRecipe::from_config(KeyValueFile::load(*recipe));
    fs::create_directories(*out_dir);
    for (int i = 0; i < r.num_grids; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "grid_%03d.ocvg", i);
      save((fs::path(*out_dir) / name).string(), synthesize_grid(r, i));
    }
  });
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Height-aware occupancy view-transformation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Global global;
  if (const char* env = std::getenv("OCC_THREADS"); env && *env) {
    long long n = 0;
    try {
      n = parse_int(env);
    } catch (const ParseError&) {
    }
    if (n < 1 || n > 1024) {
      std::cerr << "occ: OCC_THREADS must be an integer in [1, 1024], got '" << env << "'\n";
      return kExitUsage;
    }
    global.threads = static_cast<int>(n);
  }
  app.add_option("--threads", global.threads, "worker threads (default: OCC_THREADS, else 1; 1 is the reference path)")
      ->check(CLI::Range(1, 1024));

  add_gen_heightmap(app, global);
  add_project(app, global);
  add_entropy(app, global);
  add_histogram(app, global);
  add_cdf(app, global);
  add_sfa_check(app, global);
  add_eval(app, global);
  add_loss(app, global);
  add_synth(app, global);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "occ: shape mismatch: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "occ: invalid input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "occ: " << e.what() << '\n';
    return kExitParse;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "occ: " << e.what() << '\n';
    return kExitParse;
  } catch (const NumericError& e) {
    std::cerr << "occ: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const EmptyDataError& e) {
    std::cerr << "occ: nothing to reduce: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "occ: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace occ::cli
