#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "occ/analysis.hpp"
#include "occ/formats.hpp"
#include "occ/keyvalue.hpp"
#include "support/cli_runner.hpp"
#include "support/oracles.hpp"
#include "support/random.hpp"

namespace fs = std::filesystem;
using namespace occ;
using occ::testing::Rng;

namespace {

using Workspace = occ::testing::Workspace;

std::string file_bytes(const std::string& path) { return read_text_file(path); }

const char* kGrid = "x_min=0\nx_max=16\ny_min=-8\ny_max=8\nz_min=-8\nz_max=8\nvoxel_size=1\nnum_classes=5\n";

CameraRig forward_rig(int w, int h) {
  CameraRig rig;
  rig.intrinsics << 10, 0, w / 2.0, 0, 10, h / 2.0, 0, 0, 1;
  rig.lidar_to_ego.topLeftCorner<3, 3>() << 0, 0, 1, -1, 0, 0, 0, -1, 0;
  rig.image_width = w;
  rig.image_height = h;
  return rig;
}

// Writes features, depth, rig, grid and a bin-valued height map.
void write_projection_fixture(const Workspace& ws, std::uint64_t seed) {
  Rng rng(seed);
  save(ws.path("ctx.ocfm"), occ::testing::random_features(rng, 3, 8, 8));
  DepthDistribution depth = DepthDistribution::zeros(10, 8, 8, 1.0, 1.2);
  for (double& w : depth.weights) w = rng.uniform(0.0, 0.1);
  save(ws.path("depth.ocdd"), depth);
  write_text_file(ws.path("rig.txt"), format_camera_rig(forward_rig(8, 8)));
  write_text_file(ws.path("grid.txt"), kGrid);
  save(ws.path("bins.ocsm"), occ::testing::random_bin_map(rng, 8, 8, 16, 0.1));
  save(ws.path("ones.ocsm"), occ::testing::all_valid_bin_map(8, 8, 1));
}

std::string project_args(const std::string& mode, const Workspace& ws, const std::string& out) {
  return "project --mode " + mode + " --features " + ws.path("ctx.ocfm") + " --depth " + ws.path("depth.ocdd") +
         " --rig " + ws.path("rig.txt") + " --grid " + ws.path("grid.txt") + " --out " + out;
}

void write_grids(const Workspace& ws, const std::string& dir, const std::vector<LabeledVoxelGrid>& grids) {
  fs::create_directories(ws.path(dir));
  for (std::size_t i = 0; i < grids.size(); ++i) save(ws.path(dir + "/g" + std::to_string(i) + ".ocvg"), grids[i]);
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') {
        quoted = !quoted;
      } else if (ch == ',' && !quoted) {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += ch;
      }
    }
    cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  CHECK(ws.run("").code == 2);
  CHECK(ws.run("frobnicate").code == 2);
  CHECK(ws.run("entropy").code == 2);
  CHECK(ws.run("project --mode cube --features a --depth b --rig c --out d").code == 2);
  CHECK(ws.run("--threads 0 cdf --grids x").code == 2);
  CHECK(ws.run("cdf --grids x", "OCC_THREADS=many").code == 2);
  CHECK(ws.run("sfa-check --channels 8 --reduction 3").code == 2);
  CHECK(ws.run("--help").code == 0);
}

TEST_CASE("gen-heightmap fixtures match the geometry oracles") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  Rng rng(1);
  struct Fixture {
    CameraRig rig;
    PointCloud cloud;
  };
  std::vector<Fixture> fixtures;

  Fixture identity;
  identity.rig.intrinsics << 100, 0, 50, 0, 100, 50, 0, 0, 1;
  identity.rig.image_width = 100;
  identity.rig.image_height = 100;
  identity.cloud.points = {{0, 0, 5}, {0, 0, 2}, {1, 2, 4}, {0, 0, -1}, {0.3, -0.2, 3}};
  fixtures.push_back(identity);

  Fixture translated = identity;
  translated.rig.lidar_to_camera_translation = Eigen::Vector3d(0.5, -0.25, 1.0);
  translated.rig.lidar_to_ego(2, 3) = 1.84;
  fixtures.push_back(translated);

  Fixture dense;
  dense.rig = occ::testing::random_rig(rng, 40, 30);
  dense.cloud = occ::testing::random_cloud(rng, 5000);
  fixtures.push_back(dense);

  for (const auto& f : fixtures) {
    save(ws.path("cloud.ocpc"), f.cloud);
    write_text_file(ws.path("rig.txt"), format_camera_rig(f.rig));
    // The file stores f32 coordinates; the oracle sees what the CLI read.
    const PointCloud stored = load<PointCloud>(ws.path("cloud.ocpc"));
    std::vector<PixelAttributedPoint> expect;
    const auto ego = lidar_to_ego(stored, f.rig);
    for (std::size_t i = 0; i < stored.size(); ++i) {
      const auto px = occ::testing::project_direct(f.rig, stored.points[i]);
      if (px.kept) expect.push_back({px.u, px.v, px.depth, ego[i].z(), i});
    }
    for (const char* ch : {"height", "depth"}) {
      const auto r = ws.run(std::string("gen-heightmap --points ") + ws.path("cloud.ocpc") + " --rig " +
                            ws.path("rig.txt") + " --out " + ws.path("map.ocsm") + " --channel " + ch);
      REQUIRE(r.code == 0);
      const ScalarMap got = load<ScalarMap>(ws.path("map.ocsm"));
      const auto channel = std::string(ch) == "height" ? MapChannel::kHeight : MapChannel::kDepth;
      const ScalarMap want = occ::testing::zbuffer_scan(expect, f.rig.image_width, f.rig.image_height, channel);
      CHECK(got.channel == channel);
      CHECK(got.valid == want.valid);
      for (std::size_t i = 0; i < got.pixel_count(); ++i) {
        if (want.valid[i]) CHECK(got.values[i] == static_cast<double>(static_cast<float>(want.values[i])));
      }
    }
  }

  const auto bins = ws.run("gen-heightmap --points " + ws.path("cloud.ocpc") + " --rig " + ws.path("rig.txt") +
                           " --out " + ws.path("bins.ocsm") + " --channel bin");
  CHECK(bins.code == 0);
  CHECK(load<ScalarMap>(ws.path("bins.ocsm")).channel == MapChannel::kHeightBin);

  CHECK(ws.run("gen-heightmap --points " + ws.path("none.ocpc") + " --rig " + ws.path("rig.txt") + " --out " +
               ws.path("x.ocsm"))
            .code == 3);
  write_text_file(ws.path("bad.ocpc"), "OCPCgarbage");
  CHECK(ws.run("gen-heightmap --points " + ws.path("bad.ocpc") + " --rig " + ws.path("rig.txt") + " --out " +
               ws.path("x.ocsm"))
            .code == 3);
}

TEST_CASE("project: conservation, degenerate scheme and oracle fixtures") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  write_projection_fixture(ws, 7);
  REQUIRE(ws.run(project_args("bev", ws, ws.path("bev.ocfv"))).code == 0);
  REQUIRE(ws.run(project_args("voxel", ws, ws.path("voxel.ocfv"))).code == 0);

  const FeatureVolume bev = load<FeatureVolume>(ws.path("bev.ocfv"));
  const FeatureVolume vox = load<FeatureVolume>(ws.path("voxel.ocfv"));
  CHECK(bev.nz == 1);
  CHECK(vox.nz == 16);
  const FeatureVolume collapsed = sum_over_z(vox);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < bev.data.size(); ++i) {
    worst = std::max(worst, std::abs(bev.data[i] - collapsed.data[i]));
    scale = std::max(scale, std::abs(bev.data[i]));
  }
  CHECK(scale > 0.0);
  CHECK(worst <= 1e-6 * std::max(1.0, scale));  // f32 storage

  // Same computation in memory, against the scatter oracle.
  const FeatureMap ctx = load<FeatureMap>(ws.path("ctx.ocfm"));
  const GridSpec spec = parse_grid_spec(kGrid);
  const Frustum f =
      gen_frustum(ctx, load<DepthDistribution>(ws.path("depth.ocdd")), parse_camera_rig(read_text_file(ws.path("rig.txt"))), spec);
  const auto oracle = occ::testing::scatter_oracle(f, ctx, spec.nx, spec.ny, 1, 16);
  for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(vox.data[i] == static_cast<double>(static_cast<float>(oracle[i])));

  const auto degenerate = ws.run(project_args("mghs", ws, ws.path("single")) + " --heightmap " + ws.path("ones.ocsm") +
                                 " --scheme 1-16");
  REQUIRE(degenerate.code == 0);
  CHECK(file_bytes(ws.path("single/subspace_00.ocfv")) == file_bytes(ws.path("voxel.ocfv")));

  const auto split = ws.run(project_args("mghs", ws, ws.path("split")) + " --heightmap " + ws.path("bins.ocsm"));
  REQUIRE(split.code == 0);
  const KeyValueFile manifest = KeyValueFile::load(ws.path("split/manifest.txt"));
  CHECK(manifest.get("scheme") == "1-4,5-8,9-16");
  CHECK(manifest.get_all("subspace") ==
        std::vector<std::string>{"1-4 subspace_00.ocfv", "5-8 subspace_01.ocfv", "9-16 subspace_02.ocfv"});
  CHECK(load<FeatureVolume>(ws.path("split/subspace_02.ocfv")).nz == 8);

  CHECK(ws.run(project_args("mghs", ws, ws.path("nomap"))).code == 2);
  CHECK(ws.run(project_args("mghs", ws, ws.path("bad")) + " --heightmap " + ws.path("bins.ocsm") + " --scheme 1-4,6-16")
            .code == 2);
  save(ws.path("ctx.ocfm"), FeatureMap::zeros(3, 8, 7));
  const auto mismatch = ws.run(project_args("voxel", ws, ws.path("v.ocfv")));
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("3x8x7") != std::string::npos);
  CHECK(mismatch.err.find("10x8x8") != std::string::npos);
}

TEST_CASE("entropy command") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  LabeledVoxelGrid pure = LabeledVoxelGrid::empty(4, 4, 16, 17, 17);
  for (int z = 0; z < 16; z += 3) pure.at(1, 2, z) = 6;
  write_grids(ws, "pure", {pure});
  const auto r = ws.run("entropy --grids " + ws.path("pure"));
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 11);
  CHECK(rows[0] == std::vector<std::string>{"scheme", "intervals", "entropy"});
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][2] == "0");

  LabeledVoxelGrid split = LabeledVoxelGrid::empty(2, 1, 16, 2, 2);
  for (int x = 0; x < 2; ++x)
    for (int z = 0; z < 16; ++z) split.at(x, 0, z) = z < 8 ? 0 : 1;
  write_grids(ws, "split", {split});
  const auto s = ws.run("entropy --grids " + ws.path("split") + " --scheme 1-16 --scheme 1-8,9-16 --csv " +
                        ws.path("e.csv"));
  REQUIRE(s.code == 0);
  CHECK(read_text_file(ws.path("e.csv")) == "scheme,intervals,entropy\n\"1-16\",1,1\n\"1-8,9-16\",2,0\n");

  Rng rng(3);
  std::vector<LabeledVoxelGrid> grids;
  for (int i = 0; i < 3; ++i) grids.push_back(occ::testing::random_grid(rng, 8, 8, 16, 6, 0.5));
  write_grids(ws, "rand", grids);
  const auto m = csv_rows(ws.run("entropy --grids " + ws.path("rand") + " --scheme 1-8,9-16 --scheme 1-4,5-8,9-16").out);
  CHECK(std::stod(m[2][2]) <= std::stod(m[1][2]));

  write_grids(ws, "empty", {LabeledVoxelGrid::empty(2, 2, 16, 3, 3)});
  CHECK(ws.run("entropy --grids " + ws.path("empty")).code == 4);
  fs::create_directories(ws.path("nothing"));
  CHECK(ws.run("entropy --grids " + ws.path("nothing")).code == 4);
  CHECK(ws.run("entropy --grids " + ws.path("missing")).code == 3);
  CHECK(ws.run("entropy --grids " + ws.path("split") + " --scheme 1-8").code == 2);
  CHECK(ws.run("entropy --grids " + ws.path("split") + " --scheme 1-x").code == 3);
}

TEST_CASE("histogram and cdf commands") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  LabeledVoxelGrid g = LabeledVoxelGrid::empty(2, 2, 2, 2, 2);
  g.at(0, 0, 0) = 0;
  g.at(1, 0, 0) = 1;
  g.at(1, 1, 1) = 1;
  write_grids(ws, "g", {g});
  const auto h = ws.run("histogram --grids " + ws.path("g"));
  REQUIRE(h.code == 0);
  CHECK(h.out == "class,height_bin,count,class_fraction\n0,1,1,1\n0,2,0,0\n1,1,1,0.5\n1,2,1,0.5\n");
  const auto c = ws.run("cdf --grids " + ws.path("g") + " --csv " + ws.path("c.csv"));
  REQUIRE(c.code == 0);
  CHECK(read_text_file(ws.path("c.csv")) == "height_bin,cdf\n1,0.666666667\n2,1\n");
}

TEST_CASE("sfa-check command") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  const auto r = ws.run("sfa-check --channels 8 --size 6 --seeds 10");
  CHECK(r.code == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 11);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::stod(rows[i][3]) < 1e-4);
  CHECK(ws.run("sfa-check --seeds 2 --tolerance 1e-300").code == 4);

  save(ws.path("p.ocsp"), SfaParams::random(4, 2, 5));
  CHECK(ws.run("sfa-check --channels 4 --seeds 2 --params " + ws.path("p.ocsp")).code == 0);
  CHECK(ws.run("sfa-check --channels 8 --seeds 2 --params " + ws.path("p.ocsp")).code == 2);
}

TEST_CASE("eval command") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  LabeledVoxelGrid gt = LabeledVoxelGrid::empty(2, 2, 1, 3, 3);
  gt.labels = {0, 0, 1, 3};
  LabeledVoxelGrid pred = gt;
  pred.labels = {0, 1, 1, 2};
  save(ws.path("gt.ocvg"), gt);
  save(ws.path("pred.ocvg"), pred);
  const auto r = ws.run("eval --pred " + ws.path("pred.ocvg") + " --gt " + ws.path("gt.ocvg") + " --csv " + ws.path("i.csv"));
  REQUIRE(r.code == 0);
  CHECK(read_text_file(ws.path("i.csv")) ==
        "class,intersection,union,iou\n0,1,2,0.5\n1,1,2,0.5\n2,0,1,0\nmiou,,,0.333333333\n");
  save(ws.path("small.ocvg"), LabeledVoxelGrid::empty(1, 1, 1, 3, 3));
  CHECK(ws.run("eval --pred " + ws.path("small.ocvg") + " --gt " + ws.path("gt.ocvg")).code == 2);
}

TEST_CASE("loss command") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  write_text_file(ws.path("l.cfg"), "depth_bce=1\nheight_bce=1\nce=1\nscal_sem=1\nscal_geo=1\n");
  const auto r = ws.run("loss --config " + ws.path("l.cfg"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("total,,,10.55\n") != std::string::npos);

  write_text_file(ws.path("s.cfg"), "mode=no-depth\ndepth_bce=7\n");
  const auto s = ws.run("loss --config " + ws.path("s.cfg"));
  REQUIRE(s.code == 0);
  CHECK(s.out.find("depth_bce,0,7,0\n") != std::string::npos);
  CHECK(s.out.find("total,,,0\n") != std::string::npos);

  write_text_file(ws.path("c.cfg"), "lambda3=2\nce=0.5\n");
  CHECK(ws.run("loss --config " + ws.path("c.cfg")).out.find("total,,,1\n") != std::string::npos);

  write_text_file(ws.path("bad.cfg"), "ce=abc\n");
  CHECK(ws.run("loss --config " + ws.path("bad.cfg")).code == 3);
  write_text_file(ws.path("inf.cfg"), "ce=inf\n");
  CHECK(ws.run("loss --config " + ws.path("inf.cfg")).code == 4);
  write_text_file(ws.path("conflict.cfg"), "mode=no-depth\nlambda1=0.05\n");
  CHECK(ws.run("loss --config " + ws.path("conflict.cfg")).code == 2);
}

TEST_CASE("synth command") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  write_text_file(ws.path("r.cfg"),
                  "seed=5\nnum_objects=25\nnum_grids=2\nprofile=0:1-1:3-6\nprofile=3:2-5:1-2\nprofile=8:9-14:1-3\n");
  REQUIRE(ws.run("synth --recipe " + ws.path("r.cfg") + " --out-dir " + ws.path("a")).code == 0);
  REQUIRE(ws.run("synth --recipe " + ws.path("r.cfg") + " --out-dir " + ws.path("b")).code == 0);
  for (const char* name : {"grid_000.ocvg", "grid_001.ocvg"}) {
    CHECK(file_bytes(ws.path(std::string("a/") + name)) == file_bytes(ws.path(std::string("b/") + name)));
  }

  const auto rows = csv_rows(ws.run("histogram --grids " + ws.path("a")).out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const int cls = std::stoi(rows[i][0]), bin = std::stoi(rows[i][1]);
    const long count = std::stol(rows[i][2]);
    const bool allowed = (cls == 0 && bin == 1) || (cls == 3 && bin >= 2 && bin <= 5) || (cls == 8 && bin >= 9 && bin <= 14);
    if (!allowed) CHECK(count == 0);
  }

  write_text_file(ws.path("empty.cfg"), "");
  REQUIRE(ws.run("synth --recipe " + ws.path("empty.cfg") + " --out-dir " + ws.path("e")).code == 0);
  const auto g = load<LabeledVoxelGrid>(ws.path("e/grid_000.ocvg"));
  for (auto l : g.labels) CHECK(l == g.free_label);
  CHECK(ws.run("synth --recipe " + ws.path("missing.cfg") + " --out-dir " + ws.path("f")).code == 3);
}

TEST_CASE("thread count does not change any output byte") {
  Workspace ws(OCC_CLI_PATH, "occ_cli");
  write_projection_fixture(ws, 11);
  for (const char* mode : {"bev", "voxel"}) {
    ws.run(project_args(mode, ws, ws.path("t1.ocfv")) + " --threads 1");
    ws.run(project_args(mode, ws, ws.path("t4.ocfv")), "OCC_THREADS=4");
    CHECK(file_bytes(ws.path("t1.ocfv")) == file_bytes(ws.path("t4.ocfv")));
  }
  Rng rng(12);
  std::vector<LabeledVoxelGrid> grids;
  for (int i = 0; i < 5; ++i) grids.push_back(occ::testing::random_grid(rng, 16, 16, 16, 17, 0.6));
  write_grids(ws, "g", grids);
  CHECK(ws.run("--threads 1 entropy --grids " + ws.path("g")).out == ws.run("--threads 4 entropy --grids " + ws.path("g")).out);
}
