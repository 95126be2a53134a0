#include "occ/formats.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "occ/error.hpp"
#include "occ/keyvalue.hpp"

namespace occ {
namespace {

using Magic = std::array<char, 4>;

constexpr Magic kPointCloudMagic{'O', 'C', 'P', 'C'};
constexpr Magic kScalarMapMagic{'O', 'C', 'S', 'M'};
constexpr Magic kHeightVolumeMagic{'O', 'C', 'H', 'V'};
constexpr Magic kFeatureMapMagic{'O', 'C', 'F', 'M'};
constexpr Magic kDepthMagic{'O', 'C', 'D', 'D'};
constexpr Magic kFeatureVolumeMagic{'O', 'C', 'F', 'V'};
constexpr Magic kVoxelGridMagic{'O', 'C', 'V', 'G'};
constexpr Magic kSfaParamsMagic{'O', 'C', 'S', 'P'};

// Refuse headers that would allocate more than this many elements.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 31;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void magic(const Magic& m) { out_.write(m.data(), 4); }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out_.write(bytes, 4);
  }
  void dim(int v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f32s(const std::vector<double>& values) {
    for (double v : values) f32(v);
  }
  void finish() {
    if (!out_) throw ParseError("write failed");
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, const Magic& expected, const char* what) : in_(in), what_(what) {
    Magic m{};
    bytes(m.data(), 4);
    if (m != expected) {
      throw ParseError(std::string(what_) + ": bad magic, expected '" + std::string(expected.data(), 4) + "'");
    }
  }

  std::uint8_t u8() {
    char c = 0;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  int dim() {
    const std::uint32_t v = u32();
    if (v == 0 || v > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
      throw ParseError(std::string(what_) + ": invalid dimension " + std::to_string(v));
    }
    return static_cast<int>(v);
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::vector<double> f32s(std::uint64_t count) {
    check_count(count);
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto& v : out) v = f32();
    return out;
  }
  void check_count(std::uint64_t count) const {
    if (count > kMaxElements) throw ParseError(std::string(what_) + ": header declares too many elements");
  }
  const char* what() const { return what_; }

 private:
  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) throw ParseError(std::string(what_) + ": truncated file");
  }

  std::istream& in_;
  const char* what_;
};

std::uint64_t product(std::initializer_list<int> dims) {
  std::uint64_t p = 1;
  for (int d : dims) {
    p *= static_cast<std::uint64_t>(d);
    if (p > kMaxElements) throw ParseError("header declares too many elements");
  }
  return p;
}

template <typename F>
auto revalidate(const char* what, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename Matrix>
std::string join_row_major(const Matrix& m) {
  std::string out;
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!out.empty()) out += ' ';
      out += fmt17(m(r, c));
    }
  }
  return out;
}

}  // namespace

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
  Writer w(out);
  w.magic(kPointCloudMagic);
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  for (const auto& p : cloud.points) {
    w.f32(p.x());
    w.f32(p.y());
    w.f32(p.z());
  }
  w.finish();
}

PointCloud read_point_cloud(std::istream& in) {
  Reader r(in, kPointCloudMagic, "point cloud");
  const std::uint32_t count = r.u32();
  r.check_count(std::uint64_t{count} * 3);
  PointCloud cloud;
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    const double x = r.f32();
    const double y = r.f32();
    const double z = r.f32();
    p = Eigen::Vector3d(x, y, z);
  }
  revalidate("point cloud", [&] { cloud.validate(); return 0; });
  return cloud;
}

void write_scalar_map(std::ostream& out, const ScalarMap& map) {
  Writer w(out);
  w.magic(kScalarMapMagic);
  w.dim(map.width);
  w.dim(map.height);
  w.u8(static_cast<std::uint8_t>(map.channel));
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    w.f32(map.valid[i] ? map.values[i] : std::numeric_limits<double>::quiet_NaN());
  }
  w.finish();
}

ScalarMap read_scalar_map(std::istream& in) {
  Reader r(in, kScalarMapMagic, "scalar map");
  const int width = r.dim();
  const int height = r.dim();
  product({width, height});
  const std::uint8_t tag = r.u8();
  if (tag > static_cast<std::uint8_t>(MapChannel::kHeightBin)) {
    throw ParseError("scalar map: unknown channel tag " + std::to_string(tag));
  }
  ScalarMap map = ScalarMap::empty(width, height, static_cast<MapChannel>(tag));
  for (std::size_t i = 0; i < map.pixel_count(); ++i) {
    const double v = r.f32();
    if (std::isnan(v)) continue;
    if (!std::isfinite(v)) throw ParseError("scalar map: infinite value");
    map.values[i] = v;
    map.valid[i] = 1;
  }
  return map;
}

void write_height_volume(std::ostream& out, const HeightVolume& volume) {
  Writer w(out);
  w.magic(kHeightVolumeMagic);
  w.dim(volume.width);
  w.dim(volume.height);
  w.dim(volume.bins);
  w.f32s(volume.logits);
  w.finish();
}

HeightVolume read_height_volume(std::istream& in) {
  Reader r(in, kHeightVolumeMagic, "height volume");
  HeightVolume v;
  v.width = r.dim();
  v.height = r.dim();
  v.bins = r.dim();
  v.logits = r.f32s(product({v.width, v.height, v.bins}));
  return v;
}

void write_feature_map(std::ostream& out, const FeatureMap& map) {
  Writer w(out);
  w.magic(kFeatureMapMagic);
  w.dim(map.channels);
  w.dim(map.height);
  w.dim(map.width);
  w.f32s(map.data);
  w.finish();
}

FeatureMap read_feature_map(std::istream& in) {
  Reader r(in, kFeatureMapMagic, "feature map");
  FeatureMap m;
  m.channels = r.dim();
  m.height = r.dim();
  m.width = r.dim();
  m.data = r.f32s(product({m.channels, m.height, m.width}));
  for (double x : m.data) {
    if (!std::isfinite(x)) throw ParseError("feature map: non-finite value");
  }
  return m;
}

void write_depth_distribution(std::ostream& out, const DepthDistribution& depth) {
  Writer w(out);
  w.magic(kDepthMagic);
  w.dim(depth.bins);
  w.dim(depth.height);
  w.dim(depth.width);
  w.f32(depth.d_min);
  w.f32(depth.d_step);
  w.f32s(depth.weights);
  w.finish();
}

DepthDistribution read_depth_distribution(std::istream& in) {
  Reader r(in, kDepthMagic, "depth distribution");
  DepthDistribution d;
  d.bins = r.dim();
  d.height = r.dim();
  d.width = r.dim();
  d.d_min = r.f32();
  d.d_step = r.f32();
  d.weights = r.f32s(product({d.bins, d.height, d.width}));
  // Weights summing to exactly 1 in double may exceed it slightly after the
  // f32 round trip; the 1e-6 slack in validate() covers that.
  revalidate("depth distribution", [&] { d.validate(); return 0; });
  return d;
}

void write_feature_volume(std::ostream& out, const FeatureVolume& volume) {
  Writer w(out);
  w.magic(kFeatureVolumeMagic);
  w.dim(volume.channels);
  w.dim(volume.nz);
  w.dim(volume.ny);
  w.dim(volume.nx);
  w.f32s(volume.data);
  w.finish();
}

FeatureVolume read_feature_volume(std::istream& in) {
  Reader r(in, kFeatureVolumeMagic, "feature volume");
  FeatureVolume v;
  v.channels = r.dim();
  v.nz = r.dim();
  v.ny = r.dim();
  v.nx = r.dim();
  v.data = r.f32s(product({v.channels, v.nz, v.ny, v.nx}));
  return v;
}

void write_voxel_grid(std::ostream& out, const LabeledVoxelGrid& grid) {
  Writer w(out);
  w.magic(kVoxelGridMagic);
  w.dim(grid.nx);
  w.dim(grid.ny);
  w.dim(grid.nz);
  w.u8(grid.free_label);
  w.u8(grid.num_classes);
  out.write(reinterpret_cast<const char*>(grid.labels.data()), static_cast<std::streamsize>(grid.labels.size()));
  w.finish();
}

LabeledVoxelGrid read_voxel_grid(std::istream& in) {
  Reader r(in, kVoxelGridMagic, "voxel grid");
  LabeledVoxelGrid g;
  g.nx = r.dim();
  g.ny = r.dim();
  g.nz = r.dim();
  g.free_label = r.u8();
  g.num_classes = r.u8();
  g.labels.resize(static_cast<std::size_t>(product({g.nx, g.ny, g.nz})));
  in.read(reinterpret_cast<char*>(g.labels.data()), static_cast<std::streamsize>(g.labels.size()));
  if (in.gcount() != static_cast<std::streamsize>(g.labels.size())) throw ParseError("voxel grid: truncated file");
  revalidate("voxel grid", [&] { g.validate(); return 0; });
  return g;
}

void write_sfa_params(std::ostream& out, const SfaParams& params) {
  params.validate();
  Writer w(out);
  w.magic(kSfaParamsMagic);
  w.dim(params.channels);
  w.dim(params.reduction);
  for (const auto* block : params.blocks()) w.f32s(*block);
  w.finish();
}

SfaParams read_sfa_params(std::istream& in) {
  Reader r(in, kSfaParamsMagic, "aggregation parameters");
  const int channels = r.dim();
  const int reduction = r.dim();
  SfaParams p = revalidate("aggregation parameters", [&] { return SfaParams::zeros(channels, reduction); });
  for (auto* block : p.blocks()) *block = r.f32s(block->size());
  return p;
}

CameraRig parse_camera_rig(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  CameraRig rig;
  const auto k = kv.get_doubles("K", 9);
  const auto rot = kv.get_doubles("R_lc", 9);
  const auto t = kv.get_doubles("t_lc", 3);
  const auto ego = kv.get_doubles("T_le", 16);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rig.intrinsics(r, c) = k[static_cast<std::size_t>(r * 3 + c)];
      rig.lidar_to_camera_rotation(r, c) = rot[static_cast<std::size_t>(r * 3 + c)];
    }
    rig.lidar_to_camera_translation(r) = t[static_cast<std::size_t>(r)];
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) rig.lidar_to_ego(r, c) = ego[static_cast<std::size_t>(r * 4 + c)];
  }
  rig.image_width = static_cast<int>(kv.get_int("width"));
  rig.image_height = static_cast<int>(kv.get_int("height"));
  revalidate("camera rig", [&] { rig.validate(); return 0; });
  return rig;
}

std::string format_camera_rig(const CameraRig& rig) {
  std::string out;
  out += "K=" + join_row_major(rig.intrinsics) + "\n";
  out += "R_lc=" + join_row_major(rig.lidar_to_camera_rotation) + "\n";
  out += "t_lc=" + join_row_major(rig.lidar_to_camera_translation.transpose()) + "\n";
  out += "T_le=" + join_row_major(rig.lidar_to_ego) + "\n";
  out += "width=" + std::to_string(rig.image_width) + "\n";
  out += "height=" + std::to_string(rig.image_height) + "\n";
  return out;
}

GridSpec parse_grid_spec(const std::string& text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  const GridSpec d = GridSpec::occ3d_nuscenes();
  return revalidate("grid spec", [&] {
    return GridSpec::make(kv.get_double("x_min", d.x_min), kv.get_double("x_max", d.x_max),
                          kv.get_double("y_min", d.y_min), kv.get_double("y_max", d.y_max),
                          kv.get_double("z_min", d.z_min), kv.get_double("z_max", d.z_max),
                          kv.get_double("voxel_size", d.voxel_size),
                          static_cast<int>(kv.get_int("num_classes", d.num_classes)));
  });
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  out << text;
  if (!out) throw ParseError("write failed: " + path);
}

namespace {

PointCloud read_any(std::istream& in, PointCloud*) { return read_point_cloud(in); }
ScalarMap read_any(std::istream& in, ScalarMap*) { return read_scalar_map(in); }
HeightVolume read_any(std::istream& in, HeightVolume*) { return read_height_volume(in); }
FeatureMap read_any(std::istream& in, FeatureMap*) { return read_feature_map(in); }
DepthDistribution read_any(std::istream& in, DepthDistribution*) { return read_depth_distribution(in); }
FeatureVolume read_any(std::istream& in, FeatureVolume*) { return read_feature_volume(in); }
LabeledVoxelGrid read_any(std::istream& in, LabeledVoxelGrid*) { return read_voxel_grid(in); }
SfaParams read_any(std::istream& in, SfaParams*) { return read_sfa_params(in); }

void write_any(std::ostream& out, const PointCloud& v) { write_point_cloud(out, v); }
void write_any(std::ostream& out, const ScalarMap& v) { write_scalar_map(out, v); }
void write_any(std::ostream& out, const HeightVolume& v) { write_height_volume(out, v); }
void write_any(std::ostream& out, const FeatureMap& v) { write_feature_map(out, v); }
void write_any(std::ostream& out, const DepthDistribution& v) { write_depth_distribution(out, v); }
void write_any(std::ostream& out, const FeatureVolume& v) { write_feature_volume(out, v); }
void write_any(std::ostream& out, const LabeledVoxelGrid& v) { write_voxel_grid(out, v); }
void write_any(std::ostream& out, const SfaParams& v) { write_sfa_params(out, v); }

}  // namespace

template <typename T>
T load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  T value = read_any(in, static_cast<T*>(nullptr));
  if (in.peek() != std::ifstream::traits_type::eof()) throw ParseError(path + ": trailing bytes after payload");
  return value;
}

template <typename T>
void save(const std::string& path, const T& value) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  write_any(out, value);
  out.flush();
  if (!out) throw ParseError("write failed: " + path);
}

#define OCC_INSTANTIATE_IO(T)                 \
  template T load<T>(const std::string&);     \
  template void save<T>(const std::string&, const T&);

OCC_INSTANTIATE_IO(PointCloud)
OCC_INSTANTIATE_IO(ScalarMap)
OCC_INSTANTIATE_IO(HeightVolume)
OCC_INSTANTIATE_IO(FeatureMap)
OCC_INSTANTIATE_IO(DepthDistribution)
OCC_INSTANTIATE_IO(FeatureVolume)
OCC_INSTANTIATE_IO(LabeledVoxelGrid)
OCC_INSTANTIATE_IO(SfaParams)

#undef OCC_INSTANTIATE_IO

}  // namespace occ
