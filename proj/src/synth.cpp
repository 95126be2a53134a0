#include "occ/synth.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "occ/error.hpp"

namespace occ {
namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto dash = text.find('-');
  if (dash == std::string::npos) {
    const int v = static_cast<int>(parse_int(text));
    return {v, v};
  }
  return {static_cast<int>(parse_int(text.substr(0, dash))), static_cast<int>(parse_int(text.substr(dash + 1)))};
}

HeightProfile parse_profile(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos) {
    throw ParseError("profile '" + text + "' must look like <class>:<z_lo>-<z_hi>:<fp_min>-<fp_max>");
  }
  HeightProfile p;
  p.class_id = static_cast<int>(parse_int(text.substr(0, a)));
  std::tie(p.z_lo, p.z_hi) = parse_range(text.substr(a + 1, b - a - 1));
  std::tie(p.footprint_min, p.footprint_max) = parse_range(text.substr(b + 1));
  return p;
}

}  // namespace

SceneRecipe SceneRecipe::from_config(const KeyValueFile& config) {
  SceneRecipe r;
  r.seed = static_cast<std::uint64_t>(config.get_int("seed", 0));
  r.num_objects = static_cast<int>(config.get_int("num_objects", 0));
  r.num_grids = static_cast<int>(config.get_int("num_grids", 1));
  r.nx = static_cast<int>(config.get_int("nx", r.nx));
  r.ny = static_cast<int>(config.get_int("ny", r.ny));
  r.nz = static_cast<int>(config.get_int("nz", r.nz));
  const long long classes = config.get_int("num_classes", r.num_classes);
  const long long free_label = config.get_int("free_label", classes);
  if (classes < 1 || classes > 255 || free_label < 0 || free_label > 255) {
    throw ParseError("num_classes and free_label must fit in a byte");
  }
  r.num_classes = static_cast<std::uint8_t>(classes);
  r.free_label = static_cast<std::uint8_t>(free_label);
  for (const auto& p : config.get_all("profile")) r.profiles.push_back(parse_profile(p));
  r.validate();
  return r;
}

void SceneRecipe::validate() const {
  if (nx <= 0 || ny <= 0 || nz <= 0) throw ValidationError("recipe grid dimensions must be positive");
  if (num_objects < 0 || num_grids < 1) throw ValidationError("recipe needs num_objects >= 0 and num_grids >= 1");
  if (free_label < num_classes) throw ValidationError("recipe free_label collides with a class id");
  if (num_objects > 0 && profiles.empty()) throw ValidationError("recipe places objects but has no profiles");
  for (const auto& p : profiles) {
    if (p.class_id < 0 || p.class_id >= num_classes) {
      throw ValidationError("profile class " + std::to_string(p.class_id) + " out of range");
    }
    if (p.z_lo < 1 || p.z_lo > p.z_hi || p.z_hi > nz) {
      throw ValidationError("profile height range must lie in [1, " + std::to_string(nz) + "]");
    }
    if (p.footprint_min < 1 || p.footprint_min > p.footprint_max || p.footprint_max > std::min(nx, ny)) {
      throw ValidationError("profile footprint must fit in the grid");
    }
  }
}

LabeledVoxelGrid synthesize_grid(const SceneRecipe& recipe, int index) {
  recipe.validate();
  LabeledVoxelGrid grid =
      LabeledVoxelGrid::empty(recipe.nx, recipe.ny, recipe.nz, recipe.num_classes, recipe.free_label);
  std::mt19937_64 rng(recipe.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1));
  const int profiles = static_cast<int>(recipe.profiles.size());
  for (int n = 0; n < recipe.num_objects; ++n) {
    const HeightProfile& p = recipe.profiles[static_cast<std::size_t>(uniform_int(rng, 0, profiles - 1))];
    const int sx = uniform_int(rng, p.footprint_min, p.footprint_max);
    const int sy = uniform_int(rng, p.footprint_min, p.footprint_max);
    const int x0 = uniform_int(rng, 0, recipe.nx - sx);
    const int y0 = uniform_int(rng, 0, recipe.ny - sy);
    const int top = uniform_int(rng, p.z_lo, p.z_hi);
    for (int x = x0; x < x0 + sx; ++x) {
      for (int y = y0; y < y0 + sy; ++y) {
        for (int z = p.z_lo - 1; z < top; ++z) grid.at(x, y, z) = static_cast<std::uint8_t>(p.class_id);
      }
    }
  }
  return grid;
}

std::vector<LabeledVoxelGrid> synthesize(const SceneRecipe& recipe) {
  std::vector<LabeledVoxelGrid> grids;
  grids.reserve(static_cast<std::size_t>(recipe.num_grids));
  for (int i = 0; i < recipe.num_grids; ++i) grids.push_back(synthesize_grid(recipe, i));
  return grids;
}

}  // namespace occ
