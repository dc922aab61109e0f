#pragma once

// Procedural terrains. Every course starts with a flat strip, then one
// feature along +x. Heights are exact piecewise-analytic functions of (x, y).

#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cpgloco/heightmap_grid.hpp"
#include "cpgloco/rng.hpp"

namespace cpgloco::terrain {

enum class Kind { Flat, Uneven, StairsUp, StairsDown, Platform, Gap };

inline std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::Flat: return "flat";
    case Kind::Uneven: return "uneven";
    case Kind::StairsUp: return "stairs_up";
    case Kind::StairsDown: return "stairs_down";
    case Kind::Platform: return "platform";
    case Kind::Gap: return "gap";
  }
  return "flat";
}

inline std::optional<Kind> parse_kind(std::string_view s) {
  if (s == "flat") return Kind::Flat;
  if (s == "uneven") return Kind::Uneven;
  if (s == "stairs_up" || s == "upstairs") return Kind::StairsUp;
  if (s == "stairs_down" || s == "downstairs") return Kind::StairsDown;
  if (s == "platform" || s == "high_obstacle") return Kind::Platform;
  if (s == "gap") return Kind::Gap;
  return std::nullopt;
}

inline constexpr double kGapDepth = -1.0;
inline constexpr double kMinStartStrip = 1.0;
inline constexpr double kNoiseLattice = 0.20;
inline constexpr double kGridResolution = 0.05;

struct TerrainSpec {
  Kind kind = Kind::Flat;
  double range = 0.08;        // uneven: heights in [-range, range]
  double step_width = 0.31;   // stairs
  double step_height = 0.18;  // stairs
  int steps = 5;              // stairs
  double height = 0.30;       // platform
  double length = 1.0;        // platform length along x / flat run length
  double gap_width = 0.25;    // gap
  double start_x = 1.5;       // end of the flat start strip
  double extent = 0.0;        // x extent; 0 selects goal + 2 m
  double half_width = 2.0;    // lateral half-width
  std::uint64_t seed = 0;

  static TerrainSpec flat() { return {}; }
  static TerrainSpec uneven(double range) {
    TerrainSpec s;
    s.kind = Kind::Uneven;
    s.range = range;
    return s;
  }
  static TerrainSpec stairs_up(double w, double h, int n) {
    TerrainSpec s;
    s.kind = Kind::StairsUp;
    s.step_width = w;
    s.step_height = h;
    s.steps = n;
    return s;
  }
  static TerrainSpec stairs_down(double w, double h, int n) {
    TerrainSpec s = stairs_up(w, h, n);
    s.kind = Kind::StairsDown;
    return s;
  }
  static TerrainSpec platform(double h, double len) {
    TerrainSpec s;
    s.kind = Kind::Platform;
    s.height = h;
    s.length = len;
    return s;
  }
  static TerrainSpec gap(double w) {
    TerrainSpec s;
    s.kind = Kind::Gap;
    s.gap_width = w;
    return s;
  }

  /// x where the feature ends.
  double feature_end() const {
    switch (kind) {
      case Kind::Flat:
      case Kind::Uneven: return start_x + 4.0;
      case Kind::StairsUp:
      case Kind::StairsDown: return start_x + step_width * (steps + 1);
      case Kind::Platform: return start_x + length;
      case Kind::Gap: return start_x + gap_width;
    }
    return start_x;
  }

  /// Reaching this base x counts as traversing the course.
  double goal_x() const { return feature_end() + 1.0; }

  double resolved_extent() const { return extent > 0.0 ? extent : goal_x() + 2.0; }
};

class InvalidTerrain : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void validate(const TerrainSpec& s) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw InvalidTerrain(what);
  };
  need(std::isfinite(s.start_x) && s.start_x >= kMinStartStrip, "terrain: start strip must be at least 1 m");
  need(s.half_width > 0.0, "terrain: half_width must be positive");
  switch (s.kind) {
    case Kind::Flat: break;
    case Kind::Uneven: need(s.range > 0.0 && std::isfinite(s.range), "terrain: uneven range must be positive"); break;
    case Kind::StairsUp:
    case Kind::StairsDown:
      need(s.step_width > 0.0 && s.step_height > 0.0, "terrain: stair width and height must be positive");
      need(s.steps >= 1, "terrain: stairs need at least one step");
      break;
    case Kind::Platform: need(s.height > 0.0 && s.length > 0.0, "terrain: platform height and length must be positive"); break;
    case Kind::Gap: need(s.gap_width > 0.0, "terrain: gap width must be positive"); break;
  }
  need(s.extent == 0.0 || s.extent > s.goal_x(), "terrain: extent must lie beyond the goal");
}

/// Back-of-course limit; queries behind it return the boundary height.
inline constexpr double kXMin = -2.0;

class Terrain {
 public:
  const TerrainSpec& spec() const { return spec_; }
  double x_min() const { return kXMin; }
  double x_max() const { return x_max_; }

  double height_at(double x, double y) const {
    x = std::clamp(x, kXMin, x_max_);
    y = std::clamp(y, -spec_.half_width, spec_.half_width);
    const double x0 = spec_.start_x;
    switch (spec_.kind) {
      case Kind::Flat: return 0.0;
      case Kind::Uneven: return x < x0 ? 0.0 : noise_at(x, y);
      case Kind::StairsUp: return spec_.step_height * static_cast<double>(stair_index(x));
      case Kind::StairsDown: return -spec_.step_height * static_cast<double>(stair_index(x));
      case Kind::Platform: return (x >= x0 && x < x0 + spec_.length) ? spec_.height : 0.0;
      case Kind::Gap: return (x > x0 && x < x0 + spec_.gap_width) ? kGapDepth : 0.0;
    }
    return 0.0;
  }

  /// Number of completed stair steps at x (0 before the staircase).
  int stair_index(double x) const {
    const double k = std::floor((x - spec_.start_x) / spec_.step_width);
    return static_cast<int>(std::clamp(k, 0.0, static_cast<double>(spec_.steps)));
  }

  // Sampled cache at kGridResolution covering [x_min, x_max] x [-half_width, half_width].
  std::size_t grid_nx() const { return grid_nx_; }
  std::size_t grid_ny() const { return grid_ny_; }
  double grid_x0() const { return kXMin; }
  double grid_y0() const { return -spec_.half_width; }
  double grid_value(std::size_t ix, std::size_t iy) const { return grid_[ix * grid_ny_ + iy]; }

  /// Plain-text dump: header "x0 y0 dx dy nx ny", then nx rows of ny heights.
  void write_grid(std::ostream& os) const {
    char buf[128];
    os << "x0 y0 dx dy nx ny\n";
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g ", grid_x0(), grid_y0(), kGridResolution, kGridResolution);
    os << buf << grid_nx_ << ' ' << grid_ny_ << '\n';
    for (std::size_t ix = 0; ix < grid_nx_; ++ix) {
      for (std::size_t iy = 0; iy < grid_ny_; ++iy) {
        std::snprintf(buf, sizeof buf, "%.17g", grid_value(ix, iy));
        if (iy) os << ' ';
        os << buf;
      }
      os << '\n';
    }
  }

  friend Terrain generate(const TerrainSpec& spec);

 private:
  double noise_at(double x, double y) const {
    const double fx = (x - spec_.start_x) / kNoiseLattice;
    const double fy = (y + spec_.half_width) / kNoiseLattice;
    const auto ix = std::min(static_cast<std::size_t>(std::floor(fx)), noise_nx_ - 2);
    const auto iy = std::min(static_cast<std::size_t>(std::floor(fy)), noise_ny_ - 2);
    const double tx = fx - static_cast<double>(ix);
    const double ty = fy - static_cast<double>(iy);
    auto v = [&](std::size_t i, std::size_t j) { return noise_[i * noise_ny_ + j]; };
    const double a = v(ix, iy) * (1.0 - ty) + v(ix, iy + 1) * ty;
    const double b = v(ix + 1, iy) * (1.0 - ty) + v(ix + 1, iy + 1) * ty;
    return a * (1.0 - tx) + b * tx;
  }

  TerrainSpec spec_;
  double x_max_ = 0.0;
  std::vector<double> noise_;
  std::size_t noise_nx_ = 0, noise_ny_ = 0;
  std::vector<double> grid_;
  std::size_t grid_nx_ = 0, grid_ny_ = 0;
};

/// Deterministic in (spec, spec.seed).
inline Terrain generate(const TerrainSpec& spec) {
  validate(spec);
  Terrain t;
  t.spec_ = spec;
  t.x_max_ = spec.resolved_extent();
  if (spec.kind == Kind::Uneven) {
    t.noise_nx_ = static_cast<std::size_t>(std::ceil((t.x_max_ - spec.start_x) / kNoiseLattice)) + 2;
    t.noise_ny_ = static_cast<std::size_t>(std::ceil(2.0 * spec.half_width / kNoiseLattice)) + 2;
    t.noise_.assign(t.noise_nx_ * t.noise_ny_, 0.0);
    Rng rng(derive_seed(spec.seed, 0x7e44a1));
    for (std::size_t i = 0; i < t.noise_nx_; ++i)
      for (std::size_t j = 0; j < t.noise_ny_; ++j)
        // First lattice column stays at zero so the course joins the start strip.
        t.noise_[i * t.noise_ny_ + j] = i == 0 ? 0.0 : rng.uniform(-spec.range, spec.range);
  }
  t.grid_nx_ = static_cast<std::size_t>(std::floor((t.x_max_ - kXMin) / kGridResolution)) + 1;
  t.grid_ny_ = static_cast<std::size_t>(std::floor(2.0 * spec.half_width / kGridResolution)) + 1;
  t.grid_.resize(t.grid_nx_ * t.grid_ny_);
  for (std::size_t ix = 0; ix < t.grid_nx_; ++ix)
    for (std::size_t iy = 0; iy < t.grid_ny_; ++iy)
      t.grid_[ix * t.grid_ny_ + iy] = t.height_at(kXMin + static_cast<double>(ix) * kGridResolution,
                                                  -spec.half_width + static_cast<double>(iy) * kGridResolution);
  return t;
}

/// World coordinates of height-map sample (row, col) for a base at (x, y) with heading yaw.
inline std::pair<double, double> heightmap_point(double base_x, double base_y, double yaw, std::size_t row,
                                                 std::size_t col) {
  const auto [fx, fy] = HeightmapGrid::point(row, col);
  const double c = std::cos(yaw), s = std::sin(yaw);
  return {base_x + c * fx - s * fy, base_y + s * fx + c * fy};
}

/// 187 samples of (terrain height - base height), clipped to [-1, 1].
inline VecX sample_heightmap(const Terrain& t, const Vec3& base_pos, double yaw) {
  if (!base_pos.allFinite() || !std::isfinite(yaw)) throw CorruptedState("sample_heightmap: non-finite pose");
  VecX out(static_cast<Eigen::Index>(HeightmapGrid::kSize));
  for (std::size_t r = 0; r < HeightmapGrid::kRows; ++r) {
    for (std::size_t c = 0; c < HeightmapGrid::kCols; ++c) {
      const auto [wx, wy] = heightmap_point(base_pos.x(), base_pos.y(), yaw, r, c);
      const double rel = t.height_at(wx, wy) - base_pos.z();
      out[static_cast<Eigen::Index>(HeightmapGrid::index(r, c))] = std::clamp(rel, -HeightmapGrid::kClip, HeightmapGrid::kClip);
    }
  }
  return out;
}

}  // namespace cpgloco::terrain
