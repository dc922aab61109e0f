#include <gtest/gtest.h>

#include <sstream>

#include "cpgloco/terrain.hpp"

using namespace cpgloco;
using namespace cpgloco::terrain;

TEST(Terrain, FlatIsZero) {
  const Terrain t = generate(TerrainSpec::flat());
  for (double x = -2.0; x < 8.0; x += 0.13) EXPECT_EQ(t.height_at(x, 0.3), 0.0);
}

TEST(Terrain, StairsFormula) {
  const auto spec = TerrainSpec::stairs_up(0.31, 0.18, 5);
  const Terrain t = generate(spec);
  for (double x = -1.0; x < spec.resolved_extent(); x += 0.011) {
    const double k = std::clamp(std::floor((x - 1.5) / 0.31), 0.0, 5.0);
    EXPECT_EQ(t.height_at(x, 0.0), 0.18 * k) << x;
  }
  EXPECT_EQ(t.height_at(1.5 + 0.31 * 2 + 0.01, 0.0), 0.18 * 2);
  EXPECT_EQ(t.height_at(10.0, 0.0), 0.18 * 5);
}

TEST(Terrain, StairsQuantized) {
  const Terrain up = generate(TerrainSpec::stairs_up(0.31, 0.18, 5));
  const Terrain down = generate(TerrainSpec::stairs_down(0.31, 0.18, 5));
  for (const Terrain* t : {&up, &down}) {
    for (std::size_t ix = 0; ix < t->grid_nx(); ++ix) {
      const double h = t->grid_value(ix, 10);
      EXPECT_EQ(h, 0.18 * std::round(h / 0.18));
    }
  }
}

TEST(Terrain, StairsDownMirrors) {
  const Terrain up = generate(TerrainSpec::stairs_up(0.31, 0.18, 4));
  const Terrain down = generate(TerrainSpec::stairs_down(0.31, 0.18, 4));
  for (double x = 0.0; x < 5.0; x += 0.05) EXPECT_EQ(down.height_at(x, 0.0), -up.height_at(x, 0.0));
}

TEST(Terrain, UnevenBoundedAndSeeded) {
  const auto spec = [] {
    auto s = TerrainSpec::uneven(0.08);
    s.seed = 4;
    return s;
  }();
  const Terrain a = generate(spec), b = generate(spec);
  auto other = spec;
  other.seed = 5;
  const Terrain c = generate(other);
  bool differs = false;
  for (double x = -2.0; x < 7.0; x += 0.037)
    for (double y = -1.9; y < 1.9; y += 0.11) {
      const double h = a.height_at(x, y);
      EXPECT_LE(std::abs(h), 0.08);
      EXPECT_EQ(h, b.height_at(x, y));
      if (x < 1.5) EXPECT_EQ(h, 0.0);
      differs = differs || h != c.height_at(x, y);
    }
  EXPECT_TRUE(differs);
}

TEST(Terrain, UnevenContinuousAtStripEdge) {
  auto s = TerrainSpec::uneven(0.1);
  s.seed = 9;
  const Terrain t = generate(s);
  EXPECT_NEAR(t.height_at(1.5 + 1e-9, 0.3), 0.0, 1e-8);
}

TEST(Terrain, PlatformAndGap) {
  const Terrain p = generate(TerrainSpec::platform(0.3, 1.0));
  EXPECT_EQ(p.height_at(1.49, 0.0), 0.0);
  EXPECT_EQ(p.height_at(1.5, 0.0), 0.3);
  EXPECT_EQ(p.height_at(2.49, 0.0), 0.3);
  EXPECT_EQ(p.height_at(2.5, 0.0), 0.0);
  const Terrain g = generate(TerrainSpec::gap(0.25));
  EXPECT_EQ(g.height_at(1.5, 0.0), 0.0);
  EXPECT_EQ(g.height_at(1.6, 0.0), kGapDepth);
  EXPECT_EQ(g.height_at(1.75, 0.0), 0.0);
}

TEST(Terrain, GoalBeyondFeature) {
  const auto s = TerrainSpec::stairs_up(0.31, 0.18, 5);
  EXPECT_DOUBLE_EQ(s.feature_end(), 1.5 + 0.31 * 6);
  EXPECT_DOUBLE_EQ(s.goal_x(), s.feature_end() + 1.0);
  EXPECT_DOUBLE_EQ(s.resolved_extent(), s.goal_x() + 2.0);
}

TEST(Terrain, ValidationErrors) {
  auto s = TerrainSpec::flat();
  s.start_x = 0.5;
  EXPECT_THROW(generate(s), InvalidTerrain);
  EXPECT_THROW(generate(TerrainSpec::stairs_up(0.0, 0.18, 5)), InvalidTerrain);
  EXPECT_THROW(generate(TerrainSpec::stairs_up(0.31, 0.18, 0)), InvalidTerrain);
  EXPECT_THROW(generate(TerrainSpec::gap(-0.1)), InvalidTerrain);
  EXPECT_THROW(generate(TerrainSpec::uneven(0.0)), InvalidTerrain);
}

TEST(Terrain, KindNames) {
  EXPECT_EQ(parse_kind("upstairs"), Kind::StairsUp);
  EXPECT_EQ(parse_kind("downstairs"), Kind::StairsDown);
  EXPECT_EQ(parse_kind("high_obstacle"), Kind::Platform);
  EXPECT_EQ(parse_kind("gap"), Kind::Gap);
  EXPECT_FALSE(parse_kind("lava"));
  for (auto k : {Kind::Flat, Kind::Uneven, Kind::StairsUp, Kind::StairsDown, Kind::Platform, Kind::Gap})
    EXPECT_EQ(parse_kind(kind_name(k)), k);
}

TEST(Heightmap, MatchesHeightAt) {
  auto s = TerrainSpec::uneven(0.08);
  s.seed = 2;
  const Terrain t = generate(s);
  const Vec3 base(1.7, 0.2, 0.31);
  const double yaw = 0.4;
  const VecX h = sample_heightmap(t, base, yaw);
  ASSERT_EQ(h.size(), 187);
  for (std::size_t r = 0; r < 17; ++r)
    for (std::size_t c = 0; c < 11; ++c) {
      const double fx = 0.05 * static_cast<double>(r), fy = -0.25 + 0.05 * static_cast<double>(c);
      const double wx = base.x() + std::cos(yaw) * fx - std::sin(yaw) * fy;
      const double wy = base.y() + std::sin(yaw) * fx + std::cos(yaw) * fy;
      EXPECT_NEAR(h[static_cast<Eigen::Index>(r * 11 + c)], t.height_at(wx, wy) - base.z(), 1e-12);
    }
}

TEST(Heightmap, YawPiMirrorsGrid) {
  auto s = TerrainSpec::uneven(0.08);
  s.seed = 3;
  const Terrain t = generate(s);
  const Vec3 base(2.5, 0.0, 0.3);
  const VecX fwd = sample_heightmap(t, base, 0.0);
  const VecX back = sample_heightmap(t, base, kPi);
  for (std::size_t c = 0; c < 11; ++c) {
    // Row 0 is at the base, so turning around mirrors it laterally.
    EXPECT_NEAR(back[static_cast<Eigen::Index>(c)], fwd[static_cast<Eigen::Index>(10 - c)], 1e-12);
  }
}

TEST(Heightmap, StairRowsNonDecreasing) {
  const Terrain t = generate(TerrainSpec::stairs_up(0.31, 0.18, 5));
  const VecX h = sample_heightmap(t, Vec3(1.3, 0.0, 0.3), 0.0);
  for (std::size_t r = 1; r < 17; ++r)
    for (std::size_t c = 0; c < 11; ++c)
      EXPECT_GE(h[static_cast<Eigen::Index>(r * 11 + c)], h[static_cast<Eigen::Index>((r - 1) * 11 + c)]);
}

TEST(Heightmap, ClippedAtGap) {
  const Terrain t = generate(TerrainSpec::gap(0.25));
  const VecX h = sample_heightmap(t, Vec3(1.3, 0.0, 0.3), 0.0);
  EXPECT_EQ(h.minCoeff(), -1.0);
  EXPECT_THROW(sample_heightmap(t, Vec3(NAN, 0, 0), 0.0), CorruptedState);
}

TEST(Terrain, GridDumpFormat) {
  const Terrain t = generate(TerrainSpec::stairs_up(0.31, 0.18, 2));
  std::ostringstream os;
  t.write_grid(os);
  std::istringstream is(os.str());
  std::string names;
  std::getline(is, names);
  EXPECT_EQ(names, "x0 y0 dx dy nx ny");
  double x0, y0, dx, dy;
  std::size_t nx, ny;
  is >> x0 >> y0 >> dx >> dy >> nx >> ny;
  EXPECT_EQ(x0, -2.0);
  EXPECT_EQ(y0, -2.0);
  EXPECT_EQ(dx, 0.05);
  EXPECT_EQ(nx, t.grid_nx());
  EXPECT_EQ(ny, t.grid_ny());
  std::size_t count = 0;
  double v, last = 0;
  while (is >> v) {
    ++count;
    last = v;
  }
  EXPECT_EQ(count, nx * ny);
  EXPECT_EQ(last, t.grid_value(nx - 1, ny - 1));
}
