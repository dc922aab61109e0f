#pragma once

#include "cpgloco/types.hpp"

namespace cpgloco {

/// Sample layout of the height map seen by the descending policy: a
/// yaw-aligned window ahead of the base, 17 points along forward x and 11
/// along lateral y at 0.05 m spacing, stored row-major (one row per x).
struct HeightmapGrid {
  static constexpr std::size_t kRows = 17;
  static constexpr std::size_t kCols = 11;
  static constexpr std::size_t kSize = kRows * kCols;
  static constexpr double kSpacing = 0.05;
  static constexpr double kXStart = 0.0;
  static constexpr double kYStart = -0.25;
  static constexpr double kClip = 1.0;

  /// Body-yaw-frame coordinates (forward, lateral) of sample `index`.
  static constexpr std::pair<double, double> point(std::size_t row, std::size_t col) {
    return {kXStart + static_cast<double>(row) * kSpacing, kYStart + static_cast<double>(col) * kSpacing};
  }
  static constexpr std::size_t index(std::size_t row, std::size_t col) { return row * kCols + col; }
};

}  // namespace cpgloco
