#pragma once

// Precomputed h-interval profiles. Each unit gets one vector per arm holding
// h_arm(x, y, p_a, p_b) for every y-grid point and every ordered pair of the
// propensity grid, so distances between units reduce to vector norms.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "wsm/core_num.hpp"
#include "wsm/hfunc.hpp"

namespace wsm {

inline constexpr std::size_t kMaxPGrid = 32;

struct ProfileGrid {
  YGrid y;
  std::vector<double> p;
  std::vector<std::pair<std::uint8_t, std::uint8_t>> pairs;  // (a, b) with a > b

  std::size_t width() const { return y.size() * pairs.size(); }
};

ProfileGrid make_profile_grid(YGrid y, std::size_t p_size, double c0);

struct ProfileTable {
  std::size_t units = 0;
  std::size_t width = 0;
  std::vector<double> values;           // units x width, pair-major
  std::vector<std::uint32_t> accepted;  // bit g set when p-grid point g is in the unit's trim set

  std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }
};

struct ProfileSet {
  std::array<ProfileTable, 2> arm;
};

/// Profiles of both arms at the covariate points xs. In analytic mode each
/// p-cell is integrated with `nodes_per_cell` midpoint nodes; in empirical mode
/// h* is the kernel regression at the grid propensities and grid points whose
/// conditional density estimate is not above trim_c are masked out.
ProfileSet build_profiles(const HContext& ctx,
                          const ProfileGrid& grid,
                          const PointSet& xs,
                          double trim_c,
                          std::size_t nodes_per_cell);

/// Distance between row i of `a` and row j of `b` over pairs accepted by both
/// units. Infinite when no pair survives trimming.
double profile_distance(const ProfileTable& a,
                        std::size_t i,
                        const ProfileTable& b,
                        std::size_t j,
                        const ProfileGrid& grid);

}  // namespace wsm
