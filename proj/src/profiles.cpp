#include "wsm/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wsm/errors.hpp"

namespace wsm {

ProfileGrid make_profile_grid(YGrid y, std::size_t p_size, double c0)
{
  if (y.points.empty())
    throw ConfigError("profile grid: empty y-grid");
  if (p_size > kMaxPGrid)
    throw ConfigError("profile grid: p-grid larger than 32 points");
  ProfileGrid grid;
  grid.y = std::move(y);
  grid.p = p_grid(p_size, c0);
  for (std::size_t a = 0; a < p_size; ++a)
    for (std::size_t b = 0; b < a; ++b)
      grid.pairs.emplace_back(static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b));
  return grid;
}

namespace {

ProfileTable empty_table(std::size_t units, std::size_t width)
{
  ProfileTable t;
  t.units = units;
  t.width = width;
  t.values.assign(units * width, 0.0);
  t.accepted.assign(units, 0);
  return t;
}

// h1 and h0 hold h*(p_g) up to an additive constant per y, which cancels.
void fill_rows(ProfileSet& out,
               std::size_t i,
               const ProfileGrid& grid,
               const std::vector<double>& h1,  // np x ny, h1*(p_g)
               const std::vector<double>& h0)  // np x ny, h0*(p_g)
{
  const std::size_t ny = grid.y.size();
  double* r1 = out.arm[1].values.data() + i * grid.width();
  double* r0 = out.arm[0].values.data() + i * grid.width();
  for (std::size_t q = 0; q < grid.pairs.size(); ++q) {
    const auto [a, b] = grid.pairs[q];
    for (std::size_t t = 0; t < ny; ++t) {
      r1[q * ny + t] = h1[a * ny + t] - h1[b * ny + t];
      r0[q * ny + t] = h0[b * ny + t] - h0[a * ny + t];
    }
  }
}

ProfileSet analytic_profiles(const HContext& ctx,
                             const ProfileGrid& grid,
                             const PointSet& xs,
                             double trim_c,
                             std::size_t m)
{
  if (m == 0)
    throw ConfigError("build_profiles: nodes_per_cell must be at least 1");
  const DesignSpec& design = ctx.design();
  const std::size_t np = grid.p.size();
  const std::size_t ny = grid.y.size();

  // Midpoint nodes of every cell [p_g, p_{g+1}] with cached quantiles.
  std::vector<double> nodes;
  std::vector<double> qs;
  std::vector<double> steps;
  for (std::size_t g = 0; g + 1 < np; ++g) {
    const double step = (grid.p[g + 1] - grid.p[g]) / static_cast<double>(m);
    steps.push_back(step);
    for (std::size_t k = 0; k < m; ++k) {
      const double u = grid.p[g] + (static_cast<double>(k) + 0.5) * step;
      nodes.push_back(u);
      qs.push_back(design.normal_selection() ? normal_quantile(u) : 0.0);
    }
  }

  ProfileSet out;
  out.arm[0] = empty_table(xs.size(), grid.width());
  out.arm[1] = empty_table(xs.size(), grid.width());
  // Under a known design P is uniform given X, so the density is one everywhere.
  const std::uint32_t mask = 1.0 > trim_c ? static_cast<std::uint32_t>((1ULL << np) - 1) : 0U;

  std::vector<double> cum1(np * ny);
  std::vector<double> cum0(np * ny);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto x = xs.point(i);
    for (int arm = 0; arm < 2; ++arm) {
      auto& cum = arm ? cum1 : cum0;
      for (std::size_t t = 0; t < ny; ++t) {
        double acc = 0.0;
        cum[t] = 0.0;
        for (std::size_t g = 0; g + 1 < np; ++g) {
          double cell = 0.0;
          for (std::size_t k = 0; k < m; ++k) {
            const std::size_t idx = g * m + k;
            cell += detail::f_g_at_node(design, grid.y.points[t], arm, x, nodes[idx], qs[idx]);
          }
          acc += cell * steps[g];
          cum[(g + 1) * ny + t] = acc;
        }
      }
    }
    // h1*(p_g) ~ cum1[g] and h0*(p_g) ~ -cum0[g], up to constants.
    for (double& v : cum0)
      v = -v;
    fill_rows(out, i, grid, cum1, cum0);
    out.arm[0].accepted[i] = mask;
    out.arm[1].accepted[i] = mask;
  }
  return out;
}

ProfileSet empirical_profiles(const HContext& ctx,
                              const ProfileGrid& grid,
                              const PointSet& xs,
                              double trim_c)
{
  const Sample& s = ctx.sample();
  const auto& bw = ctx.bandwidths();
  const std::size_t n = s.size();
  const std::size_t np = grid.p.size();
  const std::size_t ny = grid.y.size();
  if (xs.dim != s.dim)
    throw ConfigError("build_profiles: covariate dimension mismatch");

  // First y-grid slot whose indicator is on for each observation (ny = never).
  std::vector<std::size_t> slot(n);
  for (std::size_t l = 0; l < n; ++l) {
    const double yl = s.obs[l].y;
    if (ctx.discrete()) {
      slot[l] = ny;
      for (std::size_t t = 0; t < ny; ++t)
        if (std::lround(grid.y.points[t]) == std::lround(yl))
          slot[l] = t;
    } else {
      slot[l] = static_cast<std::size_t>(
          std::lower_bound(grid.y.points.begin(), grid.y.points.end(), yl) - grid.y.points.begin());
    }
  }

  const double hp = bw[s.dim];
  std::vector<double> kp(np * n);
  for (std::size_t g = 0; g < np; ++g)
    for (std::size_t l = 0; l < n; ++l) {
      const double u = (grid.p[g] - s.obs[l].p) / hp;
      kp[g * n + l] = std::exp(-0.5 * u * u);
    }

  ProfileSet out;
  out.arm[0] = empty_table(xs.size(), grid.width());
  out.arm[1] = empty_table(xs.size(), grid.width());

  std::vector<double> kx(n);
  std::vector<double> h1(np * ny);
  std::vector<double> h0(np * ny);
  std::vector<double> bin1(ny + 1);
  std::vector<double> bin0(ny + 1);
  const double density_const = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2 / hp;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto x = xs.point(i);
    double kx_total = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      double expo = 0.0;
      for (std::size_t k = 0; k < s.dim; ++k) {
        const double u = (x[k] - s.obs[l].x[k]) / bw[k];
        expo += u * u;
      }
      kx[l] = std::exp(-0.5 * expo);
      kx_total += kx[l];
    }
    std::uint32_t mask = 0;
    for (std::size_t g = 0; g < np; ++g) {
      std::fill(bin1.begin(), bin1.end(), 0.0);
      std::fill(bin0.begin(), bin0.end(), 0.0);
      double den = 0.0;
      const double* kpg = kp.data() + g * n;
      for (std::size_t l = 0; l < n; ++l) {
        const double w = kx[l] * kpg[l];
        den += w;
        (s.obs[l].d ? bin1 : bin0)[slot[l]] += w;
      }
      const double density = kx_total > 0.0 ? den * density_const / kx_total : 0.0;
      const bool ok = den >= kWeightFloor && density > trim_c;
      if (ok)
        mask |= 1U << g;
      // Continuous outcomes accumulate 1{Y <= y}; categories use their own bin.
      double c1 = 0.0;
      double c0 = 0.0;
      for (std::size_t t = 0; t < ny; ++t) {
        if (ctx.discrete()) {
          c1 = bin1[t];
          c0 = bin0[t];
        } else {
          c1 += bin1[t];
          c0 += bin0[t];
        }
        h1[g * ny + t] = ok ? c1 / den : 0.0;
        h0[g * ny + t] = ok ? c0 / den : 0.0;
      }
    }
    fill_rows(out, i, grid, h1, h0);
    out.arm[0].accepted[i] = mask;
    out.arm[1].accepted[i] = mask;
  }
  return out;
}

}  // namespace

ProfileSet build_profiles(const HContext& ctx,
                          const ProfileGrid& grid,
                          const PointSet& xs,
                          double trim_c,
                          std::size_t nodes_per_cell)
{
  if (grid.pairs.empty() || grid.y.points.empty())
    throw ConfigError("build_profiles: empty grid");
  if (ctx.is_analytic())
    return analytic_profiles(ctx, grid, xs, trim_c, nodes_per_cell);
  return empirical_profiles(ctx, grid, xs, trim_c);
}

double profile_distance(const ProfileTable& a,
                        std::size_t i,
                        const ProfileTable& b,
                        std::size_t j,
                        const ProfileGrid& grid)
{
  const auto ra = a.row(i);
  const auto rb = b.row(j);
  const std::uint32_t both = a.accepted[i] & b.accepted[j];
  const std::size_t np = grid.p.size();
  const std::uint32_t full = static_cast<std::uint32_t>((1ULL << np) - 1);
  double total = 0.0;
  if (both == full) {
    for (std::size_t k = 0; k < ra.size(); ++k) {
      const double d = ra[k] - rb[k];
      total += d * d;
    }
    return std::sqrt(total);
  }
  const std::size_t ny = grid.y.size();
  bool any = false;
  for (std::size_t q = 0; q < grid.pairs.size(); ++q) {
    const auto [pa, pb] = grid.pairs[q];
    const std::uint32_t need = (1U << pa) | (1U << pb);
    if ((both & need) != need)
      continue;
    any = true;
    for (std::size_t t = 0; t < ny; ++t) {
      const double d = ra[q * ny + t] - rb[q * ny + t];
      total += d * d;
    }
  }
  return any ? std::sqrt(total) : std::numeric_limits<double>::infinity();
}

}  // namespace wsm
