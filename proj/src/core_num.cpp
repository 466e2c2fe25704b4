#include "wsm/core_num.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>

namespace wsm {

double kernel_weight(double u)
{
  if (!std::isfinite(u))
    throw DomainError("kernel_weight: non-finite argument");
  return std::exp(-0.5 * u * u) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double normal_cdf(double x)
{
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("normal_quantile: probability must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

namespace {

void check_nw_inputs(const PointSet& xs,
                     std::span<const double> ys,
                     std::span<const double> query,
                     std::span<const double> bandwidths)
{
  if (xs.size() == 0)
    throw ConfigError("nw_regress: no data points");
  if (xs.size() != ys.size())
    throw ConfigError("nw_regress: regressor and response counts differ");
  if (query.size() != xs.dim || bandwidths.size() != xs.dim)
    throw ConfigError("nw_regress: dimension mismatch");
  for (double h : bandwidths)
    if (!(h > 0.0))
      throw ConfigError("nw_regress: bandwidths must be positive");
}

}  // namespace

NwResult nw_regress_weighted(const PointSet& xs,
                             std::span<const double> ys,
                             std::span<const double> query,
                             std::span<const double> bandwidths)
{
  check_nw_inputs(xs, ys, query, bandwidths);
  // Exponents are accumulated in log space; the normalising constant cancels.
  double num = 0.0;
  double den = 0.0;
  const std::size_t dim = xs.dim;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double expo = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double u = (query[k] - xs.values[i * dim + k]) / bandwidths[k];
      expo += u * u;
    }
    const double w = std::exp(-0.5 * expo);
    num += w * ys[i];
    den += w;
  }
  if (!(den >= kWeightFloor))
    throw EmptyNeighborhood("nw_regress: total kernel weight below floor");
  return {num / den, den};
}

double nw_regress(const PointSet& xs,
                  std::span<const double> ys,
                  std::span<const double> query,
                  std::span<const double> bandwidths)
{
  return nw_regress_weighted(xs, ys, query, bandwidths).value;
}

double quantile_sorted(std::span<const double> sorted, double prob)
{
  if (sorted.empty())
    throw ConfigError("quantile: empty input");
  if (!(prob >= 0.0 && prob <= 1.0))
    throw DomainError("quantile: probability outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> xs, double prob)
{
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, prob);
}

double median(std::span<const double> xs)
{
  return quantile(xs, 0.5);
}

double mean(std::span<const double> xs)
{
  if (xs.empty())
    throw ConfigError("mean: empty input");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs)
{
  if (xs.size() < 2)
    return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs)
    ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::size_t default_y_grid_size(std::size_t n)
{
  return std::max<std::size_t>(5, (n + 49) / 50);
}

YGrid build_y_grid(std::span<const double> ys, std::size_t size)
{
  if (ys.empty())
    throw ConfigError("build_y_grid: empty outcome sample");
  if (size < 2)
    throw ConfigError("build_y_grid: grid needs at least two points");
  std::vector<double> sorted(ys.begin(), ys.end());
  std::sort(sorted.begin(), sorted.end());
  YGrid grid;
  grid.lo = quantile_sorted(sorted, 0.025);
  grid.hi = quantile_sorted(sorted, 0.975);
  if (!(grid.hi > grid.lo))
    throw DomainError("build_y_grid: outcome quantile range is a single point");
  grid.points.resize(size);
  const double step = (grid.hi - grid.lo) / static_cast<double>(size - 1);
  for (std::size_t k = 0; k < size; ++k)
    grid.points[k] = grid.lo + step * static_cast<double>(k);
  grid.points.back() = grid.hi;
  return grid;
}

YGrid category_grid(std::span<const double> categories)
{
  if (categories.empty())
    throw ConfigError("category_grid: no categories");
  YGrid grid;
  grid.points.assign(categories.begin(), categories.end());
  if (!std::is_sorted(grid.points.begin(), grid.points.end()) ||
      std::adjacent_find(grid.points.begin(), grid.points.end()) != grid.points.end())
    throw ConfigError("category_grid: categories must be strictly increasing");
  grid.lo = grid.points.front();
  grid.hi = grid.points.back();
  return grid;
}

SummaryRow summary_stats(std::span<const double> estimates,
                         double true_value,
                         bool scaled,
                         std::size_t n)
{
  if (estimates.empty())
    throw ConfigError("summary_stats: no estimates");
  if (scaled && true_value == 0.0)
    throw DomainError("summary_stats: cannot scale by a zero true value");

  std::vector<double> err(estimates.size());
  std::vector<double> abs_err(estimates.size());
  double sq = 0.0;
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    err[r] = estimates[r] - true_value;
    abs_err[r] = std::abs(err[r]);
    sq += err[r] * err[r];
  }
  const double mse = sq / static_cast<double>(estimates.size());
  const double scale = scaled ? std::abs(true_value) : 1.0;

  SummaryRow row;
  row.mean_bias = mean(err) / scale;
  row.median_bias = median(err) / scale;
  row.rmse = std::sqrt(mse) / scale;
  row.mad = median(abs_err) / scale;
  row.mse = mse;
  row.n = n;
  row.replications = estimates.size();
  return row;
}

}  // namespace wsm
