#pragma once

// Deterministic numerical primitives shared by every estimator: the Gaussian
// kernel, Nadaraya-Watson regression, midpoint quadrature, outcome grids and
// Monte Carlo summary statistics.

#include <cstddef>
#include <span>
#include <vector>

#include "wsm/errors.hpp"

namespace wsm {

inline constexpr double kWeightFloor = 1e-300;

/// Standard normal density, the kernel used throughout.
double kernel_weight(double u);

/// Standard normal CDF and its inverse.
double normal_cdf(double x);
double normal_quantile(double p);

/// Row-major design matrix view: `rows` points of dimension `dim`.
struct PointSet {
  std::span<const double> values;
  std::size_t dim = 1;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> point(std::size_t i) const
  {
    return values.subspan(i * dim, dim);
  }
};

/// Nadaraya-Watson estimate at `query` with a product Gaussian kernel.
/// Throws EmptyNeighborhood when the total weight drops below kWeightFloor.
double nw_regress(const PointSet& xs,
                  std::span<const double> ys,
                  std::span<const double> query,
                  std::span<const double> bandwidths);

/// Same, additionally reporting the total kernel weight.
struct NwResult {
  double value = 0.0;
  double weight = 0.0;
};
NwResult nw_regress_weighted(const PointSet& xs,
                             std::span<const double> ys,
                             std::span<const double> query,
                             std::span<const double> bandwidths);

/// Composite midpoint rule with m panels on [a, b].
template <class F>
double midpoint_integrate(F&& f, double a, double b, std::size_t m)
{
  if (m == 0 || !(a <= b))
    throw ConfigError("midpoint_integrate: need a <= b and m >= 1");
  const double step = (b - a) / static_cast<double>(m);
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    sum += f(a + (static_cast<double>(k) + 0.5) * step);
  return sum * step;
}

/// Type-7 sample quantile (linear interpolation between order statistics).
double quantile(std::span<const double> xs, double prob);
double quantile_sorted(std::span<const double> sorted, double prob);
double median(std::span<const double> xs);
double mean(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

struct YGrid {
  std::vector<double> points;
  double lo = 0.0;
  double hi = 0.0;

  std::size_t size() const { return points.size(); }
};

/// Default grid size: ceil(n / 50), at least 5.
std::size_t default_y_grid_size(std::size_t n);

/// Evenly spaced grid between the 2.5% and 97.5% sample quantiles of ys.
YGrid build_y_grid(std::span<const double> ys, std::size_t size);

/// Grid over an explicit set of categories (used for discrete outcomes).
YGrid category_grid(std::span<const double> categories);

struct SummaryRow {
  double mean_bias = 0.0;
  double median_bias = 0.0;
  double rmse = 0.0;
  double mad = 0.0;
  double mse = 0.0;  // always unscaled
  std::size_t n = 0;
  std::size_t replications = 0;
};

/// Bias/RMSE/MAD of estimates around true_value. With `scaled` the first four
/// statistics are divided by true_value, which must then be nonzero.
SummaryRow summary_stats(std::span<const double> estimates,
                         double true_value,
                         bool scaled = true,
                         std::size_t n = 0);

}  // namespace wsm
