#pragma once

// Truncated conditional distribution functions h1*(x,y,p) = E[D 1{Y<=y} | x, p]
// and h0*(x,y,p) = E[(1-D) 1{Y<=y} | x, p], their interval differences, and the
// distance between arm-1 and arm-0 profiles used to find matching covariates.
// For discrete outcomes 1{Y<=y} is replaced by 1{Y=y}.

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "wsm/core_num.hpp"
#include "wsm/dgp.hpp"

namespace wsm {

class HContext {
public:
  enum class Mode { analytic, empirical };

  /// Known design; h* by midpoint integration of F_{g|u} with m panels.
  static HContext analytic(const DesignSpec& design, std::size_t quadrature_m = 200);

  /// Kernel estimates from a sample. `bandwidths` has one entry per covariate
  /// followed by one for the propensity.
  static HContext empirical(const Sample& sample, std::vector<double> bandwidths);

  Mode mode() const { return mode_; }
  bool is_analytic() const { return mode_ == Mode::analytic; }
  const DesignSpec& design() const { return design_; }
  bool discrete() const { return design_.discrete_outcome(); }
  std::size_t quadrature_m() const { return quadrature_m_; }
  const std::vector<double>& bandwidths() const { return bandwidths_; }
  /// Empirical mode only.
  const Sample& sample() const;

private:
  Mode mode_ = Mode::analytic;
  DesignSpec design_;
  std::size_t quadrature_m_ = 200;
  std::vector<double> bandwidths_;
  std::shared_ptr<const Sample> sample_;
};

/// Rule-of-thumb bandwidths for the (X, P) regressors: sd * n^(-1/5), or
/// 1.06 * sd * n^(-1/7) for the multinomial design.
std::vector<double> default_bandwidths(const Sample& sample, double scale = 1.0);

/// F_{g|u}(y; v(x, arm)) = Pr(Y_arm <= y | X = x, U = u), or Pr(Y_arm = y | ...)
/// for discrete outcomes. `u` is on the uniform scale. Analytic mode only.
double f_g_given_u(const HContext& ctx, double y, int arm, std::span<const double> x, double u);

namespace detail {
/// F_{g|u} with q = Phi^{-1}(u) supplied, for callers that reuse quadrature nodes.
double f_g_at_node(const DesignSpec& design, double y, int arm, std::span<const double> x, double u, double q);
}  // namespace detail

double h_star(const HContext& ctx, int arm, std::span<const double> x, double y, double p);

/// h1(x,y,p1,p2) = h1*(p1) - h1*(p2); h0(x,y,p1,p2) = h0*(p2) - h0*(p1). Needs p1 > p2.
double h_interval(const HContext& ctx, int arm, std::span<const double> x, double y, double p1, double p2);

struct PPair {
  double p1 = 0.0;  // p1 > p2
  double p2 = 0.0;
};

/// `size` evenly spaced propensities on [c0, 1 - c0].
std::vector<double> p_grid(std::size_t size, double c0);

/// All ordered pairs (p_a, p_b), a > b, of a grid.
std::vector<PPair> ordered_pairs(std::span<const double> grid);

/// Unit weight when empty.
using YWeight = double (*)(double);

/// sqrt of sum over grid y and pairs of w(y) (h1(x1,y,p1,p2) - h0(x0,y,p1,p2))^2.
double distance_norm(const HContext& ctx,
                     std::span<const double> x1,
                     std::span<const double> x0,
                     const YGrid& grid,
                     std::span<const PPair> pairs,
                     YWeight w = nullptr);

/// Kernel estimate of the density of P given X = x.
double estimate_p_density(const Sample& sample,
                          std::span<const double> x,
                          double p,
                          std::span<const double> bandwidths);

/// {p : f_P(p | x) > c}. Under a known design P is uniform on (0, 1) given X.
class TrimSet {
public:
  TrimSet(const HContext& ctx, std::span<const double> x, double c);

  double density(double p) const;
  bool accepts(double p) const { return density(p) > c_; }
  double threshold() const { return c_; }

private:
  const HContext* ctx_;
  std::vector<double> x_;
  double c_;
};

}  // namespace wsm
