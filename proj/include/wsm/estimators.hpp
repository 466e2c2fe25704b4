#pragma once

// Estimators built on matched covariates: the mean of a potential outcome
// (full sample or a covariate subset), the infeasible mean-matching benchmark,
// the random-coefficient distributional estimator and the multinomial pmf
// estimator, plus the asymptotic-variance oracle.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wsm/dgp.hpp"
#include "wsm/hfunc.hpp"
#include "wsm/profiles.hpp"

namespace wsm {

enum class PropensityMode { known, estimated };

/// Where ckt takes h from: the known design or kernel estimates on the sample.
enum class HMode { analytic, empirical };

struct EstimatorConfig {
  std::size_t y_grid_size = 0;  // 0: ceil(n / 50), at least 5
  std::size_t p_grid_size = 10;
  double bandwidth_scale = 1.0;
  double trim_c = 0.05;
  double trim_c0 = 0.05;
  PropensityMode propensity_mode = PropensityMode::known;
  HMode h_mode = HMode::analytic;
  std::size_t pair_cap = 500;    // per-unit propensity pairs for tau-hat; 0 = all
  std::size_t quadrature_m = 20; // midpoint nodes per propensity cell
  std::uint64_t pair_seed = 0;

  void validate() const;
};

struct MatchResult {
  std::size_t target_index = 0;
  double imputed_outcome = 0.0;
  double effective_weight_mass = 0.0;
};

struct EstimateResult {
  double estimate = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;

  double drop_fraction() const
  {
    const std::size_t total = used + dropped;
    return total ? static_cast<double>(dropped) / static_cast<double>(total) : 0.0;
  }
};

/// Replaces each unit's propensity by a kernel regression of D on Z.
Sample with_estimated_propensity(const Sample& sample, double bandwidth_scale = 1.0);

/// Imputation engine for one sample. Y_arm of a target unit is a kernel
/// regression over donors with D = 1 - arm on (distance between h_arm at the
/// target and h_{1-arm} at the donor, donor propensity), evaluated at
/// (0, target propensity). Both regressors are standardized over the donors.
class Matcher {
public:
  Matcher(const Sample& sample, const HContext& ctx, const EstimatorConfig& cfg);

  struct Weights {
    std::vector<std::size_t> donors;
    std::vector<double> weights;
    double mass = 0.0;
  };

  /// Throws EmptyNeighborhood when the total kernel weight is below the floor.
  Weights weights(std::size_t target, int arm) const;
  MatchResult impute(std::size_t target, int arm) const;
  double distance(std::size_t target, int arm, std::size_t donor) const;

  const ProfileGrid& grid() const { return grid_; }
  const Sample& sample() const { return sample_; }

private:
  Sample sample_;
  EstimatorConfig cfg_;
  ProfileGrid grid_;
  ProfileSet profiles_;
  std::array<std::vector<std::size_t>, 2> by_arm_;
  double bandwidth_ = 0.0;
};

MatchResult ckt_impute_outcome(const Sample& sample,
                               const HContext& ctx,
                               std::size_t i,
                               const EstimatorConfig& cfg,
                               int arm = 1);

/// (1/n) sum of D Y + (1 - D) Y-hat over units whose imputation succeeded;
/// arm 0 gives the mirror estimate of E[Y0].
EstimateResult ckt_ate(const Sample& sample, const HContext& ctx, const EstimatorConfig& cfg, int arm = 1);

using CovariatePredicate = std::function<bool(std::span<const double>)>;

EstimateResult ckt_conditional_ate(const Sample& sample,
                                   const HContext& ctx,
                                   const CovariatePredicate& in_a,
                                   const EstimatorConfig& cfg,
                                   int arm = 1);

/// Mean-matching benchmark with known conditional-mean functions: each control
/// is matched to x-tilde solving mu0(x-tilde, P) = mu1(X, P) by bisection, and
/// Y1 is imputed by a kernel regression of control outcomes at (x-tilde, P).
EstimateResult vy_ate_infeasible(const Sample& sample, const DesignSpec& design, const EstimatorConfig& cfg);

struct TMatch {
  double t = 0.0;
  bool boundary = false;
};

/// Solves h0(x, t, p1, p2) = h1(x, y, p1, p2) for t on [lo, hi] by bisection.
TMatch rc_match_t(const HContext& ctx,
                  std::span<const double> x,
                  double y,
                  double p1,
                  double p2,
                  double lo,
                  double hi,
                  double tol = 1e-9);

struct DistributionalResult {
  double estimate = 0.0;
  std::size_t boundary_hits = 0;
  std::size_t pairs_used = 0;
};

/// (1/n) sum of D 1{Y <= y} + (1 - D) 1{Y <= tau-hat(X, y)}.
DistributionalResult rc_distributional(const Sample& sample,
                                       const HContext& ctx,
                                       double y,
                                       const EstimatorConfig& cfg);

/// Same plug-in average with a supplied outcome map t(x, y).
double rc_plugin(const Sample& sample, double y, const std::function<double(double, double)>& t);

struct PmfResult {
  std::array<double, 3> probs{};  // categories 0, 1, 2; category 0 is the complement
  std::size_t used = 0;
  std::size_t dropped = 0;
};

/// Pr{Y_arm = j | X in omega} for every category, averaging over sample units in omega.
PmfResult multinomial_pmf_all(const Sample& sample,
                              const HContext& ctx,
                              int arm,
                              const CovariateBox& omega,
                              const EstimatorConfig& cfg);

EstimateResult multinomial_pmf_estimate(const Sample& sample,
                                        const HContext& ctx,
                                        int arm,
                                        int category,
                                        const CovariateBox& omega,
                                        const EstimatorConfig& cfg);

struct VarianceComponents {
  double between = 0.0;  // Var(E[Y1 | X, P, D])
  double within = 0.0;   // E[P Var(Y1 | X, P, D = 1)]
  double total() const { return between + within; }
};

/// Moments of Y1 given covariates x and uniform selection error u.
using MomentFn = std::function<OutcomeMoments(std::span<const double>, double)>;

VarianceComponents asymptotic_variance_oracle(const DesignSpec& design,
                                              std::size_t draws,
                                              std::uint64_t seed = 7);
VarianceComponents asymptotic_variance_oracle(const DesignSpec& design,
                                              std::size_t draws,
                                              const MomentFn& moments,
                                              std::uint64_t seed = 7);

}  // namespace wsm
