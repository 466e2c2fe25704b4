#pragma once

// Simulation designs: three continuous-outcome designs with a normal selection
// error, a random-coefficient design, and a multinomial-choice design with a
// uniform selection error. Also hosts the brute-force ground truth used to
// score estimators.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsm/rng.hpp"

namespace wsm {

enum class DesignKind { design1, design2, design3, random_coef, multinomial };

std::string_view to_string(DesignKind kind);
DesignKind parse_design_kind(std::string_view name);

/// Y_d = (a_d + eta_d) + X (b_d + e_d).
struct RandomCoefParams {
  double intercept0 = 0.0;
  double intercept1 = 1.0;
  double slope0 = 1.0;
  double slope1 = 2.0;
};

/// Utility of alternative j in {1, 2} under arm d: intercept_d[j-1] + x_j slope_d[j-1].
struct MultinomialParams {
  std::array<double, 2> intercept0{0.0, 1.0};
  std::array<double, 2> intercept1{1.0, 2.0};
  std::array<double, 2> slope0{0.8, 1.0};
  std::array<double, 2> slope1{1.0, 2.0};
};

struct DesignSpec {
  DesignKind kind = DesignKind::design1;
  double rho_v = 0.0;   // corr(outcome error, selection error), normal-selection designs
  double delta = 0.25;  // multinomial dependence on the selection error
  RandomCoefParams rc;
  MultinomialParams mn;

  std::size_t covariate_dim() const { return kind == DesignKind::multinomial ? 2 : 1; }
  bool discrete_outcome() const { return kind == DesignKind::multinomial; }
  /// Normal selection error with D = 1{Z > U}; otherwise uniform with D = 1{U < Z}.
  bool normal_selection() const { return kind != DesignKind::multinomial; }
  void validate() const;
};

inline constexpr std::size_t kMaxCovariates = 2;

struct Observation {
  double y = 0.0;
  int d = 0;
  std::array<double, kMaxCovariates> x{};
  double z = 0.0;
  double p = 0.5;
};

struct Sample {
  DesignSpec design;
  std::uint64_t seed = 0;
  std::size_t dim = 1;
  std::vector<Observation> obs;

  std::size_t size() const { return obs.size(); }
  std::span<const double> x(std::size_t i) const { return {obs[i].x.data(), dim}; }
  std::vector<double> outcomes() const;
  std::vector<double> propensities() const;
  /// Row-major covariates.
  std::vector<double> covariates() const;
};

struct NormalPair {
  double eps = 0.0;
  double u = 0.0;
};

/// eps = rho u + sqrt(1 - rho^2) xi with u, xi independent standard normals.
NormalPair draw_correlated_normal_pair(double rho, RandomStream& stream);

/// Type-1 extreme value with unit variance and the requested mean.
double draw_unit_variance_gumbel(double target_mean, RandomStream& stream);

inline constexpr double kEulerGamma = 0.57721566490153286061;
/// Gumbel scale giving unit variance: sqrt(6) / pi.
double unit_variance_gumbel_scale();

/// Unobservables of one unit. `u` is the selection error on the uniform scale.
struct Disturbances {
  double u = 0.5;
  double eps = 0.0;                          // designs 1-3
  std::array<double, 2> eta{};               // random-coefficient intercept noise, per arm
  std::array<double, 2> slope_noise{};       // random-coefficient slope noise, per arm
  std::array<double, 3> taste{};             // multinomial errors (already shifted/scaled)
};

Disturbances draw_disturbances(const DesignSpec& design, RandomStream& stream);

/// Potential outcome Y_arm for covariates x under the given disturbances.
double potential_outcome(const DesignSpec& design,
                         int arm,
                         std::span<const double> x,
                         const Disturbances& dist);

/// Unit i of the sample is drawn from substream (seed, i), so samples of
/// different sizes share their leading units.
Sample simulate_design(const DesignSpec& design, std::size_t n, std::uint64_t seed);

/// Indices (v_1, v_2) of the two non-base alternatives; v_0 = 0.
std::array<double, 2> multinomial_index(const DesignSpec& design, int arm, std::span<const double> x);

/// Pr(Y_arm = j | X = x, U = u), j = 0, 1, 2: a softmax of (v_j + mean_j(u)) / scale.
std::array<double, 3> multinomial_choice_probs(const DesignSpec& design,
                                               int arm,
                                               std::span<const double> x,
                                               double u);

/// Known propensity P(z) = Pr(D = 1 | Z = z).
double propensity_truth(const DesignSpec& design, double z);

/// Mean and second moment of Y_arm given X = x and uniform selection error u.
struct OutcomeMoments {
  double mean = 0.0;
  double second = 0.0;
  double variance() const { return second - mean * mean; }
};
OutcomeMoments outcome_moments_given_u(const DesignSpec& design,
                                       int arm,
                                       std::span<const double> x,
                                       double u);

struct CovariateBox {
  std::array<double, kMaxCovariates> lo{-1.0, -1.0};
  std::array<double, kMaxCovariates> hi{1.0, 1.0};
  bool contains(std::span<const double> x) const;
};

struct Estimand {
  enum class Kind { mean_y1, mean_y0, cdf_y1, pmf };
  Kind kind = Kind::mean_y1;
  double y = 1.0;      // cdf threshold
  int arm = 1;         // pmf arm
  int category = 1;    // pmf category
  CovariateBox omega;  // pmf conditioning region

  static Estimand mean(int arm);
  static Estimand cdf(double y);
  static Estimand pmf(int arm, int category, CovariateBox omega = {});
};

struct OracleValue {
  double value = 0.0;       // Monte Carlo estimate
  double std_error = 0.0;   // of the Monte Carlo estimate
  std::optional<double> closed_form;

  /// Closed form when available, otherwise the Monte Carlo value.
  double best() const { return closed_form.value_or(value); }
};

/// Ground truth by brute force on draws with exogenous treatment, plus a closed
/// form or deterministic quadrature where one exists.
OracleValue true_value_oracle(const DesignSpec& design,
                              const Estimand& estimand,
                              std::size_t draws,
                              std::uint64_t seed = 20240601);

/// Closed form / quadrature only (cheap; used by the Monte Carlo harness).
std::optional<double> true_value_closed_form(const DesignSpec& design, const Estimand& estimand);

void write_sample_csv(std::ostream& out, const Sample& sample);
Sample read_sample_csv(std::istream& in, const DesignSpec& design);

}  // namespace wsm
