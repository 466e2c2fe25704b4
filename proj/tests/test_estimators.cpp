#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "wsm/estimators.hpp"

using namespace wsm;

namespace {

DesignSpec design(DesignKind kind, double rho = 0.0)
{
  DesignSpec d;
  d.kind = kind;
  d.rho_v = rho;
  return d;
}

}  // namespace

TEST_CASE("ckt imputes a constant control outcome exactly")
{
  const DesignSpec d = design(DesignKind::design1);
  Sample s = simulate_design(d, 120, 3);
  for (auto& o : s.obs)
    if (o.d == 0)
      o.y = 2.5;
  const HContext ctx = HContext::analytic(d, 20);
  EstimatorConfig cfg;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.obs[i].d == 0) {
      CHECK(ckt_impute_outcome(s, ctx, i, cfg).imputed_outcome == doctest::Approx(2.5));
      break;
    }
}

TEST_CASE("ckt with every unit treated is the sample mean")
{
  const DesignSpec d = design(DesignKind::design1);
  Sample s = simulate_design(d, 40, 8);
  double sum = 0.0;
  for (auto& o : s.obs) {
    o.d = 1;
    sum += o.y;
  }
  const HContext ctx = HContext::analytic(d, 20);
  const auto r = ckt_ate(s, ctx, EstimatorConfig{});
  CHECK(r.estimate == doctest::Approx(sum / 40));
  CHECK(r.dropped == 0);
}

TEST_CASE("ckt is permutation invariant and the full conditional version matches")
{
  const DesignSpec d = design(DesignKind::design2, 0.25);
  const Sample s = simulate_design(d, 150, 12);
  Sample rev = s;
  std::reverse(rev.obs.begin(), rev.obs.end());
  const HContext ctx = HContext::analytic(d, 20);
  const EstimatorConfig cfg;
  const auto a = ckt_ate(s, ctx, cfg);
  const auto b = ckt_ate(rev, ctx, cfg);
  CHECK(a.estimate == doctest::Approx(b.estimate).epsilon(1e-12));
  const auto all = ckt_conditional_ate(s, ctx, [](std::span<const double>) { return true; }, cfg);
  CHECK(all.estimate == a.estimate);
  CHECK_THROWS_AS(ckt_conditional_ate(s, ctx, [](std::span<const double>) { return false; }, cfg),
                  EstimatorUndefined);
}

TEST_CASE("ckt imputation at large n tracks the matched conditional mean")
{
  const DesignSpec d = design(DesignKind::design1, 0.0);
  const Sample s = simulate_design(d, 3000, 31);
  const HContext ctx = HContext::analytic(d, 20);
  const Matcher m(s, ctx, EstimatorConfig{});
  double err = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < s.size() && count < 40; ++i) {
    const auto& o = s.obs[i];
    if (o.d != 0 || std::abs(o.x[0]) > 1.0)
      continue;
    // Under independence E[Y1 | D = 0, X = x, P] = x + 0.5.
    err += m.impute(i, 1).imputed_outcome - (o.x[0] + 0.5);
    ++count;
  }
  CHECK(std::abs(err / count) < 0.15);
}

TEST_CASE("conditional estimate on a half line")
{
  const DesignSpec d = design(DesignKind::design1, 0.0);
  const Sample s = simulate_design(d, 1000, 2);
  const HContext ctx = HContext::analytic(d, 20);
  const auto r = ckt_conditional_ate(s, ctx, [](std::span<const double> x) { return x[0] <= 0.0; },
                                     EstimatorConfig{});
  // E[Y1 | X <= 0] = 0.5 - phi(0) / Phi(0).
  CHECK(std::abs(r.estimate - (0.5 - 0.3989422804014327 / 0.5)) < 0.15);
}

TEST_CASE("vy benchmark agrees with ckt in the monotone design")
{
  const DesignSpec d = design(DesignKind::design1, 0.0);
  const Sample s = simulate_design(d, 800, 4);
  const HContext ctx = HContext::analytic(d, 20);
  const auto ckt = ckt_ate(s, ctx, EstimatorConfig{});
  const auto vy = vy_ate_infeasible(s, d, EstimatorConfig{});
  CHECK(std::abs(ckt.estimate - vy.estimate) < 0.12);
  CHECK_THROWS_AS(vy_ate_infeasible(s, design(DesignKind::random_coef), EstimatorConfig{}), ConfigError);
}

TEST_CASE("random-coefficient match has the closed form t = y - 1 - x")
{
  const HContext ctx = HContext::analytic(design(DesignKind::random_coef, 0.25), 40);
  const std::vector<double> x0{0.0};
  const std::vector<double> x1{1.0};
  CHECK(rc_match_t(ctx, x0, 1.0, 0.7, 0.3, -20, 20, 1e-10).t == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(rc_match_t(ctx, x1, 1.0, 0.7, 0.3, -20, 20, 1e-10).t == doctest::Approx(-1.0).epsilon(1e-6));
  // Location equivariance.
  const double a = rc_match_t(ctx, x1, 0.4, 0.6, 0.2, -20, 20, 1e-10).t;
  const double b = rc_match_t(ctx, x1, 3.4, 0.6, 0.2, -17, 23, 1e-10).t;
  CHECK(b - a == doctest::Approx(3.0).epsilon(1e-6));
  const auto edge = rc_match_t(ctx, x1, 1.0, 0.7, 0.3, 5, 6);
  CHECK(edge.boundary);
}

TEST_CASE("random-coefficient plug-in with the exact map")
{
  const DesignSpec d = design(DesignKind::random_coef, 0.5);
  const Sample s = simulate_design(d, 4000, 6);
  const double est = rc_plugin(s, 1.0, [](double x, double y) { return y - 1.0 - x; });
  const double se = std::sqrt(0.25 / 4000);
  CHECK(std::abs(est - 0.5) < 3 * se);
}

TEST_CASE("random-coefficient estimator is monotone in y")
{
  const DesignSpec d = design(DesignKind::random_coef, 0.0);
  const Sample s = simulate_design(d, 120, 9);
  const HContext ctx = HContext::analytic(d, 20);
  EstimatorConfig cfg;
  cfg.pair_cap = 10;
  double prev = -1.0;
  for (double y : {-1.0, 0.0, 1.0, 2.0, 3.0}) {
    const auto r = rc_distributional(s, ctx, y, cfg);
    CHECK(r.estimate >= prev);
    CHECK((r.estimate >= 0.0 && r.estimate <= 1.0));
    prev = r.estimate;
  }
}

TEST_CASE("multinomial cell probabilities sum to one")
{
  DesignSpec d = design(DesignKind::multinomial);
  const Sample s = simulate_design(d, 400, 3);
  for (const HContext& ctx : {HContext::analytic(d, 20), HContext::empirical(s, default_bandwidths(s))}) {
    const auto r = multinomial_pmf_all(s, ctx, 1, CovariateBox{}, EstimatorConfig{});
    CHECK(r.probs[0] + r.probs[1] + r.probs[2] == doctest::Approx(1.0));
    for (double p : r.probs)
      CHECK((p >= 0.0 && p <= 1.0));
    const auto single = multinomial_pmf_estimate(s, ctx, 1, 2, CovariateBox{}, EstimatorConfig{});
    CHECK(single.estimate == doctest::Approx(r.probs[2]));
  }
}

TEST_CASE("estimated propensity is close to the truth")
{
  const DesignSpec d = design(DesignKind::design1);
  const Sample s = simulate_design(d, 4000, 1);
  const Sample e = with_estimated_propensity(s);
  double err = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    err += std::abs(e.obs[i].p - s.obs[i].p);
  CHECK(err / 4000 < 0.05);
}

TEST_CASE("asymptotic variance oracle")
{
  const auto v = asymptotic_variance_oracle(design(DesignKind::design1, 0.0), 200000);
  CHECK(v.between >= 0.98);
  CHECK(v.total() == doctest::Approx(1.5).epsilon(0.05));
  const auto zero = asymptotic_variance_oracle(design(DesignKind::design1), 10000,
                                               [](std::span<const double>, double) {
                                                 return OutcomeMoments{3.0, 9.0};
                                               });
  CHECK(zero.total() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("estimator config validation")
{
  EstimatorConfig cfg;
  cfg.trim_c0 = 0.6;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = EstimatorConfig{};
  cfg.bandwidth_scale = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
