#include <doctest.h>

#include <cmath>
#include <vector>

#include "wsm/hfunc.hpp"
#include "wsm/rng.hpp"

using namespace wsm;

namespace {

DesignSpec design(DesignKind kind, double rho = 0.0)
{
  DesignSpec d;
  d.kind = kind;
  d.rho_v = rho;
  return d;
}

std::vector<double> one(double x) { return {x}; }

}  // namespace

TEST_CASE("conditional outcome distribution, known designs")
{
  const HContext d1 = HContext::analytic(design(DesignKind::design1));
  for (double u : {0.1, 0.5, 0.93})
    CHECK(f_g_given_u(d1, 0.5, 1, one(0.0), u) == doctest::Approx(0.5));
  const HContext d3 = HContext::analytic(design(DesignKind::design3, 0.25));
  CHECK(f_g_given_u(d3, -0.1, 1, one(0.3), 0.4) == 0.0);

  // Design 3 against its defining interval probability.
  const double rho = 0.25;
  const double u = 0.4;
  const double c = 0.3 + 0.5 + rho * normal_quantile(u);
  const double s = std::sqrt(1 - rho * rho);
  const double want = normal_cdf((std::sqrt(2.0) - c) / s) - normal_cdf((-std::sqrt(2.0) - c) / s);
  CHECK(f_g_given_u(d3, 2.0, 1, one(0.3), u) == doctest::Approx(want).epsilon(1e-12));

  DesignSpec flat = design(DesignKind::multinomial);
  flat.delta = 0.0;
  flat.mn.intercept1 = {0.0, 0.0};
  flat.mn.slope1 = {0.0, 0.0};
  const HContext mn = HContext::analytic(flat);
  const std::vector<double> x{0.3, -1.2};
  for (double y : {0.0, 1.0, 2.0})
    CHECK(f_g_given_u(mn, y, 1, x, 0.7) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("h star of design 1")
{
  const HContext ctx = HContext::analytic(design(DesignKind::design1));
  CHECK(h_star(ctx, 1, one(0.0), 0.5, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
  for (double p : {0.1, 0.5, 0.9})
    CHECK(std::abs(h_star(ctx, 1, one(0.2), 60.0, p) - p) < 1e-6);
  // Constant integrand under independence.
  for (double y : {-1.0, 0.3, 1.7})
    CHECK(h_interval(ctx, 1, one(0.4), y, 0.8, 0.3) ==
          doctest::Approx(0.5 * normal_cdf(y - 0.4 - 0.5)).epsilon(1e-12));
  CHECK_THROWS_AS(h_interval(ctx, 1, one(0.0), 0.0, 0.3, 0.3), ConfigError);
}

TEST_CASE("h star bounds and monotonicity")
{
  // Midpoint error near the endpoint where the selection quantile diverges.
  const double tol = 1e-6;
  RandomStream s(5);
  for (auto kind : {DesignKind::design1, DesignKind::design2, DesignKind::design3}) {
    const HContext ctx = HContext::analytic(design(kind, 0.5), 100);
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> x{2.0 * s.normal()};
      const double y = 3.0 * s.normal();
      const double p = 0.02 + 0.96 * s.uniform();
      const double h1 = h_star(ctx, 1, x, y, p);
      const double h0 = h_star(ctx, 0, x, y, p);
      CHECK((h1 >= 0.0 && h1 <= p + 1e-12));
      CHECK((h0 >= 0.0 && h0 <= 1.0 - p + 1e-12));
      CHECK(h_star(ctx, 1, x, y + 0.3, p) >= h1 - 1e-12);
      CHECK(h_star(ctx, 0, x, y + 0.3, p) >= h0 - 1e-12);
      CHECK(h_star(ctx, 1, x, y, std::min(p + 0.01, 0.999)) >= h1 - tol);
      CHECK(h_star(ctx, 0, x, y, std::min(p + 0.01, 0.999)) <= h0 + tol);
    }
  }
}

TEST_CASE("h1 star plus h0 star is the conditional outcome cdf")
{
  const DesignSpec d = design(DesignKind::design2, 0.5);
  const HContext ctx = HContext::analytic(d, 400);
  const std::vector<double> x{0.7};
  const double p = 0.35;
  const double y = 1.1;
  RandomStream s(21);
  const int m = 200000;
  int hits = 0;
  for (int k = 0; k < m; ++k) {
    const auto dist = draw_disturbances(d, s);
    const int dd = dist.u < p ? 1 : 0;
    hits += potential_outcome(d, dd, x, dist) <= y;
  }
  const double mc = static_cast<double>(hits) / m;
  const double se = std::sqrt(mc * (1 - mc) / m);
  CHECK(std::abs(h_star(ctx, 1, x, y, p) + h_star(ctx, 0, x, y, p) - mc) < 4 * se + 1e-4);
}

TEST_CASE("distance norm vanishes at the matched covariate")
{
  const HContext ctx = HContext::analytic(design(DesignKind::design1, 0.25), 200);
  std::vector<double> ys;
  for (int k = 0; k < 8; ++k)
    ys.push_back(-2.0 + 0.5 * k);
  const YGrid grid{ys, ys.front(), ys.back()};
  const auto ps = p_grid(10, 0.05);
  const auto pairs = ordered_pairs(ps);
  CHECK(pairs.size() == 45);
  CHECK(distance_norm(ctx, one(0.3), one(0.8), grid, pairs) < 1e-8);
  double prev = 0.0;
  for (double delta : {0.05, 0.1, 0.2, 0.4}) {
    const double dist = distance_norm(ctx, one(0.3), one(0.8 + delta), grid, pairs);
    CHECK(dist > prev);
    prev = dist;
  }
  CHECK_THROWS_AS(distance_norm(ctx, one(0.3), one(0.8), grid, {}), ConfigError);
}

TEST_CASE("propensity grid")
{
  const auto g = p_grid(10, 0.05);
  REQUIRE(g.size() == 10);
  CHECK(g.front() == doctest::Approx(0.05));
  CHECK(g.back() == doctest::Approx(0.95));
}

TEST_CASE("empirical h star approaches the analytic value")
{
  const DesignSpec d = design(DesignKind::design1, 0.25);
  const Sample s = simulate_design(d, 100000, 17);
  const HContext emp = HContext::empirical(s, default_bandwidths(s));
  const HContext an = HContext::analytic(d);
  CHECK_FALSE(emp.is_analytic());
  for (double p : {0.3, 0.6})
    for (int arm : {0, 1})
      CHECK(std::abs(h_star(emp, arm, one(0.2), 0.5, p) - h_star(an, arm, one(0.2), 0.5, p)) < 0.02);
  CHECK_THROWS_AS(f_g_given_u(emp, 0.0, 1, one(0.0), 0.5), ConfigError);
  CHECK_THROWS_AS(HContext::empirical(s, {0.1, 0.0}), ConfigError);
}

TEST_CASE("trimming sets")
{
  const DesignSpec d = design(DesignKind::design1);
  const HContext an = HContext::analytic(d);
  const TrimSet t(an, one(0.0), 0.05);
  CHECK(t.accepts(0.5));
  CHECK(t.density(0.5) == 1.0);
  const Sample s = simulate_design(d, 20000, 4);
  const auto bw = default_bandwidths(s);
  // P is uniform and independent of X.
  CHECK(estimate_p_density(s, one(0.0), 0.5, bw) == doctest::Approx(1.0).epsilon(0.15));
  const HContext emp = HContext::empirical(s, bw);
  const TrimSet te(emp, one(0.0), 0.5);
  CHECK(te.accepts(0.5));
  CHECK_FALSE(TrimSet(emp, one(9.0), 0.5).accepts(0.5));
}
