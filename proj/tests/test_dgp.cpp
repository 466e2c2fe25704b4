#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "wsm/core_num.hpp"
#include "wsm/dgp.hpp"
#include "wsm/errors.hpp"
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

}  // namespace

TEST_CASE("random streams are deterministic and substreams differ")
{
  RandomStream a(42);
  RandomStream b(42);
  for (int k = 0; k < 10; ++k)
    CHECK(a.next_u64() == b.next_u64());
  const auto s1 = RandomStream(42).substream({1, 2});
  const auto s2 = RandomStream(42).substream({2, 1});
  CHECK(s1.key() != s2.key());
  CHECK(RandomStream(42).substream({1, 2}).key() == s1.key());
  RandomStream u(7);
  for (int k = 0; k < 1000; ++k) {
    const double v = u.uniform();
    CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("normal and gumbel draws have the right moments")
{
  RandomStream s(3);
  const int m = 200000;
  double n1 = 0.0;
  double n2 = 0.0;
  double g1 = 0.0;
  double g2 = 0.0;
  for (int k = 0; k < m; ++k) {
    const double z = s.normal();
    n1 += z;
    n2 += z * z;
    const double g = draw_unit_variance_gumbel(0.3, s);
    g1 += g;
    g2 += g * g;
  }
  n1 /= m;
  n2 /= m;
  g1 /= m;
  g2 /= m;
  CHECK(std::abs(n1) < 0.01);
  CHECK(n2 == doctest::Approx(1.0).epsilon(0.015));
  CHECK(g1 == doctest::Approx(0.3).epsilon(0.03));
  CHECK(g2 - g1 * g1 == doctest::Approx(1.0).epsilon(0.03));
  CHECK(unit_variance_gumbel_scale() == doctest::Approx(std::sqrt(6.0) / std::numbers::pi));
}

TEST_CASE("correlated normal pair")
{
  RandomStream s(9);
  const int m = 200000;
  double xy = 0.0;
  double xx = 0.0;
  double yy = 0.0;
  for (int k = 0; k < m; ++k) {
    const auto p = draw_correlated_normal_pair(0.5, s);
    xy += p.eps * p.u;
    xx += p.eps * p.eps;
    yy += p.u * p.u;
  }
  CHECK(xy / std::sqrt(xx * yy) == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("propensity truth")
{
  CHECK(propensity_truth(design(DesignKind::design1), 0.0) == doctest::Approx(0.5));
  CHECK(propensity_truth(design(DesignKind::random_coef), 0.0) == doctest::Approx(0.5));
  CHECK(propensity_truth(design(DesignKind::multinomial), 0.3) == doctest::Approx(0.3));
  CHECK(propensity_truth(design(DesignKind::design2), -0.2) < propensity_truth(design(DesignKind::design2), 0.1));
}

TEST_CASE("treatment frequency at fixed z matches the propensity")
{
  for (auto kind : {DesignKind::design1, DesignKind::random_coef, DesignKind::multinomial}) {
    const DesignSpec d = design(kind, 0.25);
    const double z = kind == DesignKind::multinomial ? 0.3 : 0.4;
    RandomStream s(11);
    const int m = 200000;
    int treated = 0;
    for (int k = 0; k < m; ++k) {
      const auto dist = draw_disturbances(d, s);
      treated += dist.u < propensity_truth(d, z);
    }
    CHECK(static_cast<double>(treated) / m == doctest::Approx(propensity_truth(d, z)).epsilon(0.02));
  }
}

TEST_CASE("simulated samples are deterministic and share leading units")
{
  const DesignSpec d = design(DesignKind::design2, 0.5);
  const Sample a = simulate_design(d, 50, 5);
  const Sample b = simulate_design(d, 50, 5);
  const Sample c = simulate_design(d, 80, 5);
  const Sample e = simulate_design(d, 50, 6);
  bool differs = false;
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.obs[i].y == b.obs[i].y);
    CHECK(a.obs[i].y == c.obs[i].y);
    CHECK(a.obs[i].p == doctest::Approx(normal_cdf(a.obs[i].z)));
    differs |= a.obs[i].y != e.obs[i].y;
  }
  CHECK(differs);
}

TEST_CASE("design 1 outcomes follow the linear index")
{
  const DesignSpec d = design(DesignKind::design1, 0.0);
  const Sample s = simulate_design(d, 20000, 3);
  double treated_mean = 0.0;
  int treated = 0;
  for (const auto& o : s.obs) {
    CHECK((o.d == 0 || o.d == 1));
    if (o.d) {
      treated_mean += o.y;
      ++treated;
    }
  }
  // Independence: E[Y | D = 1] = E[X] + 0.5.
  CHECK(treated_mean / treated == doctest::Approx(0.5).epsilon(0.06));
  CHECK(static_cast<double>(treated) / 20000 == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("multinomial outcomes are categories and choice probabilities are a softmax")
{
  const DesignSpec d = design(DesignKind::multinomial);
  const Sample s = simulate_design(d, 500, 2);
  for (const auto& o : s.obs)
    CHECK((o.y == 0.0 || o.y == 1.0 || o.y == 2.0));
  const std::vector<double> x{0.2, -0.4};
  const auto p = multinomial_choice_probs(d, 1, x, 0.6);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  const double beta = unit_variance_gumbel_scale();
  const auto v = multinomial_index(d, 1, x);
  const double e1 = std::exp((v[0] + 0.25 * 0.6) / beta);
  const double e2 = std::exp((v[1] + 0.5 * 0.6) / beta);
  CHECK(p[1] == doctest::Approx(e1 / (1.0 + e1 + e2)).epsilon(1e-12));
}

TEST_CASE("closed-form true values")
{
  CHECK(*true_value_closed_form(design(DesignKind::design1), Estimand::mean(1)) == doctest::Approx(0.5));
  CHECK(*true_value_closed_form(design(DesignKind::design3), Estimand::mean(1)) == doctest::Approx(2.25));
  CHECK(*true_value_closed_form(design(DesignKind::random_coef), Estimand::cdf(1.0)) ==
        doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("brute-force oracle agrees with closed forms")
{
  const auto o3 = true_value_oracle(design(DesignKind::design3, 0.5), Estimand::mean(1), 400000);
  CHECK(std::abs(o3.value - 2.25) < 4.0 * o3.std_error);
  const auto orc = true_value_oracle(design(DesignKind::random_coef, 0.25), Estimand::cdf(1.0), 400000);
  CHECK(std::abs(orc.value - 0.5) < 4.0 * orc.std_error);
  const DesignSpec mn = design(DesignKind::multinomial);
  const auto om = true_value_oracle(mn, Estimand::pmf(1, 1), 400000);
  REQUIRE(om.closed_form.has_value());
  CHECK(std::abs(om.value - *om.closed_form) < 4.0 * om.std_error);
}

TEST_CASE("sample csv round trip")
{
  const DesignSpec d = design(DesignKind::multinomial);
  const Sample s = simulate_design(d, 7, 1);
  std::stringstream ss;
  write_sample_csv(ss, s);
  CHECK(ss.str().rfind("y,d,x1,x2,z,p\n", 0) == 0);
  const Sample r = read_sample_csv(ss, d);
  REQUIRE(r.size() == 7);
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(r.obs[i].y == s.obs[i].y);
    CHECK(r.obs[i].x[1] == s.obs[i].x[1]);
    CHECK(r.obs[i].p == s.obs[i].p);
  }
  std::stringstream bad("y,d,x1,z,p\n1,2,0,0,0.5\n");
  CHECK_THROWS_AS(read_sample_csv(bad, design(DesignKind::design1)), ConfigError);
}

TEST_CASE("design validation")
{
  DesignSpec d = design(DesignKind::design1, 1.0);
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK_THROWS_AS(parse_design_kind("design9"), ConfigError);
  CHECK(parse_design_kind("random_coef") == DesignKind::random_coef);
}
