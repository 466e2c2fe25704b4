#include "wsm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "wsm/core_num.hpp"
#include "wsm/errors.hpp"
#include "wsm/rng.hpp"

namespace wsm {

void EstimatorConfig::validate() const
{
  if (p_grid_size < 2 || p_grid_size > kMaxPGrid)
    throw ConfigError("estimator.p_grid_size must lie in [2, 32]");
  if (y_grid_size == 1)
    throw ConfigError("estimator.y_grid_size must be 0 (automatic) or at least 2");
  if (!(bandwidth_scale > 0.0) || !std::isfinite(bandwidth_scale))
    throw ConfigError("estimator.bandwidth_scale must be positive");
  if (!(trim_c > 0.0))
    throw ConfigError("estimator.trim_c must be positive");
  if (!(trim_c0 > 0.0 && trim_c0 < 0.5))
    throw ConfigError("estimator.trim_c0 must lie in (0, 0.5)");
  if (quadrature_m == 0)
    throw ConfigError("estimator.quadrature_m must be positive");
}

namespace {

void check_arm(int arm)
{
  if (arm != 0 && arm != 1)
    throw ConfigError("arm must be 0 or 1");
}

double positive_sd(std::span<const double> xs)
{
  const double sd = sample_sd(xs);
  return sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
}

double bandwidth_for(std::size_t n, double scale)
{
  return scale * std::pow(static_cast<double>(n), -0.2);
}

Sample prepared(const Sample& sample, const EstimatorConfig& cfg)
{
  cfg.validate();
  if (sample.size() == 0)
    throw ConfigError("estimator: empty sample");
  if (cfg.propensity_mode == PropensityMode::estimated)
    return with_estimated_propensity(sample, cfg.bandwidth_scale);
  return sample;
}

}  // namespace

Sample with_estimated_propensity(const Sample& sample, double bandwidth_scale)
{
  const std::size_t n = sample.size();
  if (n < 2)
    throw ConfigError("estimated propensity: need at least two observations");
  std::vector<double> z(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = sample.obs[i].z;
    d[i] = sample.obs[i].d;
  }
  const double h = bandwidth_scale * 1.06 * positive_sd(z) * std::pow(static_cast<double>(n), -0.2);
  const PointSet zs{z, 1};
  const std::array<double, 1> bw{h};
  Sample out = sample;
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<double, 1> q{z[i]};
    const double p = nw_regress(zs, d, q, bw);
    out.obs[i].p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  }
  return out;
}

Matcher::Matcher(const Sample& sample, const HContext& ctx, const EstimatorConfig& cfg)
    : sample_(sample), cfg_(cfg)
{
  cfg_.validate();
  if (sample_.size() == 0)
    throw ConfigError("Matcher: empty sample");
  if (ctx.design().kind != sample_.design.kind)
    throw ConfigError("Matcher: context and sample designs differ");

  YGrid y;
  if (ctx.discrete()) {
    const std::array<double, 2> cats{1.0, 2.0};
    y = category_grid(cats);
  } else {
    const auto ys = sample_.outcomes();
    const std::size_t size = cfg_.y_grid_size ? cfg_.y_grid_size : default_y_grid_size(ys.size());
    y = build_y_grid(ys, size);
  }
  grid_ = make_profile_grid(std::move(y), cfg_.p_grid_size, cfg_.trim_c0);

  const auto xs = sample_.covariates();
  profiles_ = build_profiles(ctx, grid_, PointSet{xs, sample_.dim}, cfg_.trim_c, cfg_.quadrature_m);
  for (std::size_t i = 0; i < sample_.size(); ++i)
    by_arm_[static_cast<std::size_t>(sample_.obs[i].d)].push_back(i);
  bandwidth_ = bandwidth_for(sample_.size(), cfg_.bandwidth_scale);
}

double Matcher::distance(std::size_t target, int arm, std::size_t donor) const
{
  check_arm(arm);
  return profile_distance(profiles_.arm[arm], target, profiles_.arm[1 - arm], donor, grid_);
}

Matcher::Weights Matcher::weights(std::size_t target, int arm) const
{
  check_arm(arm);
  if (target >= sample_.size())
    throw ConfigError("Matcher: target index out of range");
  Weights out;
  std::vector<double> dist;
  std::vector<double> prop;
  for (std::size_t k : by_arm_[static_cast<std::size_t>(1 - arm)]) {
    const double d = distance(target, arm, k);
    if (!std::isfinite(d))
      continue;
    out.donors.push_back(k);
    dist.push_back(d);
    prop.push_back(sample_.obs[k].p);
  }
  if (out.donors.empty())
    throw EmptyNeighborhood("Matcher: no donor shares a trimmed propensity pair with the target");

  const double hd = positive_sd(dist) * bandwidth_;
  const double hp = positive_sd(prop) * bandwidth_;
  const double p0 = sample_.obs[target].p;
  out.weights.resize(out.donors.size());
  for (std::size_t k = 0; k < out.donors.size(); ++k) {
    const double a = dist[k] / hd;
    const double b = (prop[k] - p0) / hp;
    out.weights[k] = std::exp(-0.5 * (a * a + b * b));
    out.mass += out.weights[k];
  }
  if (!(out.mass >= kWeightFloor))
    throw EmptyNeighborhood("Matcher: total kernel weight below floor");
  return out;
}

MatchResult Matcher::impute(std::size_t target, int arm) const
{
  const Weights w = weights(target, arm);
  double num = 0.0;
  for (std::size_t k = 0; k < w.donors.size(); ++k)
    num += w.weights[k] * sample_.obs[w.donors[k]].y;
  return {target, num / w.mass, w.mass};
}

MatchResult ckt_impute_outcome(const Sample& sample,
                               const HContext& ctx,
                               std::size_t i,
                               const EstimatorConfig& cfg,
                               int arm)
{
  const Matcher matcher(prepared(sample, cfg), ctx, cfg);
  return matcher.impute(i, arm);
}

namespace {

// Per-unit D Y + (1 - D) Y-hat, NaN where imputation failed.
std::vector<double> ckt_contributions(const Sample& sample,
                                      const HContext& ctx,
                                      const EstimatorConfig& cfg,
                                      int arm,
                                      const CovariatePredicate* keep)
{
  check_arm(arm);
  const Sample s = prepared(sample, cfg);
  if (ctx.discrete())
    throw ConfigError("mean estimator needs a continuous outcome design");
  std::vector<double> out(s.size(), std::numeric_limits<double>::quiet_NaN());
  bool need_matching = false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.obs[i].d != arm && (!keep || (*keep)(s.x(i))))
      need_matching = true;
  std::optional<Matcher> matcher;
  if (need_matching)
    matcher.emplace(s, ctx, cfg);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (keep && !(*keep)(s.x(i)))
      continue;
    if (s.obs[i].d == arm) {
      out[i] = s.obs[i].y;
      continue;
    }
    try {
      out[i] = matcher->impute(i, arm).imputed_outcome;
    } catch (const EmptyNeighborhood&) {
    }
  }
  return out;
}

EstimateResult average_surviving(const std::vector<double>& contrib,
                                 const Sample& sample,
                                 const CovariatePredicate* keep)
{
  EstimateResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < contrib.size(); ++i) {
    if (keep && !(*keep)(sample.x(i)))
      continue;
    if (std::isnan(contrib[i])) {
      ++r.dropped;
      continue;
    }
    sum += contrib[i];
    ++r.used;
  }
  if (r.used == 0)
    throw EstimatorUndefined("no unit survived imputation");
  r.estimate = sum / static_cast<double>(r.used);
  return r;
}

}  // namespace

EstimateResult ckt_ate(const Sample& sample, const HContext& ctx, const EstimatorConfig& cfg, int arm)
{
  const auto contrib = ckt_contributions(sample, ctx, cfg, arm, nullptr);
  return average_surviving(contrib, sample, nullptr);
}

EstimateResult ckt_conditional_ate(const Sample& sample,
                                   const HContext& ctx,
                                   const CovariatePredicate& in_a,
                                   const EstimatorConfig& cfg,
                                   int arm)
{
  if (!in_a)
    throw ConfigError("ckt_conditional_ate: missing covariate predicate");
  bool any = false;
  for (std::size_t i = 0; i < sample.size() && !any; ++i)
    any = in_a(sample.x(i));
  if (!any)
    throw EstimatorUndefined("ckt_conditional_ate: no unit with X in A");
  const auto contrib = ckt_contributions(sample, ctx, cfg, arm, &in_a);
  return average_surviving(contrib, sample, &in_a);
}

constexpr std::size_t kVyScan = 256;

EstimateResult vy_ate_infeasible(const Sample& sample, const DesignSpec& design, const EstimatorConfig& cfg)
{
  if (design.kind == DesignKind::multinomial || design.kind == DesignKind::random_coef)
    throw ConfigError("vy benchmark supports design1, design2 and design3 only");
  const Sample s = prepared(sample, cfg);
  const std::size_t n = s.size();

  std::vector<double> cx;
  std::vector<double> cy;
  std::vector<double> cxp;  // (X, P) rows of the controls
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  for (const auto& o : s.obs) {
    xmin = std::min(xmin, o.x[0]);
    xmax = std::max(xmax, o.x[0]);
    if (o.d == 0) {
      cx.push_back(o.x[0]);
      cy.push_back(o.y);
      cxp.push_back(o.x[0]);
      cxp.push_back(o.p);
    }
  }
  std::vector<double> cp;
  for (std::size_t k = 1; k < cxp.size(); k += 2)
    cp.push_back(cxp[k]);
  const double h = bandwidth_for(n, cfg.bandwidth_scale);
  const std::array<double, 2> bw{positive_sd(cx) * h, positive_sd(cp) * h};
  const PointSet controls{cxp, 2};

  const double lo = xmin - 1.0;
  const double hi = xmax + 1.0;
  EstimateResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = s.obs[i];
    if (o.d == 1) {
      sum += o.y;
      ++r.used;
      continue;
    }
    const double u = o.p;
    const std::array<double, 1> xi{o.x[0]};
    const double target = outcome_moments_given_u(design, 1, xi, u).mean;
    const auto gap = [&](double xt) {
      const std::array<double, 1> v{xt};
      return outcome_moments_given_u(design, 0, v, u).mean - target;
    };
    // Scan for sign changes and keep the root nearest the unit's own covariate,
    // as a local solver started at X would.
    double a = 0.0;
    double b = 0.0;
    double fa = 0.0;
    double best = std::numeric_limits<double>::infinity();
    double prev_x = lo;
    double prev_f = gap(lo);
    for (std::size_t k = 1; k <= kVyScan; ++k) {
      const double xk = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(kVyScan);
      const double fk = gap(xk);
      if (prev_f * fk <= 0.0) {
        const double dist = std::min(std::abs(prev_x - o.x[0]), std::abs(xk - o.x[0]));
        if (dist < best) {
          best = dist;
          a = prev_x;
          b = xk;
          fa = prev_f;
        }
      }
      prev_x = xk;
      prev_f = fk;
    }
    if (!std::isfinite(best) || cy.empty()) {
      ++r.dropped;
      continue;
    }
    while (b - a > 1e-8) {
      const double m = 0.5 * (a + b);
      const double fm = gap(m);
      if (fa * fm <= 0.0) {
        b = m;
      } else {
        a = m;
        fa = fm;
      }
    }
    const std::array<double, 2> q{0.5 * (a + b), o.p};
    try {
      sum += nw_regress(controls, cy, q, bw);
      ++r.used;
    } catch (const EmptyNeighborhood&) {
      ++r.dropped;
    }
  }
  if (r.used == 0)
    throw EstimatorUndefined("vy benchmark: no unit survived matching");
  r.estimate = sum / static_cast<double>(r.used);
  return r;
}

namespace {

// Midpoint nodes on [p2, p1] with cached quantiles, for repeated h evaluation.
struct IntervalNodes {
  std::vector<double> u;
  std::vector<double> q;
  double step = 0.0;

  IntervalNodes(const DesignSpec& design, double p1, double p2, std::size_t m)
  {
    step = (p1 - p2) / static_cast<double>(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double uk = p2 + (static_cast<double>(k) + 0.5) * step;
      u.push_back(uk);
      q.push_back(design.normal_selection() ? normal_quantile(uk) : 0.0);
    }
  }

  double integrate(const DesignSpec& design, double y, int arm, std::span<const double> x) const
  {
    double sum = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
      sum += detail::f_g_at_node(design, y, arm, x, u[k], q[k]);
    return sum * step;
  }
};

template <class H0>
TMatch bisect_t(H0&& h0, double target, double lo, double hi, double tol)
{
  if (!(lo < hi))
    throw ConfigError("rc_match_t: need lo < hi");
  if (h0(lo) - target >= 0.0)
    return {lo, true};
  if (h0(hi) - target < 0.0)
    return {hi, true};
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (h0(mid) - target < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return {0.5 * (lo + hi), false};
}

}  // namespace

TMatch rc_match_t(const HContext& ctx,
                  std::span<const double> x,
                  double y,
                  double p1,
                  double p2,
                  double lo,
                  double hi,
                  double tol)
{
  if (!(p1 > p2))
    throw ConfigError("rc_match_t: need p1 > p2");
  if (!(tol > 0.0))
    throw ConfigError("rc_match_t: tolerance must be positive");
  if (ctx.discrete())
    throw ConfigError("rc_match_t: needs a continuous outcome");
  if (ctx.is_analytic()) {
    const IntervalNodes nodes(ctx.design(), p1, p2, ctx.quadrature_m());
    const double target = nodes.integrate(ctx.design(), y, 1, x);
    return bisect_t([&](double t) { return nodes.integrate(ctx.design(), t, 0, x); }, target, lo, hi, tol);
  }
  const double target = h_interval(ctx, 1, x, y, p1, p2);
  return bisect_t([&](double t) { return h_interval(ctx, 0, x, t, p1, p2); }, target, lo, hi, tol);
}

DistributionalResult rc_distributional(const Sample& sample,
                                       const HContext& ctx,
                                       double y,
                                       const EstimatorConfig& cfg)
{
  if (ctx.design().kind != DesignKind::random_coef)
    throw ConfigError("rc_distributional requires the random_coef design");
  const Sample s = prepared(sample, cfg);
  const std::size_t n = s.size();
  if (n < 2)
    throw EstimatorUndefined("rc_distributional: need at least two units");

  std::vector<double> ps = s.propensities();
  {
    std::vector<double> sorted = ps;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back())
      throw EstimatorUndefined("rc_distributional: fewer than two distinct propensities");
  }
  const auto ys = s.outcomes();
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double range = std::max(*ymax_it - *ymin_it, 1.0);
  const double lo = *ymin_it - range;
  const double hi = *ymax_it + range;

  const std::size_t all_pairs = n * (n - 1) / 2;
  const bool exhaustive = cfg.pair_cap == 0 || all_pairs <= cfg.pair_cap;
  const RandomStream pair_root(cfg.pair_seed);

  DistributionalResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = s.obs[i];
    if (o.d == 1) {
      sum += o.y <= y ? 1.0 : 0.0;
      continue;
    }
    const auto x = s.x(i);
    const TrimSet trim(ctx, x, cfg.trim_c);
    double tsum = 0.0;
    std::size_t used = 0;
    const auto add_pair = [&](std::size_t a, std::size_t b) {
      double p1 = ps[a];
      double p2 = ps[b];
      if (p1 == p2)
        return;
      if (p1 < p2)
        std::swap(p1, p2);
      if (!trim.accepts(p1) || !trim.accepts(p2))
        return;
      const TMatch m = rc_match_t(ctx, x, y, p1, p2, lo, hi, 1e-7);
      out.boundary_hits += m.boundary ? 1 : 0;
      tsum += m.t;
      ++used;
    };
    if (exhaustive) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < a; ++b)
          add_pair(a, b);
    } else {
      RandomStream stream = pair_root.substream({0x7a0, i});
      for (std::size_t k = 0; k < cfg.pair_cap; ++k) {
        const std::size_t a = stream.next_u64() % n;
        std::size_t b = stream.next_u64() % (n - 1);
        if (b >= a)
          ++b;
        add_pair(a, b);
      }
    }
    if (used == 0)
      throw EstimatorUndefined("rc_distributional: no propensity pair inside the trim set");
    out.pairs_used += used;
    const double tau = tsum / static_cast<double>(used);
    sum += o.y <= tau ? 1.0 : 0.0;
  }
  out.estimate = sum / static_cast<double>(n);
  return out;
}

double rc_plugin(const Sample& sample, double y, const std::function<double(double, double)>& t)
{
  if (sample.size() == 0)
    throw ConfigError("rc_plugin: empty sample");
  double sum = 0.0;
  for (const auto& o : sample.obs)
    sum += o.d ? (o.y <= y ? 1.0 : 0.0) : (o.y <= t(o.x[0], y) ? 1.0 : 0.0);
  return sum / static_cast<double>(sample.size());
}

PmfResult multinomial_pmf_all(const Sample& sample,
                              const HContext& ctx,
                              int arm,
                              const CovariateBox& omega,
                              const EstimatorConfig& cfg)
{
  check_arm(arm);
  if (!ctx.discrete())
    throw ConfigError("multinomial_pmf_estimate requires the multinomial design");
  const Sample s = prepared(sample, cfg);
  std::vector<std::size_t> members;
  bool need_matching = false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (omega.contains(s.x(i))) {
      members.push_back(i);
      need_matching = need_matching || s.obs[i].d != arm;
    }
  if (members.empty())
    throw EstimatorUndefined("multinomial_pmf_estimate: no unit with X in omega");

  std::optional<Matcher> matcher;
  if (need_matching)
    matcher.emplace(s, ctx, cfg);
  PmfResult out;
  std::array<double, 3> sum{};
  for (std::size_t i : members) {
    const auto& o = s.obs[i];
    if (o.d == arm) {
      const long j = std::lround(o.y);
      if (j >= 0 && j <= 2)
        sum[static_cast<std::size_t>(j)] += 1.0;
      ++out.used;
      continue;
    }
    try {
      const auto w = matcher->weights(i, arm);
      std::array<double, 3> cell{};
      for (std::size_t k = 0; k < w.donors.size(); ++k) {
        const long j = std::lround(s.obs[w.donors[k]].y);
        if (j >= 1 && j <= 2)
          cell[static_cast<std::size_t>(j)] += w.weights[k];
      }
      sum[1] += cell[1] / w.mass;
      sum[2] += cell[2] / w.mass;
      sum[0] += 1.0 - cell[1] / w.mass - cell[2] / w.mass;
      ++out.used;
    } catch (const EmptyNeighborhood&) {
      ++out.dropped;
    }
  }
  if (out.used == 0)
    throw EstimatorUndefined("multinomial_pmf_estimate: no unit survived matching");
  for (std::size_t j = 0; j < 3; ++j)
    out.probs[j] = sum[j] / static_cast<double>(out.used);
  return out;
}

EstimateResult multinomial_pmf_estimate(const Sample& sample,
                                        const HContext& ctx,
                                        int arm,
                                        int category,
                                        const CovariateBox& omega,
                                        const EstimatorConfig& cfg)
{
  if (category < 0 || category > 2)
    throw ConfigError("multinomial category must be 0, 1 or 2");
  const PmfResult all = multinomial_pmf_all(sample, ctx, arm, omega, cfg);
  return {all.probs[static_cast<std::size_t>(category)], all.used, all.dropped};
}

VarianceComponents asymptotic_variance_oracle(const DesignSpec& design, std::size_t draws, std::uint64_t seed)
{
  return asymptotic_variance_oracle(
      design, draws,
      [&design](std::span<const double> x, double u) { return outcome_moments_given_u(design, 1, x, u); },
      seed);
}

VarianceComponents asymptotic_variance_oracle(const DesignSpec& design,
                                              std::size_t draws,
                                              const MomentFn& moments,
                                              std::uint64_t seed)
{
  if (draws < 2)
    throw ConfigError("asymptotic_variance_oracle: need at least two draws");
  constexpr std::size_t m = 32;
  const std::size_t dim = design.covariate_dim();
  const RandomStream root(seed);

  // Welford accumulation of the conditional mean; plain mean of the within term.
  double mean = 0.0;
  double m2 = 0.0;
  double within = 0.0;
  std::array<double, kMaxCovariates> x{};
  for (std::size_t r = 0; r < draws; ++r) {
    RandomStream stream = root.substream({0x5167, r});
    for (std::size_t k = 0; k < dim; ++k)
      x[k] = stream.normal();
    const double p = stream.uniform();  // P is uniform on (0, 1) in every design
    const bool d = stream.uniform() < p;
    const std::span<const double> xs(x.data(), dim);

    const auto cond = [&](double a, double b) {
      OutcomeMoments acc;
      const double step = (b - a) / m;
      for (std::size_t k = 0; k < m; ++k) {
        const auto mo = moments(xs, a + (static_cast<double>(k) + 0.5) * step);
        acc.mean += mo.mean;
        acc.second += mo.second;
      }
      acc.mean /= m;
      acc.second /= m;
      return acc;
    };
    const OutcomeMoments treated = cond(0.0, p);
    const double cm = d ? treated.mean : cond(p, 1.0).mean;
    within += p * std::max(0.0, treated.variance());

    const double delta = cm - mean;
    mean += delta / static_cast<double>(r + 1);
    m2 += delta * (cm - mean);
  }
  VarianceComponents out;
  out.between = m2 / static_cast<double>(draws - 1);
  out.within = within / static_cast<double>(draws);
  return out;
}

}  // namespace wsm
