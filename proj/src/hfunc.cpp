#include "wsm/hfunc.hpp"

#include <cmath>

#include "wsm/errors.hpp"

namespace wsm {

HContext HContext::analytic(const DesignSpec& design, std::size_t quadrature_m)
{
  design.validate();
  if (quadrature_m == 0)
    throw ConfigError("HContext: quadrature_m must be at least 1");
  HContext ctx;
  ctx.mode_ = Mode::analytic;
  ctx.design_ = design;
  ctx.quadrature_m_ = quadrature_m;
  return ctx;
}

HContext HContext::empirical(const Sample& sample, std::vector<double> bandwidths)
{
  if (sample.size() == 0)
    throw ConfigError("HContext: empty sample");
  if (bandwidths.size() != sample.dim + 1)
    throw ConfigError("HContext: need one bandwidth per covariate plus one for P");
  for (double h : bandwidths)
    if (!(h > 0.0) || !std::isfinite(h))
      throw ConfigError("HContext: bandwidths must be positive");
  HContext ctx;
  ctx.mode_ = Mode::empirical;
  ctx.design_ = sample.design;
  ctx.bandwidths_ = std::move(bandwidths);
  ctx.sample_ = std::make_shared<const Sample>(sample);
  return ctx;
}

const Sample& HContext::sample() const
{
  if (!sample_)
    throw ConfigError("HContext: no sample in analytic mode");
  return *sample_;
}

std::vector<double> default_bandwidths(const Sample& sample, double scale)
{
  const std::size_t n = sample.size();
  if (n < 2)
    throw ConfigError("default_bandwidths: need at least two observations");
  const bool mn = sample.design.discrete_outcome();
  const double factor = mn ? 1.06 * std::pow(static_cast<double>(n), -1.0 / 7.0)
                           : std::pow(static_cast<double>(n), -1.0 / 5.0);
  std::vector<double> col(n);
  std::vector<double> out;
  for (std::size_t k = 0; k <= sample.dim; ++k) {
    for (std::size_t i = 0; i < n; ++i)
      col[i] = k < sample.dim ? sample.obs[i].x[k] : sample.obs[i].p;
    double sd = sample_sd(col);
    if (!(sd > 0.0))
      sd = 1.0;
    out.push_back(scale * factor * sd);
  }
  return out;
}

double f_g_given_u(const HContext& ctx, double y, int arm, std::span<const double> x, double u)
{
  if (!ctx.is_analytic())
    throw ConfigError("f_g_given_u: only available for a known design");
  if (!(u > 0.0 && u < 1.0))
    throw DomainError("f_g_given_u: u must lie in (0, 1)");
  const double q = ctx.design().normal_selection() ? normal_quantile(u) : 0.0;
  return detail::f_g_at_node(ctx.design(), y, arm, x, u, q);
}

namespace detail {

double f_g_at_node(const DesignSpec& design, double y, int arm, std::span<const double> x, double u, double q)
{
  if (design.kind == DesignKind::multinomial) {
    const long j = std::lround(y);
    if (j < 0 || j > 2)
      return 0.0;
    return multinomial_choice_probs(design, arm, x, u)[static_cast<std::size_t>(j)];
  }

  const double rho = design.rho_v;
  const double shift = rho * q;
  const double s = std::sqrt(1.0 - rho * rho);
  const double d = arm;
  switch (design.kind) {
    case DesignKind::design1:
      return normal_cdf((y - x[0] - 0.5 * d - shift) / s);
    case DesignKind::design2: {
      const double a = x[0] + 0.5 * d;
      const double b = x[0] + d;
      if (b == 0.0)
        return a <= y ? 1.0 : 0.0;
      const double t = normal_cdf(((y - a) / b - shift) / s);
      return b > 0.0 ? t : 1.0 - t;
    }
    case DesignKind::design3: {
      if (y <= 0.0)
        return 0.0;
      const double r = std::sqrt(y);
      const double c = x[0] + 0.5 * d + shift;
      return normal_cdf((r - c) / s) - normal_cdf((-r - c) / s);
    }
    case DesignKind::random_coef: {
      const double a = arm ? design.rc.intercept1 : design.rc.intercept0;
      const double b = arm ? design.rc.slope1 : design.rc.slope0;
      const double sd = std::sqrt(s * s + x[0] * x[0]);
      return normal_cdf((y - a - b * x[0] - shift) / sd);
    }
    case DesignKind::multinomial:
      break;
  }
  throw ConfigError("f_g_given_u: unsupported design");
}

}  // namespace detail

namespace {

void check_arm(int arm)
{
  if (arm != 0 && arm != 1)
    throw ConfigError("arm must be 0 or 1");
}

double outcome_indicator(bool discrete, double yi, double y)
{
  if (discrete)
    return std::lround(yi) == std::lround(y) ? 1.0 : 0.0;
  return yi <= y ? 1.0 : 0.0;
}

double empirical_h_star(const HContext& ctx, int arm, std::span<const double> x, double y, double p)
{
  const Sample& s = ctx.sample();
  const auto& bw = ctx.bandwidths();
  if (x.size() != s.dim)
    throw ConfigError("h_star: covariate dimension mismatch");
  double num = 0.0;
  double den = 0.0;
  for (const auto& o : s.obs) {
    double expo = 0.0;
    for (std::size_t k = 0; k < s.dim; ++k) {
      const double u = (x[k] - o.x[k]) / bw[k];
      expo += u * u;
    }
    const double up = (p - o.p) / bw[s.dim];
    expo += up * up;
    const double w = std::exp(-0.5 * expo);
    den += w;
    if (o.d == arm)
      num += w * outcome_indicator(ctx.discrete(), o.y, y);
  }
  if (!(den >= kWeightFloor))
    throw EmptyNeighborhood("h_star: total kernel weight below floor");
  return num / den;
}

}  // namespace

double h_star(const HContext& ctx, int arm, std::span<const double> x, double y, double p)
{
  check_arm(arm);
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("h_star: p must lie in (0, 1)");
  if (!ctx.is_analytic())
    return empirical_h_star(ctx, arm, x, y, p);
  const auto f = [&](double u) { return f_g_given_u(ctx, y, arm, x, u); };
  return arm == 1 ? midpoint_integrate(f, 0.0, p, ctx.quadrature_m())
                  : midpoint_integrate(f, p, 1.0, ctx.quadrature_m());
}

double h_interval(const HContext& ctx, int arm, std::span<const double> x, double y, double p1, double p2)
{
  check_arm(arm);
  if (!(p1 > p2))
    throw ConfigError("h_interval: need p1 > p2");
  if (!(p2 > 0.0 && p1 < 1.0))
    throw DomainError("h_interval: propensities must lie in (0, 1)");
  if (ctx.is_analytic()) {
    return midpoint_integrate([&](double u) { return f_g_given_u(ctx, y, arm, x, u); },
                              p2, p1, ctx.quadrature_m());
  }
  const double a = h_star(ctx, arm, x, y, p1);
  const double b = h_star(ctx, arm, x, y, p2);
  return arm == 1 ? a - b : b - a;
}

std::vector<double> p_grid(std::size_t size, double c0)
{
  if (size < 2)
    throw ConfigError("p_grid: need at least two points");
  if (!(c0 > 0.0 && c0 < 0.5))
    throw ConfigError("p_grid: c0 must lie in (0, 0.5)");
  std::vector<double> g(size);
  const double step = (1.0 - 2.0 * c0) / static_cast<double>(size - 1);
  for (std::size_t k = 0; k < size; ++k)
    g[k] = c0 + step * static_cast<double>(k);
  g.back() = 1.0 - c0;
  return g;
}

std::vector<PPair> ordered_pairs(std::span<const double> grid)
{
  std::vector<PPair> out;
  for (std::size_t a = 0; a < grid.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      out.push_back({grid[a], grid[b]});
  return out;
}

double distance_norm(const HContext& ctx,
                     std::span<const double> x1,
                     std::span<const double> x0,
                     const YGrid& grid,
                     std::span<const PPair> pairs,
                     YWeight w)
{
  if (grid.points.empty() || pairs.empty())
    throw ConfigError("distance_norm: empty y-grid or p-pair list");
  double total = 0.0;
  for (const PPair& pp : pairs) {
    if (!(pp.p1 > pp.p2))
      throw ConfigError("distance_norm: p-pairs must satisfy p1 > p2");
    for (double y : grid.points) {
      const double diff = h_interval(ctx, 1, x1, y, pp.p1, pp.p2) -
                          h_interval(ctx, 0, x0, y, pp.p1, pp.p2);
      total += (w ? w(y) : 1.0) * diff * diff;
    }
  }
  return std::sqrt(total);
}

double estimate_p_density(const Sample& sample,
                          std::span<const double> x,
                          double p,
                          std::span<const double> bandwidths)
{
  if (bandwidths.size() != sample.dim + 1)
    throw ConfigError("estimate_p_density: need one bandwidth per covariate plus one for P");
  for (double h : bandwidths)
    if (!(h > 0.0))
      throw ConfigError("estimate_p_density: bandwidths must be positive");
  const double hp = bandwidths[sample.dim];
  double joint = 0.0;
  double marginal = 0.0;
  for (const auto& o : sample.obs) {
    double expo = 0.0;
    for (std::size_t k = 0; k < sample.dim; ++k) {
      const double u = (x[k] - o.x[k]) / bandwidths[k];
      expo += u * u;
    }
    const double kx = std::exp(-0.5 * expo);
    marginal += kx;
    joint += kx * kernel_weight((p - o.p) / hp);
  }
  if (!(marginal > 0.0))
    return 0.0;
  return joint / (marginal * hp);
}

TrimSet::TrimSet(const HContext& ctx, std::span<const double> x, double c)
    : ctx_(&ctx), x_(x.begin(), x.end()), c_(c)
{
  if (!(c > 0.0))
    throw ConfigError("TrimSet: threshold c must be positive");
}

double TrimSet::density(double p) const
{
  if (ctx_->is_analytic())
    return (p > 0.0 && p < 1.0) ? 1.0 : 0.0;
  return estimate_p_density(ctx_->sample(), x_, p, ctx_->bandwidths());
}

}  // namespace wsm
