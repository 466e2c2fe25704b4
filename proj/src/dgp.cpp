#include "wsm/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "wsm/core_num.hpp"
#include "wsm/errors.hpp"

namespace wsm {

std::string_view to_string(DesignKind kind)
{
  switch (kind) {
    case DesignKind::design1: return "design1";
    case DesignKind::design2: return "design2";
    case DesignKind::design3: return "design3";
    case DesignKind::random_coef: return "random_coef";
    case DesignKind::multinomial: return "multinomial";
  }
  throw ConfigError("unknown design kind");
}

DesignKind parse_design_kind(std::string_view name)
{
  for (auto k : {DesignKind::design1, DesignKind::design2, DesignKind::design3,
                 DesignKind::random_coef, DesignKind::multinomial})
    if (to_string(k) == name)
      return k;
  throw ConfigError("unknown design '" + std::string(name) +
                    "' (valid: design1, design2, design3, random_coef, multinomial)");
}

void DesignSpec::validate() const
{
  if (!(std::abs(rho_v) < 1.0))
    throw ConfigError("design.rho_v must satisfy |rho_v| < 1");
  if (!std::isfinite(delta))
    throw ConfigError("design.delta must be finite");
}

std::vector<double> Sample::outcomes() const
{
  std::vector<double> out(obs.size());
  std::transform(obs.begin(), obs.end(), out.begin(), [](const Observation& o) { return o.y; });
  return out;
}

std::vector<double> Sample::propensities() const
{
  std::vector<double> out(obs.size());
  std::transform(obs.begin(), obs.end(), out.begin(), [](const Observation& o) { return o.p; });
  return out;
}

std::vector<double> Sample::covariates() const
{
  std::vector<double> out;
  out.reserve(obs.size() * dim);
  for (const auto& o : obs)
    out.insert(out.end(), o.x.begin(), o.x.begin() + static_cast<std::ptrdiff_t>(dim));
  return out;
}

NormalPair draw_correlated_normal_pair(double rho, RandomStream& stream)
{
  if (!(std::abs(rho) < 1.0))
    throw DomainError("draw_correlated_normal_pair: need |rho| < 1");
  NormalPair out;
  out.u = stream.normal();
  const double xi = stream.normal();
  out.eps = rho * out.u + std::sqrt(1.0 - rho * rho) * xi;
  return out;
}

double unit_variance_gumbel_scale()
{
  return std::sqrt(6.0) / std::numbers::pi;
}

double draw_unit_variance_gumbel(double target_mean, RandomStream& stream)
{
  const double beta = unit_variance_gumbel_scale();
  return beta * (stream.gumbel() - kEulerGamma) + target_mean;
}

Disturbances draw_disturbances(const DesignSpec& design, RandomStream& stream)
{
  Disturbances dist;
  switch (design.kind) {
    case DesignKind::design1:
    case DesignKind::design2:
    case DesignKind::design3: {
      const auto pair = draw_correlated_normal_pair(design.rho_v, stream);
      dist.u = normal_cdf(pair.u);
      dist.eps = pair.eps;
      break;
    }
    case DesignKind::random_coef: {
      const double s = std::sqrt(1.0 - design.rho_v * design.rho_v);
      const double u = stream.normal();
      dist.u = normal_cdf(u);
      for (int d = 0; d < 2; ++d)
        dist.eta[d] = design.rho_v * u + s * stream.normal();
      for (int d = 0; d < 2; ++d)
        dist.slope_noise[d] = stream.normal();
      break;
    }
    case DesignKind::multinomial: {
      dist.u = stream.uniform();
      for (int j = 0; j < 3; ++j)
        dist.taste[j] = draw_unit_variance_gumbel(j * design.delta * dist.u, stream);
      break;
    }
  }
  return dist;
}

double potential_outcome(const DesignSpec& design,
                         int arm,
                         std::span<const double> x,
                         const Disturbances& dist)
{
  const double d = arm;
  switch (design.kind) {
    case DesignKind::design1:
      return x[0] + 0.5 * d + dist.eps;
    case DesignKind::design2:
      return x[0] + 0.5 * d + (x[0] + d) * dist.eps;
    case DesignKind::design3: {
      const double w = x[0] + 0.5 * d + dist.eps;
      return w * w;
    }
    case DesignKind::random_coef: {
      const double a = arm ? design.rc.intercept1 : design.rc.intercept0;
      const double b = arm ? design.rc.slope1 : design.rc.slope0;
      return a + dist.eta[arm] + x[0] * (b + dist.slope_noise[arm]);
    }
    case DesignKind::multinomial: {
      const auto v = multinomial_index(design, arm, x);
      double best = dist.taste[0];
      int choice = 0;
      for (int j = 1; j < 3; ++j) {
        const double util = v[j - 1] + dist.taste[j];
        if (util > best) {
          best = util;
          choice = j;
        }
      }
      return choice;
    }
  }
  throw ConfigError("unknown design kind");
}

std::array<double, 2> multinomial_index(const DesignSpec& design, int arm, std::span<const double> x)
{
  const auto& a = arm ? design.mn.intercept1 : design.mn.intercept0;
  const auto& b = arm ? design.mn.slope1 : design.mn.slope0;
  return {a[0] + x[0] * b[0], a[1] + x[1] * b[1]};
}

std::array<double, 3> multinomial_choice_probs(const DesignSpec& design,
                                               int arm,
                                               std::span<const double> x,
                                               double u)
{
  const auto v = multinomial_index(design, arm, x);
  const double beta = unit_variance_gumbel_scale();
  // The common -gamma*beta location offset cancels in the softmax.
  const std::array<double, 3> s{0.0, (v[0] + design.delta * u) / beta,
                                (v[1] + 2.0 * design.delta * u) / beta};
  const double top = std::max({s[0], s[1], s[2]});
  std::array<double, 3> pr{};
  double total = 0.0;
  for (int j = 0; j < 3; ++j) {
    pr[j] = std::exp(s[j] - top);
    total += pr[j];
  }
  for (double& q : pr)
    q /= total;
  return pr;
}

namespace {

// Covariates, instrument and disturbances of one unit, in a fixed draw order.
struct UnitDraw {
  std::array<double, kMaxCovariates> x{};
  double z = 0.0;
  Disturbances dist;
};

UnitDraw draw_unit(const DesignSpec& design, RandomStream& stream)
{
  UnitDraw unit;
  const std::size_t dim = design.covariate_dim();
  for (std::size_t k = 0; k < dim; ++k)
    unit.x[k] = stream.normal();
  unit.z = design.normal_selection() ? stream.normal() : stream.uniform();
  unit.dist = draw_disturbances(design, stream);
  return unit;
}

}  // namespace

double propensity_truth(const DesignSpec& design, double z)
{
  if (design.normal_selection())
    return normal_cdf(z);
  return std::clamp(z, 0.0, 1.0);
}

Sample simulate_design(const DesignSpec& design, std::size_t n, std::uint64_t seed)
{
  if (n == 0)
    throw ConfigError("simulate_design: n must be at least 1");
  design.validate();
  Sample sample;
  sample.design = design;
  sample.seed = seed;
  sample.dim = design.covariate_dim();
  sample.obs.resize(n);

  const RandomStream root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream stream = root.substream({0x5a11, i});
    const UnitDraw unit = draw_unit(design, stream);
    Observation& o = sample.obs[i];
    o.x = unit.x;
    o.z = unit.z;
    o.p = propensity_truth(design, unit.z);
    // Both selection rules reduce to D = 1{u < P(Z)} on the uniform scale.
    o.d = unit.dist.u < o.p ? 1 : 0;
    o.y = potential_outcome(design, o.d, sample.x(i), unit.dist);
  }
  return sample;
}

OutcomeMoments outcome_moments_given_u(const DesignSpec& design,
                                       int arm,
                                       std::span<const double> x,
                                       double u)
{
  if (!(u > 0.0 && u < 1.0))
    throw DomainError("outcome_moments_given_u: u must lie in (0, 1)");
  const double d = arm;
  OutcomeMoments m;
  if (design.kind == DesignKind::multinomial) {
    const auto pr = multinomial_choice_probs(design, arm, x, u);
    m.mean = pr[1] + 2.0 * pr[2];
    m.second = pr[1] + 4.0 * pr[2];
    return m;
  }
  const double rho = design.rho_v;
  const double shift = rho * normal_quantile(u);
  const double s2 = 1.0 - rho * rho;
  switch (design.kind) {
    case DesignKind::design1: {
      m.mean = x[0] + 0.5 * d + shift;
      m.second = m.mean * m.mean + s2;
      break;
    }
    case DesignKind::design2: {
      const double b = x[0] + d;
      m.mean = x[0] + 0.5 * d + b * shift;
      m.second = m.mean * m.mean + b * b * s2;
      break;
    }
    case DesignKind::design3: {
      // W = x + 0.5d + eps ~ N(c, s2) given u; Y = W^2.
      const double c = x[0] + 0.5 * d + shift;
      m.mean = c * c + s2;
      m.second = c * c * c * c + 6.0 * c * c * s2 + 3.0 * s2 * s2;
      break;
    }
    case DesignKind::random_coef: {
      const double a = arm ? design.rc.intercept1 : design.rc.intercept0;
      const double b = arm ? design.rc.slope1 : design.rc.slope0;
      m.mean = a + x[0] * b + shift;
      m.second = m.mean * m.mean + s2 + x[0] * x[0];
      break;
    }
    case DesignKind::multinomial:
      break;
  }
  return m;
}

bool CovariateBox::contains(std::span<const double> x) const
{
  for (std::size_t k = 0; k < x.size() && k < kMaxCovariates; ++k)
    if (x[k] < lo[k] || x[k] > hi[k])
      return false;
  return true;
}

Estimand Estimand::mean(int arm)
{
  Estimand e;
  e.kind = arm ? Kind::mean_y1 : Kind::mean_y0;
  e.arm = arm;
  return e;
}

Estimand Estimand::cdf(double y)
{
  Estimand e;
  e.kind = Kind::cdf_y1;
  e.y = y;
  return e;
}

Estimand Estimand::pmf(int arm, int category, CovariateBox omega)
{
  if (arm != 0 && arm != 1)
    throw ConfigError("pmf estimand: arm must be 0 or 1");
  if (category < 0 || category > 2)
    throw ConfigError("pmf estimand: category must be 0, 1 or 2");
  Estimand e;
  e.kind = Kind::pmf;
  e.arm = arm;
  e.category = category;
  e.omega = omega;
  return e;
}

namespace {

void check_estimand(const DesignSpec& design, const Estimand& est)
{
  const bool discrete = design.discrete_outcome();
  if (est.kind == Estimand::Kind::pmf && !discrete)
    throw ConfigError("pmf estimand requires the multinomial design");
  if (est.kind != Estimand::Kind::pmf && discrete)
    throw ConfigError("the multinomial design supports only pmf estimands");
}

// Integral of f(x) phi(x) over the real line (covariate is standard normal).
template <class F>
double normal_expectation(F&& f)
{
  return midpoint_integrate(
      [&](double x) { return f(x) * kernel_weight(x); }, -10.0, 10.0, 20000);
}

}  // namespace

std::optional<double> true_value_closed_form(const DesignSpec& design, const Estimand& est)
{
  check_estimand(design, est);
  using K = Estimand::Kind;
  const double rt2 = std::numbers::sqrt2;
  switch (est.kind) {
    case K::mean_y1:
    case K::mean_y0: {
      const int arm = est.kind == K::mean_y1 ? 1 : 0;
      switch (design.kind) {
        case DesignKind::design1:
        case DesignKind::design2:
          return 0.5 * arm;
        case DesignKind::design3:
          return 2.0 + 0.25 * arm;
        case DesignKind::random_coef:
          return arm ? design.rc.intercept1 : design.rc.intercept0;
        case DesignKind::multinomial:
          break;
      }
      return std::nullopt;
    }
    case K::cdf_y1: {
      const double y = est.y;
      switch (design.kind) {
        case DesignKind::design1:
          return normal_cdf((y - 0.5) / rt2);
        case DesignKind::design2:
          return normal_expectation([y](double x) {
            const double a = x + 0.5;
            const double b = x + 1.0;
            if (b == 0.0)
              return a <= y ? 1.0 : 0.0;
            const double t = normal_cdf((y - a) / b);
            return b > 0.0 ? t : 1.0 - t;
          });
        case DesignKind::design3: {
          if (y <= 0.0)
            return 0.0;
          const double r = std::sqrt(y);
          return normal_cdf((r - 0.5) / rt2) - normal_cdf((-r - 0.5) / rt2);
        }
        case DesignKind::random_coef: {
          const double a = design.rc.intercept1;
          const double b = design.rc.slope1;
          return normal_expectation([=](double x) {
            return normal_cdf((y - a - b * x) / std::sqrt(1.0 + x * x));
          });
        }
        case DesignKind::multinomial:
          break;
      }
      return std::nullopt;
    }
    case K::pmf: {
      // Box-restricted normal covariates times the u-average of the choice probability.
      constexpr std::size_t mx = 160;
      constexpr std::size_t mu = 64;
      const auto& box = est.omega;
      double num = 0.0;
      double mass = 0.0;
      const double h1 = (box.hi[0] - box.lo[0]) / mx;
      const double h2 = (box.hi[1] - box.lo[1]) / mx;
      for (std::size_t a = 0; a < mx; ++a) {
        const double x1 = box.lo[0] + (a + 0.5) * h1;
        for (std::size_t b = 0; b < mx; ++b) {
          const double x2 = box.lo[1] + (b + 0.5) * h2;
          const double w = kernel_weight(x1) * kernel_weight(x2);
          const std::array<double, 2> x{x1, x2};
          const double pr = midpoint_integrate(
              [&](double u) {
                return multinomial_choice_probs(design, est.arm, x, u)[est.category];
              },
              0.0, 1.0, mu);
          num += w * pr;
          mass += w;
        }
      }
      return num / mass;
    }
  }
  return std::nullopt;
}

OracleValue true_value_oracle(const DesignSpec& design,
                              const Estimand& est,
                              std::size_t draws,
                              std::uint64_t seed)
{
  if (draws < 2)
    throw ConfigError("true_value_oracle: need at least two draws");
  design.validate();
  check_estimand(design, est);
  using K = Estimand::Kind;

  const RandomStream root(seed);
  const int arm = est.kind == K::mean_y0 ? 0 : (est.kind == K::pmf ? est.arm : 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t used = 0;
  for (std::size_t r = 0; r < draws; ++r) {
    RandomStream stream = root.substream({0x0AC1E, r});
    const UnitDraw unit = draw_unit(design, stream);
    const std::span<const double> x(unit.x.data(), design.covariate_dim());
    if (est.kind == K::pmf && !est.omega.contains(x))
      continue;
    const double y = potential_outcome(design, arm, x, unit.dist);
    double v = 0.0;
    switch (est.kind) {
      case K::mean_y1:
      case K::mean_y0: v = y; break;
      case K::cdf_y1: v = y <= est.y ? 1.0 : 0.0; break;
      case K::pmf: v = y == est.category ? 1.0 : 0.0; break;
    }
    sum += v;
    sum_sq += v * v;
    ++used;
  }
  if (used < 2)
    throw EstimatorUndefined("true_value_oracle: too few draws inside the conditioning set");
  OracleValue out;
  const double m = static_cast<double>(used);
  out.value = sum / m;
  const double var = std::max(0.0, (sum_sq - m * out.value * out.value) / (m - 1.0));
  out.std_error = std::sqrt(var / m);
  out.closed_form = true_value_closed_form(design, est);
  return out;
}

void write_sample_csv(std::ostream& out, const Sample& sample)
{
  out << "y,d";
  for (std::size_t k = 0; k < sample.dim; ++k)
    out << ",x" << (k + 1);
  out << ",z,p\n";
  const auto old_prec = out.precision(17);
  for (const auto& o : sample.obs) {
    out << o.y << ',' << o.d;
    for (std::size_t k = 0; k < sample.dim; ++k)
      out << ',' << o.x[k];
    out << ',' << o.z << ',' << o.p << '\n';
  }
  out.precision(old_prec);
}

Sample read_sample_csv(std::istream& in, const DesignSpec& design)
{
  Sample sample;
  sample.design = design;
  sample.dim = design.covariate_dim();

  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("sample CSV: missing header");
  std::string expected = "y,d";
  for (std::size_t k = 0; k < sample.dim; ++k)
    expected += ",x" + std::to_string(k + 1);
  expected += ",z,p";
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != expected)
    throw ConfigError("sample CSV: expected header '" + expected + "', got '" + line + "'");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        fields.push_back(std::stod(cell, &used));
        if (used != cell.size())
          throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ConfigError("sample CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (fields.size() != sample.dim + 4)
      throw ConfigError("sample CSV line " + std::to_string(lineno) + ": wrong field count");
    Observation o;
    o.y = fields[0];
    if (fields[1] != 0.0 && fields[1] != 1.0)
      throw ConfigError("sample CSV line " + std::to_string(lineno) + ": d must be 0 or 1");
    o.d = static_cast<int>(fields[1]);
    for (std::size_t k = 0; k < sample.dim; ++k)
      o.x[k] = fields[2 + k];
    o.z = fields[2 + sample.dim];
    o.p = fields[3 + sample.dim];
    if (!(o.p > 0.0 && o.p < 1.0))
      throw ConfigError("sample CSV line " + std::to_string(lineno) + ": p must lie in (0, 1)");
    sample.obs.push_back(o);
  }
  if (sample.obs.empty())
    throw ConfigError("sample CSV: no observations");
  return sample;
}

}  // namespace wsm
