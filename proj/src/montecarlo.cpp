#include "wsm/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "wsm/errors.hpp"
#include "wsm/hfunc.hpp"
#include "wsm/rng.hpp"

namespace wsm {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(EstimatorId id)
{
  switch (id) {
    case EstimatorId::ckt: return "ckt";
    case EstimatorId::vy: return "vy";
    case EstimatorId::rc: return "rc";
    case EstimatorId::pmf_infeasible: return "pmf_infeasible";
    case EstimatorId::pmf_feasible: return "pmf_feasible";
  }
  throw ConfigError("unknown estimator id");
}

EstimatorId parse_estimator_id(std::string_view name)
{
  for (auto id : {EstimatorId::ckt, EstimatorId::vy, EstimatorId::rc, EstimatorId::pmf_infeasible,
                  EstimatorId::pmf_feasible})
    if (to_string(id) == name)
      return id;
  throw ConfigError("unknown estimator '" + std::string(name) +
                    "' (valid: ckt, vy, rc, pmf_infeasible, pmf_feasible)");
}

std::string target_label(const Estimand& e)
{
  char buf[64];
  switch (e.kind) {
    case Estimand::Kind::mean_y1: return "E[Y1]";
    case Estimand::Kind::mean_y0: return "E[Y0]";
    case Estimand::Kind::cdf_y1:
      std::snprintf(buf, sizeof buf, "Pr{Y1<=%g}", e.y);
      return buf;
    case Estimand::Kind::pmf:
      std::snprintf(buf, sizeof buf, "Pr{Y%d=%d|omega}", e.arm, e.category);
      return buf;
  }
  return "?";
}

void StudyConfig::validate() const
{
  design.validate();
  cfg.validate();
  if (replications < 1)
    throw ConfigError("mc.replications must be at least 1");
  if (sample_sizes.empty())
    throw ConfigError("mc.sample_sizes must not be empty");
  for (std::size_t n : sample_sizes)
    if (n < 2)
      throw ConfigError("mc.sample_sizes entries must be at least 2");
  if (estimators.empty())
    throw ConfigError("mc.estimators must not be empty");
  if (threads < 1)
    throw ConfigError("mc.threads must be at least 1");

  using K = Estimand::Kind;
  const bool mn = design.kind == DesignKind::multinomial;
  for (EstimatorId id : estimators) {
    const std::string name(to_string(id));
    switch (id) {
      case EstimatorId::ckt:
        if (mn || (estimand.kind != K::mean_y1 && estimand.kind != K::mean_y0))
          throw ConfigError("estimator ckt needs a continuous design and a mean estimand");
        break;
      case EstimatorId::vy:
        if (design.kind == DesignKind::random_coef || mn || estimand.kind != K::mean_y1)
          throw ConfigError("estimator vy needs design1, design2 or design3 and estimand mean_y1");
        break;
      case EstimatorId::rc:
        if (design.kind != DesignKind::random_coef || estimand.kind != K::cdf_y1)
          throw ConfigError("estimator rc needs the random_coef design and estimand cdf_y1");
        break;
      case EstimatorId::pmf_infeasible:
      case EstimatorId::pmf_feasible:
        if (!mn)
          throw ConfigError("estimator " + name + " needs the multinomial design");
        break;
    }
  }
  if (!mn && estimand.kind == K::pmf)
    throw ConfigError("pmf estimands need the multinomial design");
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t n, std::size_t r)
{
  return RandomStream(seed).substream({0x4d43, n, r}).key();
}

namespace {

// One reported quantity of one estimator. Vector slots hold the per-replication
// sum of squared errors over categories 1 and 2 instead of an estimate.
struct Slot {
  EstimatorId estimator;
  std::string target;
  double truth = 0.0;
  bool vector = false;
  int arm = 1;
  int category = 0;
  std::array<double, 2> vector_truth{};
};

struct RepOutput {
  std::vector<double> values;  // per slot, NaN when undefined
  std::vector<double> drops;   // per slot
};

std::vector<Slot> make_slots(const StudyConfig& study)
{
  std::vector<Slot> slots;
  const bool mn = study.design.kind == DesignKind::multinomial;
  std::array<std::array<double, 3>, 2> pmf_truth{};
  if (mn) {
    for (int arm = 0; arm < 2; ++arm)
      for (int j = 1; j <= 2; ++j)
        pmf_truth[arm][j] = *true_value_closed_form(study.design, Estimand::pmf(arm, j));
  }
  for (EstimatorId id : study.estimators) {
    if (!mn) {
      const auto truth = true_value_closed_form(study.design, study.estimand);
      if (!truth)
        throw ConfigError("no closed-form true value for this design and estimand");
      slots.push_back({id, target_label(study.estimand), *truth, false, 1, 0, {}});
      continue;
    }
    for (int arm = 0; arm < 2; ++arm)
      for (int j = 1; j <= 2; ++j)
        slots.push_back({id, target_label(Estimand::pmf(arm, j)), pmf_truth[arm][j], false, arm, j, {}});
    for (int arm = 0; arm < 2; ++arm)
      slots.push_back({id, "F[Y" + std::to_string(arm) + "|omega]", kNaN, true, arm, 0,
                       {pmf_truth[arm][1], pmf_truth[arm][2]}});
  }
  return slots;
}

RepOutput run_replication(const StudyConfig& study,
                          const std::vector<Slot>& slots,
                          const HContext& analytic,
                          std::size_t n,
                          std::size_t r)
{
  const std::uint64_t seed = replication_seed(study.seed, n, r);
  const Sample sample = simulate_design(study.design, n, seed);
  RepOutput out;
  out.values.assign(slots.size(), kNaN);
  out.drops.assign(slots.size(), kNaN);

  EstimatorConfig cfg = study.cfg;
  cfg.pair_seed = mix64(seed ^ 0x9a1f);

  std::size_t s = 0;
  while (s < slots.size()) {
    const EstimatorId id = slots[s].estimator;
    std::size_t end = s;
    while (end < slots.size() && slots[end].estimator == id)
      ++end;
    try {
      switch (id) {
        case EstimatorId::ckt: {
          const int arm = study.estimand.kind == Estimand::Kind::mean_y0 ? 0 : 1;
          const auto res =
              cfg.h_mode == HMode::analytic
                  ? ckt_ate(sample, analytic, cfg, arm)
                  : ckt_ate(sample, HContext::empirical(sample, default_bandwidths(sample, cfg.bandwidth_scale)), cfg, arm);
          out.values[s] = res.estimate;
          out.drops[s] = res.drop_fraction();
          break;
        }
        case EstimatorId::vy: {
          const auto res = vy_ate_infeasible(sample, study.design, cfg);
          out.values[s] = res.estimate;
          out.drops[s] = res.drop_fraction();
          break;
        }
        case EstimatorId::rc: {
          const auto res = rc_distributional(sample, analytic, study.estimand.y, cfg);
          out.values[s] = res.estimate;
          out.drops[s] = 0.0;
          break;
        }
        case EstimatorId::pmf_infeasible:
        case EstimatorId::pmf_feasible: {
          const HContext ctx = id == EstimatorId::pmf_infeasible
                                   ? analytic
                                   : HContext::empirical(sample, default_bandwidths(sample, cfg.bandwidth_scale));
          for (int arm = 0; arm < 2; ++arm) {
            PmfResult res;
            try {
              res = multinomial_pmf_all(sample, ctx, arm, CovariateBox{}, cfg);
            } catch (const EstimatorUndefined&) {
              continue;
            }
            const double drop = static_cast<double>(res.dropped) /
                                static_cast<double>(std::max<std::size_t>(1, res.used + res.dropped));
            for (std::size_t q = s; q < end; ++q) {
              const Slot& slot = slots[q];
              if (slot.arm != arm)
                continue;
              out.drops[q] = drop;
              if (slot.vector) {
                const double e1 = res.probs[1] - slot.vector_truth[0];
                const double e2 = res.probs[2] - slot.vector_truth[1];
                out.values[q] = e1 * e1 + e2 * e2;
              } else {
                out.values[q] = res.probs[static_cast<std::size_t>(slot.category)];
              }
            }
          }
          break;
        }
      }
    } catch (const EstimatorUndefined&) {
    } catch (const EmptyNeighborhood&) {
    }
    s = end;
  }
  return out;
}

StudyRow summarize(const StudyConfig& study,
                   const Slot& slot,
                   std::size_t n,
                   const std::vector<RepOutput>& reps,
                   std::size_t index)
{
  StudyRow row;
  row.design = study.design;
  row.n = n;
  row.estimator = slot.estimator;
  row.target = slot.target;
  row.true_value = slot.truth;

  std::vector<double> vals;
  double drop_sum = 0.0;
  std::size_t drop_count = 0;
  for (const auto& rep : reps) {
    const double v = rep.values[index];
    if (std::isnan(v)) {
      ++row.failures;
      continue;
    }
    vals.push_back(v);
    if (!std::isnan(rep.drops[index])) {
      drop_sum += rep.drops[index];
      ++drop_count;
    }
  }
  row.drop_fraction = drop_count ? drop_sum / static_cast<double>(drop_count) : kNaN;
  row.stats.n = n;
  row.stats.replications = vals.size();
  if (vals.empty()) {
    row.stats.mean_bias = row.stats.median_bias = row.stats.rmse = row.stats.mad = row.stats.mse = kNaN;
    return row;
  }
  if (slot.vector) {
    row.stats = SummaryRow{kNaN, kNaN, kNaN, kNaN, mean(vals), n, vals.size()};
    return row;
  }
  const bool scaled = study.design.kind != DesignKind::multinomial && slot.truth != 0.0;
  row.stats = summary_stats(vals, slot.truth, scaled, n);
  return row;
}

}  // namespace

StudyResult run_study(const StudyConfig& study, std::ostream* log)
{
  study.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<Slot> slots = make_slots(study);
  const HContext analytic = HContext::analytic(study.design, study.cfg.quadrature_m);

  const std::size_t reps = study.replications;
  const std::size_t tasks = study.sample_sizes.size() * reps;
  std::vector<RepOutput> results(tasks);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::exception_ptr failure;
  std::mutex mu;

  const auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks)
        return;
      {
        const std::lock_guard lock(mu);
        if (failure)
          return;
      }
      try {
        const std::size_t n = study.sample_sizes[t / reps];
        results[t] = run_replication(study, slots, analytic, n, t % reps);
      } catch (...) {
        const std::lock_guard lock(mu);
        if (!failure)
          failure = std::current_exception();
        return;
      }
      const std::size_t finished = done.fetch_add(1) + 1;
      if (log && (finished % reps == 0 || finished == tasks)) {
        const std::lock_guard lock(mu);
        *log << "progress: " << finished << '/' << tasks << " replications\n";
      }
    }
  };

  const std::size_t nthreads = std::min(study.threads, tasks);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < nthreads; ++k)
      pool.emplace_back(worker);
  }
  if (failure)
    std::rethrow_exception(failure);

  StudyResult out;
  for (std::size_t a = 0; a < study.sample_sizes.size(); ++a) {
    const std::vector<RepOutput> block(results.begin() + static_cast<std::ptrdiff_t>(a * reps),
                                       results.begin() + static_cast<std::ptrdiff_t>((a + 1) * reps));
    for (std::size_t s = 0; s < slots.size(); ++s) {
      out.rows.push_back(summarize(study, slots[s], study.sample_sizes[a], block, s));
      if (log && out.rows.back().failures)
        *log << "note: " << to_string(slots[s].estimator) << " undefined in " << out.rows.back().failures
             << " replications at n=" << study.sample_sizes[a] << '\n';
    }
  }
  // Row order: estimator, target, then n (table layout).
  std::stable_sort(out.rows.begin(), out.rows.end(), [&](const StudyRow& a, const StudyRow& b) {
    const auto pos = [&](const StudyRow& r) {
      for (std::size_t s = 0; s < slots.size(); ++s)
        if (slots[s].estimator == r.estimator && slots[s].target == r.target)
          return s;
      return slots.size();
    };
    return pos(a) < pos(b);
  });
  out.elapsed = std::chrono::steady_clock::now() - start;
  return out;
}

TableFormat parse_table_format(std::string_view name)
{
  if (name == "csv")
    return TableFormat::csv;
  if (name == "markdown" || name == "md")
    return TableFormat::markdown;
  throw ConfigError("unknown format '" + std::string(name) + "' (valid: csv, markdown)");
}

namespace {

std::string num5(double v)
{
  if (std::isnan(v))
    return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5g", v);
  return buf;
}

std::string csv_field(const std::string& s)
{
  if (s.find_first_of(",\"\r\n") == std::string::npos)
    return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"')
      q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

std::string emit_table(const StudyResult& result, TableFormat format)
{
  if (result.rows.empty())
    throw ConfigError("emit_table: empty result");
  static const std::vector<std::string> header{
      "design", "rho_v", "delta", "n", "estimator", "target", "mean_bias",
      "median_bias", "rmse", "mad", "mse", "drop_fraction", "replications"};
  std::vector<std::vector<std::string>> lines;
  for (const auto& r : result.rows) {
    // rho_v only enters the normal-selection designs, delta only the multinomial one.
    const bool mn = r.design.kind == DesignKind::multinomial;
    lines.push_back({std::string(to_string(r.design.kind)), mn ? "NA" : num5(r.design.rho_v),
                     mn ? num5(r.design.delta) : "NA",
                     std::to_string(r.n), std::string(to_string(r.estimator)), r.target,
                     num5(r.stats.mean_bias), num5(r.stats.median_bias), num5(r.stats.rmse),
                     num5(r.stats.mad), num5(r.stats.mse), num5(r.drop_fraction),
                     std::to_string(r.stats.replications)});
  }

  std::ostringstream os;
  if (format == TableFormat::csv) {
    const auto put = [&](const std::vector<std::string>& cells) {
      for (std::size_t k = 0; k < cells.size(); ++k)
        os << (k ? "," : "") << csv_field(cells[k]);
      os << "\r\n";
    };
    put(header);
    for (const auto& l : lines)
      put(l);
  } else {
    const auto put = [&](const std::vector<std::string>& cells) {
      os << '|';
      for (const auto& c : cells)
        os << ' ' << c << " |";
      os << '\n';
    };
    put(header);
    os << '|';
    for (std::size_t k = 0; k < header.size(); ++k)
      os << "---|";
    os << '\n';
    for (const auto& l : lines)
      put(l);
  }
  return os.str();
}

std::string manifest_json(const std::map<std::string, std::string>& config,
                          std::uint64_t seed,
                          std::string_view output_name,
                          std::string_view output_content)
{
  nlohmann::ordered_json j;
  j["tool"] = "wsmatch";
  j["seed"] = seed;
  j["config"] = config;
  j["output"] = {{"path", std::string(output_name)},
                 {"bytes", output_content.size()},
                 {"git_sha1", git_blob_sha1(output_content)}};
  return j.dump(2) + "\n";
}

}  // namespace wsm
