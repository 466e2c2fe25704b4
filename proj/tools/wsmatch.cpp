// wsmatch: simulate samples, run single estimates, studies and the table presets.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "wsm/config.hpp"
#include "wsm/errors.hpp"
#include "wsm/montecarlo.hpp"

namespace fs = std::filesystem;
using namespace wsm;

namespace {

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output;
  std::string format;
  std::string only;
  std::string design;
  std::string estimator;
  std::string input;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t n = 0;
  std::size_t threads = 0;
  bool quiet = false;
};

std::size_t default_threads()
{
  if (const char* env = std::getenv("WSM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1)
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError("WSM_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Writes through a temporary file so a failed run leaves nothing behind.
void write_atomically(const std::string& path, const std::string& content)
{
  const fs::path target(path);
  if (target.has_parent_path())
    fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw RuntimeFailure("cannot open '" + tmp + "' for writing");
    out << content;
    if (!out.flush()) {
      out.close();
      fs::remove(tmp);
      throw RuntimeFailure("write to '" + tmp + "' failed");
    }
  }
  fs::rename(tmp, target);
}

void write_with_manifest(const RunConfig& rc, const std::string& path, const std::string& content,
                         const std::map<std::string, std::string>& echo)
{
  write_atomically(path, content);
  const std::string manifest = manifest_json(echo, rc.study.seed, fs::path(path).filename().string(), content);
  try {
    write_atomically(path + ".manifest.json", manifest);
  } catch (...) {
    fs::remove(path);
    throw;
  }
}

RunConfig resolve(const Options& opt, RunConfig rc)
{
  if (!opt.config_path.empty())
    apply_config_file(rc, opt.config_path);
  for (const auto& kv : opt.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(rc, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!opt.design.empty())
    rc.study.design.kind = parse_design_kind(opt.design);
  if (opt.n)
    rc.sample_n = opt.n;
  if (opt.seed_set)
    rc.study.seed = opt.seed;
  if (!opt.format.empty())
    rc.format = parse_table_format(opt.format);
  rc.study.threads = opt.threads ? opt.threads : default_threads();
  return rc;
}

// The thread count never changes results, so it stays out of the manifest.
std::map<std::string, std::string> echo_without_threads(const RunConfig& rc)
{
  auto m = config_echo(rc);
  m.erase("mc.threads");
  return m;
}

int cmd_simulate(const Options& opt)
{
  RunConfig rc = resolve(opt, default_run_config());
  rc.study.design.validate();
  if (rc.sample_n < 1)
    throw ConfigError("sample.n must be at least 1");
  const Sample sample = simulate_design(rc.study.design, rc.sample_n, rc.study.seed);
  std::ostringstream out;
  write_sample_csv(out, sample);
  if (opt.output.empty()) {
    std::cout << out.str();
    return 0;
  }
  write_with_manifest(rc, opt.output, out.str(), echo_without_threads(rc));
  return 0;
}

int cmd_estimate(const Options& opt)
{
  RunConfig rc = resolve(opt, default_run_config());
  if (!opt.estimator.empty())
    rc.study.estimators = {parse_estimator_id(opt.estimator)};
  if (rc.study.estimators.size() != 1)
    throw ConfigError("estimate runs exactly one estimator");
  if (rc.study.design.kind == DesignKind::multinomial && rc.study.estimand.kind != Estimand::Kind::pmf)
    rc.study.estimand = Estimand::pmf(1, 1);
  rc.study.sample_sizes = {std::max<std::size_t>(rc.sample_n, 2)};
  rc.study.validate();

  Sample sample;
  if (!opt.input.empty()) {
    std::ifstream in(opt.input);
    if (!in)
      throw ConfigError("cannot open sample file '" + opt.input + "'");
    sample = read_sample_csv(in, rc.study.design);
  } else {
    sample = simulate_design(rc.study.design, rc.sample_n, rc.study.seed);
  }

  EstimatorConfig cfg = rc.study.cfg;
  cfg.pair_seed = mix64(rc.study.seed ^ 0x9a1f);
  const Estimand& est = rc.study.estimand;
  const HContext analytic = HContext::analytic(rc.study.design, cfg.quadrature_m);
  const EstimatorId id = rc.study.estimators.front();

  std::ostringstream out;
  out.precision(10);
  out << "estimator=" << to_string(id) << "\n"
      << "design=" << to_string(rc.study.design.kind) << "\n"
      << "n=" << sample.size() << "\n"
      << "target=" << target_label(est) << "\n";
  try {
    switch (id) {
      case EstimatorId::ckt: {
        const int arm = est.kind == Estimand::Kind::mean_y0 ? 0 : 1;
        const auto res =
            cfg.h_mode == HMode::analytic
                ? ckt_ate(sample, analytic, cfg, arm)
                : ckt_ate(sample, HContext::empirical(sample, default_bandwidths(sample, cfg.bandwidth_scale)), cfg, arm);
        out << "estimate=" << res.estimate << "\nused=" << res.used << "\ndropped=" << res.dropped
            << "\ndrop_fraction=" << res.drop_fraction() << "\n";
        break;
      }
      case EstimatorId::vy: {
        const auto res = vy_ate_infeasible(sample, rc.study.design, cfg);
        out << "estimate=" << res.estimate << "\nused=" << res.used << "\ndropped=" << res.dropped
            << "\ndrop_fraction=" << res.drop_fraction() << "\n";
        break;
      }
      case EstimatorId::rc: {
        const auto res = rc_distributional(sample, analytic, est.y, cfg);
        out << "estimate=" << res.estimate << "\nboundary_hits=" << res.boundary_hits
            << "\npairs_used=" << res.pairs_used << "\n";
        break;
      }
      case EstimatorId::pmf_infeasible:
      case EstimatorId::pmf_feasible: {
        const HContext ctx = id == EstimatorId::pmf_infeasible
                                 ? analytic
                                 : HContext::empirical(sample, default_bandwidths(sample, cfg.bandwidth_scale));
        const auto res = multinomial_pmf_estimate(sample, ctx, est.arm, est.category, CovariateBox{}, cfg);
        out << "estimate=" << res.estimate << "\nused=" << res.used << "\ndropped=" << res.dropped
            << "\ndrop_fraction=" << res.drop_fraction() << "\n";
        break;
      }
    }
  } catch (const EmptyNeighborhood& e) {
    throw RuntimeFailure(std::string("estimator undefined: ") + e.what());
  } catch (const EstimatorUndefined& e) {
    throw RuntimeFailure(std::string("estimator undefined: ") + e.what());
  }
  if (const auto truth = true_value_closed_form(rc.study.design, est))
    out << "true_value=" << *truth << "\n";

  std::cout << out.str();
  if (!opt.output.empty())
    write_with_manifest(rc, opt.output, out.str(), echo_without_threads(rc));
  return 0;
}

int cmd_study(const Options& opt)
{
  RunConfig rc = resolve(opt, default_run_config());
  const StudyResult result = run_study(rc.study, opt.quiet ? nullptr : &std::cerr);
  const std::string table = emit_table(result, rc.format);
  if (!opt.quiet)
    std::cerr << "elapsed: " << result.elapsed.count() << " s\n";
  if (opt.output.empty()) {
    std::cout << table;
    return 0;
  }
  write_with_manifest(rc, opt.output, table, echo_without_threads(rc));
  return 0;
}

int cmd_tables(const Options& opt)
{
  std::vector<const TablePreset*> chosen;
  if (opt.only.empty() || opt.only == "all") {
    for (const auto& p : table_presets())
      chosen.push_back(&p);
  } else {
    std::stringstream ss(opt.only);
    std::string name;
    while (std::getline(ss, name, ','))
      chosen.push_back(&find_table_preset(name));
  }

  const std::string dir = opt.output.empty() ? "." : opt.output;
  for (const TablePreset* preset : chosen) {
    const RunConfig rc = resolve(opt, preset_config(*preset));
    const StudyResult result = run_preset(*preset, rc, opt.quiet ? nullptr : &std::cerr);
    if (!opt.quiet)
      std::cerr << preset->name << " elapsed: " << result.elapsed.count() << " s\n";
    const std::string ext = rc.format == TableFormat::csv ? ".csv" : ".md";
    auto echo = echo_without_threads(rc);
    echo.erase(preset->sweep_key);
    write_with_manifest(rc, (fs::path(dir) / (preset->name + ext)).string(), emit_table(result, rc.format), echo);
  }
  return 0;
}

void add_common(CLI::App* sub, Options& opt)
{
  sub->add_option("--config", opt.config_path, "Config file (key = value lines, or a run manifest)");
  sub->add_option("--set", opt.overrides, "Override one key, e.g. --set mc.replications=50")->take_all();
  sub->add_option("--seed", opt.seed, "Master seed")->each([&](const std::string&) { opt.seed_set = true; });
  sub->add_option("--threads", opt.threads, "Worker threads (default: WSM_THREADS or all cores)");
  sub->add_option("--output", opt.output, "Output path");
  sub->add_option("--format", opt.format, "Table format: csv or markdown");
  sub->add_flag("--quiet", opt.quiet, "No progress output");
}

std::string defaults_help()
{
  std::string s = "Config keys and defaults:\n";
  for (const auto& [k, v] : config_echo(default_run_config()))
    s += "  " + k + " = " + v + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Matching estimators for treatment effects: simulation, estimation and table reproduction"};
  app.footer(defaults_help());
  app.require_subcommand(1);
  Options opt;

  auto* sim = app.add_subcommand("simulate", "Write a simulated sample as CSV");
  add_common(sim, opt);
  sim->add_option("--design", opt.design, "design1, design2, design3, random_coef or multinomial");
  sim->add_option("--n", opt.n, "Sample size");

  auto* est = app.add_subcommand("estimate", "Run one estimator on one sample");
  add_common(est, opt);
  est->add_option("--design", opt.design, "Design of the sample");
  est->add_option("--n", opt.n, "Sample size when simulating");
  est->add_option("--estimator", opt.estimator, "ckt, vy, rc, pmf_infeasible or pmf_feasible");
  est->add_option("--input", opt.input, "Sample CSV (default: simulate one)");

  auto* study = app.add_subcommand("study", "Run a replicated study and print its table");
  add_common(study, opt);

  auto* tables = app.add_subcommand("tables", "Reproduce the table presets into a directory");
  add_common(tables, opt);
  tables->add_option("--only", opt.only, "Comma list of table1 .. table6 (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim)
      return cmd_simulate(opt);
    if (*est)
      return cmd_estimate(opt);
    if (*study)
      return cmd_study(opt);
    return cmd_tables(opt);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
