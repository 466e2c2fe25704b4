#include "wsm/config.hpp"

#include <charconv>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "wsm/errors.hpp"

namespace wsm {

namespace {

std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(std::string_view key, std::string_view text)
{
  const std::string s = trim(text);
  // Allow simple fractions such as 1/3.
  if (const auto slash = s.find('/'); slash != std::string::npos) {
    const double num = parse_double(key, s.substr(0, slash));
    const double den = parse_double(key, s.substr(slash + 1));
    if (den == 0.0)
      throw ConfigError(std::string(key) + ": division by zero");
    return num / den;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(std::string(key) + ": expected a number, got '" + s + "'");
  return v;
}

std::uint64_t parse_uint(std::string_view key, std::string_view text)
{
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + s + "'");
  return v;
}

std::vector<std::string> split_list(std::string_view text)
{
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  std::erase_if(out, [](const std::string& s) { return s.empty(); });
  return out;
}

std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Estimand::Kind parse_estimand_kind(std::string_view s)
{
  if (s == "mean_y1")
    return Estimand::Kind::mean_y1;
  if (s == "mean_y0")
    return Estimand::Kind::mean_y0;
  if (s == "cdf_y1")
    return Estimand::Kind::cdf_y1;
  if (s == "pmf")
    return Estimand::Kind::pmf;
  throw ConfigError("estimand.kind: unknown value '" + std::string(s) +
                    "' (valid: mean_y1, mean_y0, cdf_y1, pmf)");
}

std::string_view estimand_kind_name(Estimand::Kind k)
{
  switch (k) {
    case Estimand::Kind::mean_y1: return "mean_y1";
    case Estimand::Kind::mean_y0: return "mean_y0";
    case Estimand::Kind::cdf_y1: return "cdf_y1";
    case Estimand::Kind::pmf: return "pmf";
  }
  return "mean_y1";
}

}  // namespace

RunConfig default_run_config()
{
  RunConfig c;
  c.study.sample_sizes = {100, 200, 400};
  c.study.replications = 401;
  c.study.seed = 1;
  c.study.estimators = {EstimatorId::ckt};
  return c;
}

const std::vector<std::string>& valid_config_keys()
{
  static const std::vector<std::string> keys{
      "design.kind",          "design.rho_v",          "design.delta",
      "estimand.kind",        "estimand.y",            "estimand.arm",
      "estimand.category",    "estimator.y_grid_size", "estimator.p_grid_size",
      "estimator.bandwidth_scale", "estimator.trim_c", "estimator.trim_c0",
      "estimator.propensity_mode", "estimator.h_mode", "estimator.pair_cap", "estimator.quadrature_m",
      "mc.sample_sizes",      "mc.replications",       "mc.seed",
      "mc.estimators",        "mc.threads",            "sample.n",
      "output.format"};
  return keys;
}

void apply_setting(RunConfig& c, std::string_view key_in, std::string_view value_in)
{
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  auto& st = c.study;
  auto& cfg = st.cfg;
  if (key == "design.kind") {
    st.design.kind = parse_design_kind(value);
  } else if (key == "design.rho_v") {
    st.design.rho_v = parse_double(key, value);
  } else if (key == "design.delta") {
    st.design.delta = parse_double(key, value);
  } else if (key == "estimand.kind") {
    st.estimand.kind = parse_estimand_kind(value);
  } else if (key == "estimand.y") {
    st.estimand.y = parse_double(key, value);
  } else if (key == "estimand.arm") {
    st.estimand.arm = static_cast<int>(parse_uint(key, value));
  } else if (key == "estimand.category") {
    st.estimand.category = static_cast<int>(parse_uint(key, value));
  } else if (key == "estimator.y_grid_size") {
    cfg.y_grid_size = parse_uint(key, value);
  } else if (key == "estimator.p_grid_size") {
    cfg.p_grid_size = parse_uint(key, value);
  } else if (key == "estimator.bandwidth_scale") {
    cfg.bandwidth_scale = parse_double(key, value);
  } else if (key == "estimator.trim_c") {
    cfg.trim_c = parse_double(key, value);
  } else if (key == "estimator.trim_c0") {
    cfg.trim_c0 = parse_double(key, value);
  } else if (key == "estimator.propensity_mode") {
    if (value == "known")
      cfg.propensity_mode = PropensityMode::known;
    else if (value == "estimated")
      cfg.propensity_mode = PropensityMode::estimated;
    else
      throw ConfigError("estimator.propensity_mode: expected known or estimated");
  } else if (key == "estimator.h_mode") {
    if (value == "analytic")
      cfg.h_mode = HMode::analytic;
    else if (value == "empirical")
      cfg.h_mode = HMode::empirical;
    else
      throw ConfigError("estimator.h_mode: expected analytic or empirical");
  } else if (key == "estimator.pair_cap") {
    cfg.pair_cap = parse_uint(key, value);
  } else if (key == "estimator.quadrature_m") {
    cfg.quadrature_m = parse_uint(key, value);
  } else if (key == "mc.sample_sizes") {
    st.sample_sizes.clear();
    for (const auto& s : split_list(value))
      st.sample_sizes.push_back(parse_uint(key, s));
  } else if (key == "mc.replications") {
    st.replications = parse_uint(key, value);
  } else if (key == "mc.seed") {
    st.seed = parse_uint(key, value);
  } else if (key == "mc.estimators") {
    st.estimators.clear();
    for (const auto& s : split_list(value))
      st.estimators.push_back(parse_estimator_id(s));
  } else if (key == "mc.threads") {
    st.threads = parse_uint(key, value);
  } else if (key == "sample.n") {
    c.sample_n = parse_uint(key, value);
  } else if (key == "output.format") {
    c.format = parse_table_format(value);
  } else {
    std::string msg = "unknown config key '" + key + "'; valid keys:";
    for (const auto& k : valid_config_keys())
      msg += " " + k;
    throw ConfigError(msg);
  }
}

void apply_config_text(RunConfig& c, std::string_view text)
{
  std::istringstream in{std::string(text)};
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const std::string t = trim(line);
    if (t.empty())
      continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (!section.empty())
      key = section + "." + key;
    apply_setting(c, key, std::string_view(t).substr(eq + 1));
  }
}

void apply_config_file(RunConfig& c, const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + path + "': " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object())
      throw ConfigError("manifest '" + path + "' has no config object");
    for (const auto& [k, v] : j["config"].items())
      apply_setting(c, k, v.is_string() ? v.get<std::string>() : v.dump());
    return;
  }
  apply_config_text(c, text);
}

std::map<std::string, std::string> config_echo(const RunConfig& c)
{
  const auto& st = c.study;
  const auto& cfg = st.cfg;
  std::map<std::string, std::string> m;
  m["design.kind"] = std::string(to_string(st.design.kind));
  m["design.rho_v"] = fmt(st.design.rho_v);
  m["design.delta"] = fmt(st.design.delta);
  m["estimand.kind"] = std::string(estimand_kind_name(st.estimand.kind));
  m["estimand.y"] = fmt(st.estimand.y);
  m["estimand.arm"] = std::to_string(st.estimand.arm);
  m["estimand.category"] = std::to_string(st.estimand.category);
  m["estimator.y_grid_size"] = std::to_string(cfg.y_grid_size);
  m["estimator.p_grid_size"] = std::to_string(cfg.p_grid_size);
  m["estimator.bandwidth_scale"] = fmt(cfg.bandwidth_scale);
  m["estimator.trim_c"] = fmt(cfg.trim_c);
  m["estimator.trim_c0"] = fmt(cfg.trim_c0);
  m["estimator.propensity_mode"] = cfg.propensity_mode == PropensityMode::known ? "known" : "estimated";
  m["estimator.h_mode"] = cfg.h_mode == HMode::analytic ? "analytic" : "empirical";
  m["estimator.pair_cap"] = std::to_string(cfg.pair_cap);
  m["estimator.quadrature_m"] = std::to_string(cfg.quadrature_m);
  std::string sizes;
  for (std::size_t n : st.sample_sizes)
    sizes += (sizes.empty() ? "" : ",") + std::to_string(n);
  m["mc.sample_sizes"] = sizes;
  m["mc.replications"] = std::to_string(st.replications);
  m["mc.seed"] = std::to_string(st.seed);
  std::string ests;
  for (EstimatorId id : st.estimators)
    ests += (ests.empty() ? "" : ",") + std::string(to_string(id));
  m["mc.estimators"] = ests;
  m["mc.threads"] = std::to_string(st.threads);
  m["sample.n"] = std::to_string(c.sample_n);
  m["output.format"] = c.format == TableFormat::csv ? "csv" : "markdown";
  return m;
}

const std::vector<TablePreset>& table_presets()
{
  static const std::vector<TablePreset> presets = [] {
    const std::vector<std::string> rhos{"0", "0.25", "0.5"};
    const std::vector<std::string> deltas{"1/4", "1/3", "1/2"};
    const auto continuous = [&](const std::string& name, const std::string& kind) {
      return TablePreset{name,
                         {{"design.kind", kind},
                          {"estimand.kind", "mean_y1"},
                          {"mc.estimators", "ckt,vy"},
                          {"mc.sample_sizes", "100,200,400"},
                          {"mc.replications", "401"}},
                         "design.rho_v",
                         rhos};
    };
    const auto multinomial = [&](const std::string& name, const std::string& est) {
      return TablePreset{name,
                         {{"design.kind", "multinomial"},
                          {"design.rho_v", "0"},
                          {"estimand.kind", "pmf"},
                          {"estimand.arm", "1"},
                          {"estimand.category", "1"},
                          {"mc.estimators", est},
                          {"mc.sample_sizes", "250,500,1000,2000"},
                          {"mc.replications", "400"}},
                         "design.delta",
                         deltas};
    };
    // With known h the matched t does not depend on the propensity pair, so a
    // small pair cap only trims runtime.
    return std::vector<TablePreset>{continuous("table1", "design1"),
                                    continuous("table2", "design2"),
                                    continuous("table3", "design3"),
                                    TablePreset{"table4",
                                                {{"design.kind", "random_coef"},
                                                 {"estimand.kind", "cdf_y1"},
                                                 {"estimand.y", "1"},
                                                 {"mc.estimators", "rc"},
                                                 {"mc.sample_sizes", "100,200,400"},
                                                 {"mc.replications", "401"},
                                                 {"estimator.pair_cap", "40"}},
                                                "design.rho_v",
                                                rhos},
                                    multinomial("table5", "pmf_infeasible"),
                                    multinomial("table6", "pmf_feasible")};
  }();
  return presets;
}

const TablePreset& find_table_preset(std::string_view name)
{
  const auto& all = table_presets();
  const auto it = std::find_if(all.begin(), all.end(), [&](const TablePreset& p) { return p.name == name; });
  if (it == all.end())
    throw ConfigError("unknown table '" + std::string(name) + "' (valid: table1 .. table6)");
  return *it;
}

RunConfig preset_config(const TablePreset& preset)
{
  RunConfig c = default_run_config();
  for (const auto& [k, v] : preset.settings)
    apply_setting(c, k, v);
  return c;
}

StudyResult run_preset(const TablePreset& preset, const RunConfig& config, std::ostream* log)
{
  StudyResult merged;
  for (const auto& value : preset.sweep_values) {
    RunConfig one = config;
    apply_setting(one, preset.sweep_key, value);
    if (log)
      *log << preset.name << ": " << preset.sweep_key << " = " << value << "\n";
    StudyResult part = run_study(one.study, log);
    merged.rows.insert(merged.rows.end(), part.rows.begin(), part.rows.end());
    merged.elapsed += part.elapsed;
  }
  return merged;
}

}  // namespace wsm
