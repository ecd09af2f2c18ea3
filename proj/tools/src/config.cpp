#include "ccbf_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

extern char** environ;

namespace ccbf::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "pi") return std::numbers::pi;
  if (t == "-pi") return -std::numbers::pi;
  double v = 0.0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw ConfigError("expected a number, got '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw ConfigError("expected an integer, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_real(item));
  if (out.empty()) throw ConfigError("expected a comma-separated list of numbers");
  return out;
}

// "a b c; a b c; ..." with `width` numbers per group.
std::vector<std::vector<double>> parse_groups(const std::string& text, std::size_t width) {
  std::vector<std::vector<double>> out;
  for (const auto& group : split(text, ';')) {
    std::vector<double> row;
    std::istringstream is(group);
    std::string tok;
    while (is >> tok) row.push_back(parse_real(tok));
    if (row.size() != width) {
      throw ConfigError("expected groups of " + std::to_string(width) + " numbers separated by ';'");
    }
    out.push_back(std::move(row));
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

template <typename Params>
Setter param(Params RunConfig::*section, double Params::*field) {
  return [section, field](RunConfig& c, const std::string& v) { (c.*section).*field = parse_real(v); };
}

// section -> key -> setter
const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const auto table = [] {
    std::map<std::string, std::map<std::string, Setter>> t;
    auto& run = t["run"];
    run["scenario"] = [](RunConfig& c, const std::string& v) { c.scenario = lower(trim(v)); };
    run["controllers"] = [](RunConfig& c, const std::string& v) {
      // ecbf-qp(k1,k2) contains a comma, so split on ';' or on top-level commas.
      std::vector<std::string> out;
      std::string item;
      int depth = 0;
      for (char ch : v) {
        if (ch == '(') ++depth;
        if (ch == ')') --depth;
        if ((ch == ',' && depth == 0) || ch == ';') {
          if (!trim(item).empty()) out.push_back(trim(item));
          item.clear();
        } else {
          item += ch;
        }
      }
      if (!trim(item).empty()) out.push_back(trim(item));
      if (out.empty()) throw ConfigError("expected at least one controller");
      c.controllers = out;
    };
    run["seed"] = [](RunConfig& c, const std::string& v) {
      const auto n = parse_integer(v);
      if (n < 0) throw ConfigError("seed must be >= 0");
      c.seed = static_cast<std::uint64_t>(n);
    };
    run["out"] = [](RunConfig& c, const std::string& v) { c.out_dir = trim(v); };
    run["jobs"] = [](RunConfig& c, const std::string& v) {
      c.jobs = static_cast<int>(parse_integer(v));
    };

    auto& d1 = t["1d"];
    d1["gamma"] = [](RunConfig& c, const std::string& v) { c.gammas = parse_reals(v); };
    d1["theta"] = [](RunConfig& c, const std::string& v) { c.thetas = parse_reals(v); };
    const std::pair<const char*, double Params1d::*> fields1d[] = {
        {"k_p", &Params1d::k_p},       {"x0", &Params1d::x0},
        {"horizon", &Params1d::horizon}, {"dt", &Params1d::dt},
        {"w_guess", &Params1d::w_guess}, {"w_min", &Params1d::w_min},
        {"w_max", &Params1d::w_max},   {"s", &Params1d::s},
        {"p_gain", &Params1d::p_gain}, {"eta_mu", &Params1d::eta_mu},
        {"eta_nu", &Params1d::eta_nu}, {"tau", &Params1d::tau}};
    for (const auto& [key, field] : fields1d) d1[key] = param(&RunConfig::p1d, field);

    auto& bike = t["bicycle"];
    const std::pair<const char*, double BicycleParams::*> fields_bike[] = {
        {"lr", &BicycleParams::lr},
        {"x0", &BicycleParams::x0},
        {"y0", &BicycleParams::y0},
        {"beta0", &BicycleParams::beta0},
        {"v0", &BicycleParams::v0},
        {"goal_x", &BicycleParams::goal_x},
        {"goal_y", &BicycleParams::goal_y},
        {"speed_limit", &BicycleParams::speed_limit},
        {"slip_limit", &BicycleParams::slip_limit},
        {"reach_time", &BicycleParams::reach_time},
        {"goal_radius", &BicycleParams::goal_radius},
        {"shrink_radius", &BicycleParams::shrink_radius},
        {"omega_max", &BicycleParams::omega_max},
        {"accel_max", &BicycleParams::accel_max},
        {"lookahead", &BicycleParams::lookahead},
        {"arrival_margin", &BicycleParams::arrival_margin},
        {"brake_gain", &BicycleParams::brake_gain},
        {"k_heading", &BicycleParams::k_heading},
        {"k_slip", &BicycleParams::k_slip},
        {"k_speed", &BicycleParams::k_speed},
        {"horizon", &BicycleParams::horizon},
        {"dt", &BicycleParams::dt},
        {"w_guess", &BicycleParams::w_guess},
        {"w_min", &BicycleParams::w_min},
        {"w_max", &BicycleParams::w_max},
        {"s", &BicycleParams::s},
        {"p_gain", &BicycleParams::p_gain},
        {"eta_mu", &BicycleParams::eta_mu},
        {"eta_nu", &BicycleParams::eta_nu},
        {"tau", &BicycleParams::tau}};
    for (const auto& [key, field] : fields_bike) bike[key] = param(&RunConfig::bicycle, field);
    bike["obstacles"] = [](RunConfig& c, const std::string& v) {
      c.bicycle.obstacles.clear();
      for (const auto& g : parse_groups(v, 3)) c.bicycle.obstacles.push_back({g[0], g[1], g[2]});
    };
    bike["waypoints"] = [](RunConfig& c, const std::string& v) {
      c.bicycle.waypoints.clear();
      if (lower(trim(v)) == "none") return;
      for (const auto& g : parse_groups(v, 2)) c.bicycle.waypoints.push_back({g[0], g[1]});
    };

    auto& flow = t["flow"];
    flow["gain"] = [](RunConfig& c, const std::string& v) { c.flow.gain = parse_real(v); };
    flow["substeps"] = [](RunConfig& c, const std::string& v) {
      c.flow.substeps = static_cast<int>(parse_integer(v));
    };
    return t;
  }();
  return table;
}

void set_key(RunConfig& cfg, const std::string& section, const std::string& key,
             const std::string& value) {
  const auto& table = schema();
  const auto sec = table.find(section);
  if (sec == table.end()) throw ConfigError("unknown section [" + section + "]");
  const auto it = sec->second.find(key);
  if (it == sec->second.end()) {
    throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
  }
  try {
    it->second(cfg, value);
  } catch (const ConfigError& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

void require(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ConfigError("validation: " + field + " must be " + constraint);
}

void check_weights(const std::string& sec, double w_guess, double w_min, double w_max, double s,
                   double p_gain, double eta_mu, double eta_nu, double tau) {
  require(w_min > 0.0, sec + ".w_min", "> 0");
  require(w_min < w_max && std::isfinite(w_max), sec + ".w_min", "< w_max");
  require(w_guess > w_min && w_guess < w_max, sec + ".w_guess", "inside (w_min, w_max)");
  require(s > 0.0, sec + ".s", "> 0");
  require(p_gain > 0.0, sec + ".p_gain", "> 0");
  require(eta_mu > 0.0 && std::isfinite(eta_mu), sec + ".eta_mu", "> 0");
  require(eta_nu > 0.0 && std::isfinite(eta_nu), sec + ".eta_nu", "> 0");
  require(tau > 0.0, sec + ".tau", "> 0");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string file_safe(std::string id) {
  for (char& ch : id) {
    if (ch == '(' || ch == ',') ch = '_';
  }
  id.erase(std::remove(id.begin(), id.end(), ')'), id.end());
  return id;
}

}  // namespace

std::vector<std::string> scenario_ids() { return {"1d", "bicycle"}; }

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    // Full-line comments start with '#' or ';'; inline comments with " #".
    const auto hash = line.find(" #");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    auto where = [&] { return source + ":" + std::to_string(line_no) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(where() + "malformed section header '" + line + "'", line_no);
      }
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (!schema().count(section)) {
        throw ConfigError(where() + "unknown section [" + section + "]", line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where() + "expected 'key = value', got '" + line + "'", line_no);
    }
    if (section.empty()) throw ConfigError(where() + "key outside of any section", line_no);
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where() + "empty key", line_no);
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError(where() + "duplicate key '" + key + "' in section [" + section + "]",
                        line_no);
    }
    try {
      set_key(cfg, section, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what(), line_no);
    }
  }
  return cfg;
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  const std::string prefix = kEnvPrefix;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return out;
}

void apply_overrides(RunConfig& cfg, const std::map<std::string, std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::string rest = name.substr(prefix.size());
    bool matched = false;
    for (const auto& [section, keys] : schema()) {
      const std::string head = upper(section) + "_";
      if (rest.rfind(head, 0) != 0) continue;
      const std::string key = lower(rest.substr(head.size()));
      if (!keys.count(key)) continue;
      try {
        set_key(cfg, section, key, value);
      } catch (const ConfigError& e) {
        throw ConfigError("environment " + name + ": " + e.what());
      }
      matched = true;
      break;
    }
    if (!matched) throw ConfigError("environment " + name + ": no such config key");
  }
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = parse_config_text(buf.str(), path);
  apply_overrides(cfg, environment_overrides());
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  const auto ids = scenario_ids();
  require(std::find(ids.begin(), ids.end(), cfg.scenario) != ids.end(), "run.scenario",
          "one of: 1d, bicycle");
  require(cfg.jobs >= 1, "run.jobs", ">= 1");
  require(!cfg.out_dir.empty(), "run.out", "a non-empty path");
  require(!cfg.controllers.empty(), "run.controllers", "non-empty");
  for (const auto& c : cfg.controllers) {
    try {
      parse_controller(c);
    } catch (const std::exception& e) {
      throw ConfigError("validation: run.controllers: " + std::string(e.what()));
    }
  }
  require(cfg.flow.gain > 0.0, "flow.gain", "> 0");
  require(cfg.flow.substeps >= 1, "flow.substeps", ">= 1");

  if (cfg.scenario == "1d") {
    const auto& p = cfg.p1d;
    require(p.dt > 0.0 && std::isfinite(p.dt), "1d.dt", "> 0");
    require(p.horizon > 0.0 && std::isfinite(p.horizon), "1d.horizon", "> 0");
    require(p.horizon >= p.dt, "1d.horizon", ">= dt");
    for (double g : cfg.gammas) require(g > 0.0 && std::isfinite(g), "1d.gamma", "> 0");
    for (double th : cfg.thetas) require(std::isfinite(th), "1d.theta", "finite");
    require(std::isfinite(p.k_p), "1d.k_p", "finite");
    require(std::abs(p.x0) < 2.0, "1d.x0", "inside (-2, 2)");
    check_weights("1d", p.w_guess, p.w_min, p.w_max, p.s, p.p_gain, p.eta_mu, p.eta_nu, p.tau);
  } else {
    const auto& p = cfg.bicycle;
    require(p.dt > 0.0 && std::isfinite(p.dt), "bicycle.dt", "> 0");
    require(p.horizon > 0.0 && std::isfinite(p.horizon), "bicycle.horizon", "> 0");
    require(p.horizon >= p.dt, "bicycle.horizon", ">= dt");
    require(p.lr > 0.0, "bicycle.lr", "> 0");
    require(p.speed_limit > 0.0, "bicycle.speed_limit", "> 0");
    require(p.slip_limit > 0.0 && p.slip_limit < std::numbers::pi / 2, "bicycle.slip_limit",
            "inside (0, pi/2)");
    require(p.reach_time > 0.0, "bicycle.reach_time", "> 0");
    require(p.goal_radius > 0.0, "bicycle.goal_radius", "> 0");
    require(p.shrink_radius > 0.0, "bicycle.shrink_radius", "> 0");
    require(p.omega_max > 0.0 && std::isfinite(p.omega_max), "bicycle.omega_max", "> 0");
    require(p.accel_max > 0.0 && std::isfinite(p.accel_max), "bicycle.accel_max", "> 0");
    require(p.lookahead > 0.0, "bicycle.lookahead", "> 0");
    require(p.arrival_margin >= 0.0, "bicycle.arrival_margin", ">= 0");
    require(p.brake_gain > 0.0, "bicycle.brake_gain", "> 0");
    require(std::abs(p.beta0) < p.slip_limit, "bicycle.beta0", "inside (-slip_limit, slip_limit)");
    require(std::abs(p.v0) < p.speed_limit, "bicycle.v0", "inside (-speed_limit, speed_limit)");
    for (const auto& ob : p.obstacles) require(ob.r > 0.0, "bicycle.obstacles", "of radius > 0");
    check_weights("bicycle", p.w_guess, p.w_min, p.w_max, p.s, p.p_gain, p.eta_mu, p.eta_nu,
                  p.tau);
  }
  // Anything the builders still reject.
  try {
    for (const auto& spec : expand_matrix(cfg)) spec.scenario.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("validation: ") + e.what());
  }
}

std::vector<RunSpec> expand_matrix(const RunConfig& cfg) {
  std::vector<RunSpec> out;
  auto apply_flow = [&](Scenario& sc) {
    sc.flow.B = cfg.flow.gain * Matrix::Identity(static_cast<Eigen::Index>(sc.system.m),
                                                  static_cast<Eigen::Index>(sc.system.m));
    sc.flow.substeps = cfg.flow.substeps;
  };
  for (const auto& name : cfg.controllers) {
    const ControllerSpec ctrl = parse_controller(name);
    const bool gated = ctrl.kind == ControllerKind::kCcbfQp || ctrl.kind == ControllerKind::kCcbfFlow;
    if (cfg.scenario == "1d") {
      for (double gamma : cfg.gammas) {
        for (double theta : cfg.thetas) {
          Params1d p = cfg.p1d;
          p.gamma = gamma;
          p.theta = theta;
          RunSpec spec{"1d_g" + fmt(gamma) + "_th" + fmt(theta) + "_" + file_safe(ctrl.id()),
                       build_scenario_1d(p), ctrl, gated, gamma, theta};
          apply_flow(spec.scenario);
          out.push_back(std::move(spec));
        }
      }
    } else {
      RunSpec spec{"bicycle_" + file_safe(ctrl.id()), build_scenario_bicycle(cfg.bicycle), ctrl,
                   gated};
      apply_flow(spec.scenario);
      out.push_back(std::move(spec));
    }
  }
  return out;
}

}  // namespace ccbf::cli
