#pragma once

// Run configuration: a small TOML-compatible reader (flat sections, scalar and
// flat-array values), the typed RunConfig with strict unknown-key rejection,
// and canonical serialization for round-trips and config hashing.

#include <Eigen/Dense>

#include <cctype>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdgns {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigValue {
  enum class Kind { number, string, boolean, number_list, string_list };
  Kind kind = Kind::number;
  double num = 0;
  bool flag = false;
  std::string str;
  std::vector<double> nums;
  std::vector<std::string> strs;

  bool operator==(const ConfigValue& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::number: return num == o.num;
      case Kind::string: return str == o.str;
      case Kind::boolean: return flag == o.flag;
      case Kind::number_list: return nums == o.nums;
      case Kind::string_list: return strs == o.strs;
    }
    return false;
  }
};

// keys are "section.key", or bare "key" for entries before any section header
using ConfigTable = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline ConfigValue parse_scalar(const std::string& tok, int line) {
  ConfigValue v;
  if (tok.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value");
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    v.kind = ConfigValue::Kind::string;
    v.str = tok.substr(1, tok.size() - 2);
    return v;
  }
  if (tok == "true" || tok == "false") {
    v.kind = ConfigValue::Kind::boolean;
    v.flag = tok == "true";
    return v;
  }
  size_t used = 0;
  try {
    v.num = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": bad value '" + tok + "'");
  }
  if (used != tok.size())
    throw ConfigError("line " + std::to_string(line) + ": bad value '" + tok + "'");
  v.kind = ConfigValue::Kind::number;
  return v;
}

inline std::vector<std::string> split_list(const std::string& body, int line) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      items.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  std::string last = strip(cur);
  if (!last.empty()) items.push_back(last);
  if (in_str) throw ConfigError("line " + std::to_string(line) + ": unterminated string");
  return items;
}

}  // namespace detail

inline ConfigTable parse_config_text(const std::string& text) {
  ConfigTable table;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = std::string::npos;
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        hash = i;
        break;
      }
    }
    std::string s = detail::strip(hash == std::string::npos ? line : line.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      section = detail::strip(s.substr(1, s.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::strip(s.substr(0, eq));
    std::string val = detail::strip(s.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full))
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");

    ConfigValue v;
    if (!val.empty() && val.front() == '[') {
      if (val.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": unterminated array");
      auto items = detail::split_list(val.substr(1, val.size() - 2), lineno);
      if (!items.empty() && items.front().front() == '"') {
        v.kind = ConfigValue::Kind::string_list;
        for (const auto& it : items) v.strs.push_back(detail::parse_scalar(it, lineno).str);
      } else {
        v.kind = ConfigValue::Kind::number_list;
        for (const auto& it : items) v.nums.push_back(detail::parse_scalar(it, lineno).num);
      }
    } else {
      v = detail::parse_scalar(val, lineno);
    }
    table.emplace(full, std::move(v));
  }
  return table;
}

inline std::string serialize_config(const ConfigTable& table) {
  auto fmt_num = [](double x) {
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
  };
  auto fmt_val = [&](const ConfigValue& v) {
    std::ostringstream o;
    switch (v.kind) {
      case ConfigValue::Kind::number: o << fmt_num(v.num); break;
      case ConfigValue::Kind::string: o << '"' << v.str << '"'; break;
      case ConfigValue::Kind::boolean: o << (v.flag ? "true" : "false"); break;
      case ConfigValue::Kind::number_list: {
        o << '[';
        for (size_t i = 0; i < v.nums.size(); ++i)
          o << (i ? ", " : "") << fmt_num(v.nums[i]);
        o << ']';
        break;
      }
      case ConfigValue::Kind::string_list: {
        o << '[';
        for (size_t i = 0; i < v.strs.size(); ++i)
          o << (i ? ", " : "") << '"' << v.strs[i] << '"';
        o << ']';
        break;
      }
    }
    return o.str();
  };
  // std::map ordering makes the output canonical; group by section
  std::ostringstream out;
  std::string cur_section;
  bool first = true;
  for (const auto& [full, v] : table) {
    size_t dot = full.find('.');
    std::string section = dot == std::string::npos ? "" : full.substr(0, dot);
    std::string key = dot == std::string::npos ? full : full.substr(dot + 1);
    if (section != cur_section || (first && !section.empty())) {
      if (!first) out << "\n";
      if (!section.empty()) out << "[" << section << "]\n";
      cur_section = section;
    }
    out << key << " = " << fmt_val(v) << "\n";
    first = false;
  }
  return out.str();
}

struct RunConfig {
  std::string command;  // may stay empty until the CLI supplies it
  int k = 1;
  double beta = 0.0;  // 0 means the 8 k^2 default
  double mu = 1e-3;
  double alpha = 1.0;
  double kappa = 1e-4;
  bool kappa_random = false;
  uint64_t kappa_seed = 7;
  std::vector<int> levels{4, 8};
  double T = 0.1;
  int n_steps = 0;           // 0: derive the step from dt_rule or dts
  double dt_coef = 0.8;      // dt = dt_coef * h^dt_power
  int dt_power = 0;          // 0: power defaults to k + 1
  std::vector<double> dts;   // explicit step list for temporal studies
  std::string out_dir = "out";
  int vtk_every = 0;
  std::vector<Eigen::Vector2d> polyline;  // subsurface interface override
};

namespace detail {

// accepts "C*h^(P)" with integer P, or the symbolic power "k+1"
inline void parse_dt_rule(const std::string& rule, int k, double& coef, int& power) {
  size_t star = rule.find("*h^(");
  if (star == std::string::npos || rule.back() != ')')
    throw ConfigError("bad dt rule '" + rule + "', expected C*h^(P)");
  std::string cs = strip(rule.substr(0, star));
  std::string ps = strip(rule.substr(star + 4, rule.size() - star - 5));
  ConfigValue cv = parse_scalar(cs, 0);
  if (cv.kind != ConfigValue::Kind::number)
    throw ConfigError("bad dt rule coefficient '" + cs + "'");
  coef = cv.num;
  if (ps == "k+1") {
    power = k + 1;
  } else {
    ConfigValue pv = parse_scalar(ps, 0);
    if (pv.kind != ConfigValue::Kind::number || pv.num != static_cast<int>(pv.num))
      throw ConfigError("bad dt rule power '" + ps + "'");
    power = static_cast<int>(pv.num);
  }
}

inline void parse_kappa(const std::string& s, RunConfig& rc) {
  if (s.rfind("random(", 0) == 0 && s.back() == ')') {
    rc.kappa_random = true;
    std::string seed = s.substr(7, s.size() - 8);
    ConfigValue sv = parse_scalar(seed, 0);
    if (sv.kind != ConfigValue::Kind::number || sv.num < 0 ||
        sv.num != static_cast<uint64_t>(sv.num))
      throw ConfigError("bad kappa seed '" + seed + "'");
    rc.kappa_seed = static_cast<uint64_t>(sv.num);
  } else {
    throw ConfigError("bad kappa string '" + s + "', expected random(<seed>)");
  }
}

inline double need_number(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::number)
    throw ConfigError("key '" + key + "' must be a number");
  return v.num;
}

inline std::string need_string(const ConfigValue& v, const std::string& key) {
  if (v.kind != ConfigValue::Kind::string)
    throw ConfigError("key '" + key + "' must be a string");
  return v.str;
}

}  // namespace detail

inline RunConfig run_config_from_table(const ConfigTable& table) {
  RunConfig rc;
  std::string dt_rule;
  std::vector<double> px, py;
  bool have_power = false;
  for (const auto& [key, v] : table) {
    if (key == "command") {
      rc.command = detail::need_string(v, key);
    } else if (key == "discretization.k") {
      rc.k = static_cast<int>(detail::need_number(v, key));
    } else if (key == "discretization.beta") {
      rc.beta = detail::need_number(v, key);
    } else if (key == "physics.mu") {
      rc.mu = detail::need_number(v, key);
    } else if (key == "physics.alpha") {
      rc.alpha = detail::need_number(v, key);
    } else if (key == "physics.kappa") {
      if (v.kind == ConfigValue::Kind::number)
        rc.kappa = v.num;
      else if (v.kind == ConfigValue::Kind::string)
        detail::parse_kappa(v.str, rc);
      else
        throw ConfigError("key 'physics.kappa' must be a number or random(<seed>)");
    } else if (key == "mesh.levels") {
      if (v.kind != ConfigValue::Kind::number_list)
        throw ConfigError("key 'mesh.levels' must be a number list");
      rc.levels.clear();
      for (double d : v.nums) rc.levels.push_back(static_cast<int>(d));
    } else if (key == "mesh.polyline_x") {
      if (v.kind != ConfigValue::Kind::number_list)
        throw ConfigError("key 'mesh.polyline_x' must be a number list");
      px = v.nums;
    } else if (key == "mesh.polyline_y") {
      if (v.kind != ConfigValue::Kind::number_list)
        throw ConfigError("key 'mesh.polyline_y' must be a number list");
      py = v.nums;
    } else if (key == "time.T") {
      rc.T = detail::need_number(v, key);
    } else if (key == "time.n_steps") {
      rc.n_steps = static_cast<int>(detail::need_number(v, key));
    } else if (key == "time.dt_rule") {
      dt_rule = detail::need_string(v, key);
    } else if (key == "time.dts") {
      if (v.kind != ConfigValue::Kind::number_list)
        throw ConfigError("key 'time.dts' must be a number list");
      rc.dts = v.nums;
    } else if (key == "output.directory") {
      rc.out_dir = detail::need_string(v, key);
    } else if (key == "output.vtk_every") {
      rc.vtk_every = static_cast<int>(detail::need_number(v, key));
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  if (!dt_rule.empty()) {
    detail::parse_dt_rule(dt_rule, rc.k, rc.dt_coef, rc.dt_power);
    have_power = true;
  }
  if (!have_power) rc.dt_power = rc.k + 1;

  static const std::vector<std::string> commands{"spatial_study", "temporal_study",
                                                 "invariants", "subsurface", "probe"};
  if (!rc.command.empty()) {
    bool known = false;
    for (const auto& c : commands) known = known || c == rc.command;
    if (!known) throw ConfigError("unknown command '" + rc.command + "'");
  }
  if (rc.k < 1 || rc.k > 4) throw ConfigError("k must be between 1 and 4");
  if (rc.mu <= 0) throw ConfigError("mu must be positive");
  if (!rc.kappa_random && rc.kappa <= 0) throw ConfigError("kappa must be positive");
  if (rc.alpha < 0) throw ConfigError("alpha must be nonnegative");
  if (rc.beta < 0) throw ConfigError("beta must be nonnegative");
  if (rc.levels.empty()) throw ConfigError("mesh.levels must not be empty");
  for (int ny : rc.levels)
    if (ny < 1) throw ConfigError("mesh levels must be positive");
  if (rc.T <= 0) throw ConfigError("T must be positive");
  if (rc.n_steps < 0) throw ConfigError("n_steps must be nonnegative");
  if (rc.vtk_every < 0) throw ConfigError("vtk_every must be nonnegative");
  for (double dt : rc.dts)
    if (dt <= 0) throw ConfigError("entries of time.dts must be positive");
  if (px.size() != py.size())
    throw ConfigError("mesh.polyline_x and mesh.polyline_y must have equal length");
  for (size_t i = 0; i < px.size(); ++i) rc.polyline.emplace_back(px[i], py[i]);
  return rc;
}

inline RunConfig parse_run_config(const std::string& text) {
  return run_config_from_table(parse_config_text(text));
}

inline ConfigTable to_table(const RunConfig& rc) {
  ConfigTable t;
  auto num = [](double x) {
    ConfigValue v;
    v.kind = ConfigValue::Kind::number;
    v.num = x;
    return v;
  };
  auto str = [](const std::string& s) {
    ConfigValue v;
    v.kind = ConfigValue::Kind::string;
    v.str = s;
    return v;
  };
  auto list = [](const std::vector<double>& d) {
    ConfigValue v;
    v.kind = ConfigValue::Kind::number_list;
    v.nums = d;
    return v;
  };
  t["command"] = str(rc.command);
  t["discretization.k"] = num(rc.k);
  if (rc.beta > 0) t["discretization.beta"] = num(rc.beta);
  t["physics.mu"] = num(rc.mu);
  t["physics.alpha"] = num(rc.alpha);
  if (rc.kappa_random)
    t["physics.kappa"] = str("random(" + std::to_string(rc.kappa_seed) + ")");
  else
    t["physics.kappa"] = num(rc.kappa);
  std::vector<double> lv(rc.levels.begin(), rc.levels.end());
  t["mesh.levels"] = list(lv);
  if (!rc.polyline.empty()) {
    std::vector<double> px, py;
    for (const auto& p : rc.polyline) {
      px.push_back(p.x());
      py.push_back(p.y());
    }
    t["mesh.polyline_x"] = list(px);
    t["mesh.polyline_y"] = list(py);
  }
  t["time.T"] = num(rc.T);
  if (rc.n_steps > 0) t["time.n_steps"] = num(rc.n_steps);
  t["time.dt_rule"] =
      str(std::to_string(rc.dt_coef) + "*h^(" + std::to_string(rc.dt_power) + ")");
  if (!rc.dts.empty()) t["time.dts"] = list(rc.dts);
  t["output.directory"] = str(rc.out_dir);
  t["output.vtk_every"] = num(rc.vtk_every);
  return t;
}

// stable 64-bit FNV-1a over the canonical serialization, for the manifest
inline std::string config_hash(const RunConfig& rc) {
  std::string text = serialize_config(to_table(rc));
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream o;
  o << std::hex << h;
  return o.str();
}

}  // namespace hdgns
