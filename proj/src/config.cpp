#include "tadc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace tadc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::set<std::string> kAxisNames = {"snr_db", "M", "K", "T_p", "T_d", "constellation",
                                          "threshold_scheme", "estimator"};

// Reads typed values out of one section, remembering which keys were used so
// leftovers can be reported.
class SectionReader {
 public:
  SectionReader(const ConfigFile& file, const std::string& name) : file_(file), name_(name) {
    auto it = file.sections.find(name);
    if (it != file.sections.end()) entries_ = &it->second;
  }

  const ConfigEntry* find(const std::string& key) {
    used_.insert(key);
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    return it == entries_->end() ? nullptr : &it->second;
  }

  [[noreturn]] void fail(const ConfigEntry& e, const std::string& key, const std::string& what) const {
    throw ConfigError(file_.source, e.line, "[" + name_ + "] " + key + ": " + what);
  }

  template <typename T, typename Parse>
  void read(const std::string& key, T& out, Parse&& parse) {
    if (const ConfigEntry* e = find(key)) {
      try {
        out = parse(e->value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& ex) {
        fail(*e, key, ex.what());
      }
    }
  }

  void read_int(const std::string& key, int& out) { read(key, out, [](const std::string& v) { return to_int(v); }); }
  void read_long(const std::string& key, long& out) {
    read(key, out, [](const std::string& v) { return static_cast<long>(to_u64(v)); });
  }
  void read_double(const std::string& key, double& out) {
    read(key, out, [](const std::string& v) { return to_double(v); });
  }
  void read_bool(const std::string& key, bool& out) {
    read(key, out, [](const std::string& v) {
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      throw DomainError("expected a boolean, got '" + v + "'");
    });
  }

  void reject_unknown() const {
    if (!entries_) return;
    for (const auto& [key, entry] : *entries_)
      if (!used_.count(key)) throw ConfigError(file_.source, entry.line, "[" + name_ + "] unknown key '" + key + "'");
  }

  static int to_int(const std::string& v) {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size() || x < -2147483647LL || x > 2147483647LL)
      throw DomainError("expected an integer, got '" + v + "'");
    return static_cast<int>(x);
  }
  static std::uint64_t to_u64(const std::string& v) {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw DomainError("expected a nonnegative integer, got '" + v + "'");
    const unsigned long long x = std::stoull(v, &used, 0);
    if (used != v.size()) throw DomainError("expected a nonnegative integer, got '" + v + "'");
    return x;
  }
  static double to_double(const std::string& v) {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(x)) throw DomainError("expected a finite number, got '" + v + "'");
    return x;
  }

 private:
  const ConfigFile& file_;
  std::string name_;
  const std::map<std::string, ConfigEntry>* entries_ = nullptr;
  std::set<std::string> used_;
};

}  // namespace

std::vector<double> parse_number_list(const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split_list(value)) {
    const auto c1 = item.find(':');
    if (c1 == std::string::npos) {
      out.push_back(SectionReader::to_double(item));
      continue;
    }
    const auto c2 = item.find(':', c1 + 1);
    if (c2 == std::string::npos) throw DomainError("range must read start:step:stop, got '" + item + "'");
    const double a = SectionReader::to_double(trim(item.substr(0, c1)));
    const double step = SectionReader::to_double(trim(item.substr(c1 + 1, c2 - c1 - 1)));
    const double b = SectionReader::to_double(trim(item.substr(c2 + 1)));
    if (!(step > 0) || b < a) throw DomainError("range needs step > 0 and stop >= start, got '" + item + "'");
    const long n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    if (n > 100000) throw DomainError("range '" + item + "' is too long");
    for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  }
  if (out.empty()) throw DomainError("empty list");
  return out;
}

namespace {

std::string format_axis_value(const std::string& name, const std::string& raw) {
  if (name != "snr_db") return raw;
  // Normalise numeric spellings so "5" and "5.0" hash alike.
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", std::stod(raw));
  return buf;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

ConfigFile parse_config(std::istream& in, const std::string& source) {
  ConfigFile file;
  file.source = source;
  std::string section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source, line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(source, line_no, "empty section name");
      file.sections[section];
      file.section_line.emplace(section, line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line_no, "expected 'key = value'");
    if (section.empty()) throw ConfigError(source, line_no, "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line_no, "empty key");
    if (value.empty()) throw ConfigError(source, line_no, "empty value for '" + key + "'");
    auto& entries = file.sections[section];
    if (entries.count(key)) throw ConfigError(source, line_no, "duplicate key '" + key + "' in [" + section + "]");
    entries[key] = {value, line_no};
    file.key_order[section].push_back(key);
  }
  return file;
}

ConfigFile parse_config_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_config(in, source);
}

ConfigFile parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  return parse_config(in, path);
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

CliConfig load_config(const ConfigFile& file) {
  static const std::set<std::string> known = {"system", "quantizer", "estimator", "sweep", "bounds", "siso", "output"};
  for (const auto& [name, entries] : file.sections)
    if (!known.count(name)) {
      const auto at = file.section_line.find(name);
      int line = at == file.section_line.end() ? 0 : at->second;
      for (const auto& [k, e] : entries) line = line == 0 ? e.line : std::min(line, e.line);
      throw ConfigError(file.source, line, "unknown section [" + name + "]");
    }

  CliConfig cfg;
  ExperimentConfig& exp = cfg.plan.base;
  SystemConfig& sys = exp.system;

  SectionReader system(file, "system");
  system.read_int("M", sys.M);
  system.read_int("K", sys.K);
  system.read_int("T_p", sys.T_p);
  system.read_int("T_d", sys.T_d);
  system.read_double("noise_variance", sys.noise_variance);
  system.read_double("channel_variance", sys.channel_variance);
  system.read("channel", sys.channel_kind, parse_channel_kind);
  system.read("constellation", sys.constellation, parse_constellation);
  system.read("pilot", sys.pilot, [](const std::string& v) {
    if (v == "random") return PilotKind::random;
    if (v == "orthogonal") return PilotKind::orthogonal;
    throw DomainError("unknown pilot '" + v + "' (expected random, orthogonal)");
  });
  system.reject_unknown();

  SectionReader quant(file, "quantizer");
  QuantizerSettings& q = exp.quantizer;
  quant.read("kind", q.kind, parse_adc_kind);
  quant.read("scheme", q.scheme, parse_threshold_scheme);
  quant.read_double("delta", q.delta);
  quant.read_double("c", q.c);
  quant.read_bool("analytic_dt", q.analytic_dt);
  quant.read_double("label", q.label);
  quant.read("label_power", q.label_power,
             [](const std::string& v) { return std::optional<double>(SectionReader::to_double(v)); });
  quant.reject_unknown();

  SectionReader est(file, "estimator");
  est.read("name", exp.estimator, parse_estimator);
  est.read_int("gpem_groups", exp.gpem_groups);
  est.read_int("max_newton_iters", exp.solver.max_newton_iters);
  est.read_double("grad_tol", exp.solver.grad_tol);
  est.read_int("max_em_iters", exp.solver.max_em_iters);
  est.read_double("em_rel_tol", exp.solver.em_rel_tol);
  est.read_double("posterior_prune_tol", exp.solver.posterior_prune_tol);
  est.read_double("damping", exp.solver.damping);
  est.read_int("max_halvings", exp.solver.max_halvings);
  est.read_double("viem_sigma_jitter", exp.viem_sigma_jitter);
  est.reject_unknown();

  SectionReader bounds(file, "bounds");
  bounds.read_bool("compute", cfg.bounds.compute);
  bounds.read_long("hybrid_draws", cfg.bounds.hybrid_draws);
  bounds.read("npa_mode", cfg.bounds.npa_mode, [](const std::string& v) {
    if (v == "monte_carlo") return NpaMode::monte_carlo;
    if (v == "exact") return NpaMode::exact_enumeration;
    if (v == "high_snr") return NpaMode::high_snr_equivalence;
    throw DomainError("unknown npa_mode '" + v + "' (expected monte_carlo, exact, high_snr)");
  });
  bounds.read_long("npa_draws", cfg.bounds.npa_draws);
  bounds.read_bool("data_equals_pilot", cfg.bounds.data_equals_pilot);
  bounds.reject_unknown();
  exp.compute_bound = cfg.bounds.compute;
  exp.hybrid_draws = cfg.bounds.hybrid_draws;

  SectionReader siso(file, "siso");
  cfg.siso.thresholds = parse_number_list("0.05:0.05:1");
  cfg.siso.gbar_values = {0.4};
  siso.read("thresholds", cfg.siso.thresholds, parse_number_list);
  siso.read("gbar", cfg.siso.gbar_values, parse_number_list);
  siso.read_int("T_p", cfg.siso.T_p);
  siso.reject_unknown();

  SectionReader sweep(file, "sweep");
  sweep.read_long("num_realizations", cfg.plan.num_realizations);
  sweep.read("seed", cfg.plan.seed, SectionReader::to_u64);
  sys.seed = cfg.plan.seed;
  int first_axis_line = 0;
  if (auto it = file.key_order.find("sweep"); it != file.key_order.end()) {
    for (const std::string& key : it->second) {
      if (!kAxisNames.count(key)) continue;
      const ConfigEntry* e = sweep.find(key);
      if (first_axis_line == 0) first_axis_line = e->line;
      SweepAxis axis{key, {}};
      try {
        if (key == "snr_db") {
          for (double v : parse_number_list(e->value)) axis.values.push_back(format_axis_value(key, fmt(v)));
        } else {
          axis.values = split_list(e->value);
        }
        for (const std::string& v : axis.values) {
          ExperimentConfig probe = exp;
          apply_axis_value(probe, key, v);
        }
      } catch (const std::exception& ex) {
        sweep.fail(*e, key, ex.what());
      }
      cfg.plan.axes.push_back(std::move(axis));
    }
  }
  sweep.reject_unknown();
  if (cfg.plan.axes.empty()) cfg.plan.axes.push_back({"snr_db", {"0"}});

  SectionReader output(file, "output");
  output.read("path", cfg.output_path, [](const std::string& v) { return v; });
  output.reject_unknown();

  try {
    cfg.plan.validate();
    if (cfg.siso.T_p < 1) throw DomainError("siso T_p must be positive");
    if (cfg.bounds.npa_draws < 1) throw DomainError("npa_draws must be positive");
  } catch (const std::exception& ex) {
    throw ConfigError(file.source, first_axis_line, std::string("invalid configuration: ") + ex.what());
  }
  return cfg;
}

std::string CliConfig::canonical() const {
  const ExperimentConfig& e = plan.base;
  const SystemConfig& s = e.system;
  std::vector<std::string> lines = {
      "system.M=" + std::to_string(s.M),
      "system.K=" + std::to_string(s.K),
      "system.T_p=" + std::to_string(s.T_p),
      "system.T_d=" + std::to_string(s.T_d),
      "system.noise_variance=" + fmt(s.noise_variance),
      "system.channel_variance=" + fmt(s.channel_variance),
      "system.channel=" + to_string(s.channel_kind),
      "system.constellation=" + to_string(s.constellation),
      std::string("system.pilot=") + (s.pilot == PilotKind::orthogonal ? "orthogonal" : "random"),
      "quantizer.kind=" + to_string(e.quantizer.kind),
      "quantizer.scheme=" + to_string(e.quantizer.scheme),
      "quantizer.delta=" + fmt(e.quantizer.delta),
      "quantizer.c=" + fmt(e.quantizer.c),
      std::string("quantizer.analytic_dt=") + (e.quantizer.analytic_dt ? "true" : "false"),
      "quantizer.label=" + fmt(e.quantizer.label),
      "quantizer.label_power=" + (e.quantizer.label_power ? fmt(*e.quantizer.label_power) : std::string("default")),
      "estimator.name=" + to_string(e.estimator),
      "estimator.gpem_groups=" + std::to_string(e.gpem_groups),
      "estimator.max_newton_iters=" + std::to_string(e.solver.max_newton_iters),
      "estimator.grad_tol=" + fmt(e.solver.grad_tol),
      "estimator.max_em_iters=" + std::to_string(e.solver.max_em_iters),
      "estimator.em_rel_tol=" + fmt(e.solver.em_rel_tol),
      "estimator.posterior_prune_tol=" + fmt(e.solver.posterior_prune_tol),
      "estimator.damping=" + fmt(e.solver.damping),
      "estimator.max_halvings=" + std::to_string(e.solver.max_halvings),
      "estimator.viem_sigma_jitter=" + fmt(e.viem_sigma_jitter),
      std::string("bounds.compute=") + (bounds.compute ? "true" : "false"),
      "bounds.hybrid_draws=" + std::to_string(bounds.hybrid_draws),
      "bounds.npa_mode=" + std::to_string(static_cast<int>(bounds.npa_mode)),
      "bounds.npa_draws=" + std::to_string(bounds.npa_draws),
      std::string("bounds.data_equals_pilot=") + (bounds.data_equals_pilot ? "true" : "false"),
      "sweep.num_realizations=" + std::to_string(plan.num_realizations),
      "sweep.seed=" + std::to_string(plan.seed),
      "siso.T_p=" + std::to_string(siso.T_p),
  };
  std::string list;
  for (double v : siso.thresholds) list += fmt(v) + ",";
  lines.push_back("siso.thresholds=" + list);
  list.clear();
  for (double v : siso.gbar_values) list += fmt(v) + ",";
  lines.push_back("siso.gbar=" + list);
  std::sort(lines.begin(), lines.end());
  // Axis order matters, so axes follow the sorted block in their given order.
  for (const SweepAxis& a : plan.axes) {
    std::string v;
    for (const std::string& x : a.values) v += x + ",";
    lines.push_back("axis." + a.name + "=" + v);
  }
  std::string out;
  for (const std::string& l : lines) out += l + "\n";
  return out;
}

std::uint64_t CliConfig::hash() const { return fnv1a64(canonical()); }

}  // namespace tadc
