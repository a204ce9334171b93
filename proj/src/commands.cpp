#include "tadc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "tadc/numerics.hpp"
#include "tadc/parallel.hpp"

namespace tadc {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Keeps NaN out of the JSON (which has no representation for it).
Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Table make_table(const CliConfig& cfg, const std::string& command, std::vector<std::string> columns) {
  Table t;
  t.meta.push_back("tadc " + command);
  t.meta.push_back("config_hash fnv1a64:" + hex64(cfg.hash()));
  t.meta.push_back("seed " + std::to_string(cfg.plan.seed));
  t.columns = std::move(columns);
  return t;
}

Json json_header(const CliConfig& cfg, const std::string& command) {
  Json j;
  j["command"] = command;
  j["config_hash"] = hex64(cfg.hash());
  j["seed"] = cfg.plan.seed;
  return j;
}

// Only snr_db sweeps make sense for the bound commands.
std::vector<double> snr_values(const CliConfig& cfg, const char* command) {
  std::vector<double> out;
  for (const SweepAxis& a : cfg.plan.axes) {
    if (a.name != "snr_db")
      throw UnsupportedConfigError(std::string(command) + ": only the snr_db axis can be swept, got '" + a.name + "'");
    for (const std::string& v : a.values) out.push_back(std::stod(v));
  }
  return out;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_db(double linear) { return format_number(linear > 0 ? 10.0 * std::log10(linear) : kNaN); }

void write_csv(std::ostream& out, const Table& table) {
  for (const std::string& m : table.meta) out << "# " << m << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

std::string json_twin_path(const std::string& csv_path) {
  const std::string ext = ".csv";
  if (csv_path.size() > ext.size() && csv_path.compare(csv_path.size() - ext.size(), ext.size(), ext) == 0)
    return csv_path.substr(0, csv_path.size() - ext.size()) + ".json";
  return csv_path + ".json";
}

CommandResult cmd_crlb(const CliConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  res.table = make_table(cfg, "crlb", {"snr_db", "crlb_po_db", "crlb_t_db", "hcrlb_po_db", "hcrlb_t_db",
                                       "fullres_crlb_db"});
  res.json = json_header(cfg, "crlb");
  Json rows = Json::array();
  const std::vector<double> snrs = snr_values(cfg, "crlb");
  const long R = cfg.plan.num_realizations;
  for (std::size_t p = 0; p < snrs.size(); ++p) {
    ExperimentConfig base = cfg.plan.base;
    base.snr_db = snrs[p];
    const ExperimentConfig exp = base.at_snr();
    const SystemConfig& sys = exp.system;

    // Deterministic bounds: sum of CRLB traces over the sum of ||H||^2 across realizations.
    struct Slot {
      double po = kNaN, t = kNaN, norm = 0.0;
    };
    std::vector<Slot> slots(static_cast<std::size_t>(R));
    parallel_for(slots.size(), opts.threads, [&](std::size_t r) {
      RandomStream rng = RandomStream::substream(cfg.plan.seed, p, r);
      const TrialScene scene = realize_scene(exp, rng);
      slots[r].norm = scene.H.squaredNorm();
      for (AdcKind kind : {AdcKind::parallel_one_bit, AdcKind::ternary}) {
        QuantizerSpec spec = scene.spec;
        spec.kind = kind;
        double v = kNaN;
        try {
          v = crlb_pa(fim_pa_chi(scene.H, sys.sigma(), scene.Xp, spec)).channel_trace;
        } catch (const SingularInformationError&) {
        }
        (kind == AdcKind::ternary ? slots[r].t : slots[r].po) = v;
      }
    });
    auto ratio = [&](double Slot::*field) {
      std::vector<double> num, den;
      for (const Slot& s : slots)
        if (std::isfinite(s.*field)) {
          num.push_back(s.*field);
          den.push_back(s.norm);
        }
      if (num.empty()) return kNaN;
      return pairwise_sum(num) / pairwise_sum(den);
    };
    const double po = ratio(&Slot::po);
    const double t = ratio(&Slot::t);

    double hpo = kNaN, ht = kNaN;
    if (cfg.bounds.compute) {
      for (AdcKind kind : {AdcKind::parallel_one_bit, AdcKind::ternary}) {
        ExperimentConfig hex = base;
        hex.quantizer.kind = kind;
        hex.system.channel_kind = ChannelKind::gaussian_prior;
        const auto v = hybrid_ncrlb(hex, cfg.plan.seed + p, opts.threads);
        (kind == AdcKind::ternary ? ht : hpo) = v.value_or(kNaN);
      }
    }
    const double full = sys.noise_variance / (2.0 * sys.symbol_power * sys.T_p * sys.channel_variance);

    res.table.rows.push_back({format_number(snrs[p]), format_db(po), format_db(t), format_db(hpo), format_db(ht),
                              format_db(full)});
    Json row;
    row["snr_db"] = snrs[p];
    row["crlb_po"] = json_number(po);
    row["crlb_t"] = json_number(t);
    row["hcrlb_po"] = json_number(hpo);
    row["hcrlb_t"] = json_number(ht);
    row["fullres_crlb"] = full;
    rows.push_back(row);
  }
  res.json["columns"] = res.table.columns;
  res.json["rows"] = rows;
  return res;
}

CommandResult cmd_siso_crlb(const CliConfig& cfg, const CommandOptions&) {
  CommandResult res;
  res.table = make_table(cfg, "siso-crlb",
                         {"threshold", "gbar_value", "crlb_po_db", "crlb_t_db", "fim_po_db", "fim_t_db", "flag"});
  res.json = json_header(cfg, "siso-crlb");
  const std::vector<double> snrs = snr_values(cfg, "siso-crlb");
  if (snrs.size() != 1) throw UnsupportedConfigError("siso-crlb: give exactly one snr_db value");
  ExperimentConfig base = cfg.plan.base;
  base.snr_db = snrs.front();
  const SystemConfig sys = base.at_snr().system;
  const double sigma = sys.sigma();
  const int T_p = cfg.siso.T_p;
  Json rows = Json::array();
  for (double tau : cfg.siso.thresholds) {
    for (double g : cfg.siso.gbar_values) {
      const Eigen::Vector2d gbar(g, 0.0);
      double po = kNaN, t = kNaN, fpo = kNaN, ft = kNaN;
      std::string flag = "ok";
      try {
        if (!(tau > 0)) throw DegenerateError("threshold must be positive");
        const SisoCrlb c = crlb_siso_closed_form(gbar, sigma, -tau, tau, sys.symbol_power, T_p);
        po = c.po;
        t = c.ternary;
        const SisoCrlb f = crlb_siso_inverted_fim(gbar, sigma, -tau, tau, sys.symbol_power, T_p);
        fpo = f.po;
        ft = f.ternary;
      } catch (const Error& e) {
        flag = "degenerate";
        res.diagnostics.push_back("tau=" + format_number(tau) + " gbar=" + format_number(g) + ": " + e.what());
      }
      res.table.rows.push_back({format_number(tau), format_number(g), format_db(po), format_db(t), format_db(fpo),
                                format_db(ft), flag});
      Json row;
      row["threshold"] = tau;
      row["gbar_value"] = g;
      row["crlb_po"] = json_number(po);
      row["crlb_t"] = json_number(t);
      row["fim_po"] = json_number(fpo);
      row["fim_t"] = json_number(ft);
      row["flag"] = flag;
      rows.push_back(row);
    }
  }
  res.json["snr_db"] = snrs.front();
  res.json["T_p"] = T_p;
  res.json["columns"] = res.table.columns;
  res.json["rows"] = rows;
  return res;
}

CommandResult cmd_estimate(const CliConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  std::vector<std::string> columns;
  for (const SweepAxis& a : cfg.plan.axes) columns.push_back(a.name);
  for (const char* c : {"nmse_db", "nmse_std_err", "ncrlb_db", "ser", "ser_std_err", "realizations_used", "failed",
                        "valid"})
    columns.emplace_back(c);
  res.table = make_table(cfg, "estimate", columns);
  const bool swept = std::any_of(cfg.plan.axes.begin(), cfg.plan.axes.end(),
                                 [](const SweepAxis& a) { return a.name == "estimator"; });
  const std::string est_name = swept ? std::string("swept") : to_string(cfg.plan.base.estimator);
  res.table.meta.push_back("estimator " + est_name + ", realizations " +
                           std::to_string(cfg.plan.num_realizations));
  res.json = json_header(cfg, "estimate");

  const std::vector<MetricRecord> records = run_sweep(cfg.plan, opts.threads);
  Json points = Json::array();
  long total_failed = 0;
  bool all_valid = true;
  for (const MetricRecord& r : records) {
    std::vector<std::string> row;
    Json jp;
    for (const auto& [name, value] : r.axis_values) {
      row.push_back(value);
      jp[name] = value;
    }
    row.push_back(format_number(r.nmse_db));
    row.push_back(format_number(r.mc_std_err));
    row.push_back(r.ncrlb_db ? format_number(*r.ncrlb_db) : "nan");
    row.push_back(r.ser ? format_number(*r.ser) : "nan");
    row.push_back(r.ser_std_err ? format_number(*r.ser_std_err) : "nan");
    row.push_back(std::to_string(r.realizations_used));
    row.push_back(std::to_string(r.failed));
    row.push_back(r.valid ? "1" : "0");
    res.table.rows.push_back(std::move(row));

    jp["nmse"] = json_number(r.nmse);
    jp["nmse_db"] = json_number(r.nmse_db);
    jp["nmse_std_err"] = r.mc_std_err;
    jp["ncrlb_db"] = r.ncrlb_db ? json_number(*r.ncrlb_db) : Json(nullptr);
    jp["ser"] = r.ser ? Json(*r.ser) : Json(nullptr);
    jp["realizations_used"] = r.realizations_used;
    jp["failed"] = r.failed;
    jp["valid"] = r.valid;
    jp["mean_iterations"] = r.mean_iterations;
    jp["not_converged"] = r.not_converged;
    if (!r.first_error.empty()) jp["first_error"] = r.first_error;
    points.push_back(jp);

    total_failed += r.failed;
    if (!r.valid) {
      all_valid = false;
      std::string where;
      for (const auto& [name, value] : r.axis_values) where += name + "=" + value + " ";
      res.diagnostics.push_back("invalid point (" + where + "): " + std::to_string(r.failed) +
                                " failed trials; first error: " + r.first_error);
    }
  }
  res.json["estimator"] = est_name;
  res.json["num_realizations"] = cfg.plan.num_realizations;
  res.json["columns"] = res.table.columns;
  res.json["points"] = points;
  res.json["failed_trials"] = total_failed;
  res.json["all_valid"] = all_valid;
  if (!all_valid) res.exit_code = kExitInvalidPoints;
  return res;
}

CommandResult cmd_jpd_ratio(const CliConfig& cfg, const CommandOptions& opts) {
  CommandResult res;
  res.table = make_table(cfg, "jpd-ratio", {"snr_db", "ratio", "ratio_std_err", "realizations_used"});
  res.json = json_header(cfg, "jpd-ratio");
  const std::vector<double> snrs = snr_values(cfg, "jpd-ratio");
  const SystemConfig& sys0 = cfg.plan.base.system;
  if (cfg.bounds.data_equals_pilot && sys0.T_d != 0 && sys0.T_d != sys0.T_p)
    throw UnsupportedConfigError("jpd-ratio: data_equals_pilot needs T_d = T_p (or T_d = 0)");
  if (cfg.bounds.npa_mode == NpaMode::exact_enumeration && 2 * sys0.M > 16)
    throw UnsupportedConfigError("jpd-ratio: exact enumeration needs 2M <= 16; set npa_mode = monte_carlo");
  Json rows = Json::array();
  const long R = cfg.plan.num_realizations;
  for (std::size_t p = 0; p < snrs.size(); ++p) {
    ExperimentConfig base = cfg.plan.base;
    base.snr_db = snrs[p];
    const ExperimentConfig exp = base.at_snr();
    const SystemConfig& sys = exp.system;
    const Constellation s = Constellation::make(sys.constellation, sys.symbol_power);
    const CMatrix candidates = candidate_matrix(s, sys.K);
    std::vector<double> ratio(static_cast<std::size_t>(R), kNaN);
    // Realizations run in order; the NPA Monte Carlo parallelizes internally.
    for (long r = 0; r < R; ++r) {
      RandomStream rng = RandomStream::substream(cfg.plan.seed, p, r);
      const CMatrix H = draw_channel(sys, rng);
      const CMatrix Xp = draw_pilot(sys, s, rng);
      const CMatrix Xd = cfg.bounds.data_equals_pilot ? Xp.leftCols(sys.T_d).eval()
                                                      : draw_symbols(sys, s, sys.T_d, rng);
      CMatrix X(sys.K, sys.T_p + sys.T_d);
      X << Xp, Xd;
      const CMatrix Y = H * X + draw_noise(sys.M, static_cast<int>(X.cols()), sys.noise_variance, rng);
      const QuantizerSpec spec = realize_quantizer(exp, Y);
      try {
        const InfoMatrix pa = fim_pa_chi(H, sys.sigma(), Xp, spec);
        const double pa_trace = crlb_pa(pa).channel_trace;
        if (sys.T_d == 0) {
          ratio[r] = 1.0;
          continue;
        }
        NpaOptions no;
        no.mode = cfg.bounds.npa_mode;
        no.draws_per_column = cfg.bounds.npa_draws;
        no.seed = splitmix64(cfg.plan.seed ^ (p << 32) ^ static_cast<std::uint64_t>(r));
        no.threads = opts.threads;
        const InfoMatrix npa = fim_npa(H, sys.sigma(), Xd, candidates, spec, no);
        ratio[r] = crlb_pa(fim_jpd(pa, npa)).channel_trace / pa_trace;
      } catch (const SingularInformationError& e) {
        res.diagnostics.push_back("snr " + format_number(snrs[p]) + " realization " + std::to_string(r) + ": " +
                                  e.what());
      }
    }
    std::vector<double> ok;
    for (double v : ratio)
      if (std::isfinite(v)) ok.push_back(v);
    double mean = kNaN, se = kNaN;
    if (!ok.empty()) {
      mean = pairwise_sum(ok) / static_cast<double>(ok.size());
      std::vector<double> sq;
      for (double v : ok) sq.push_back((v - mean) * (v - mean));
      se = ok.size() > 1 ? std::sqrt(pairwise_sum(sq) / static_cast<double>(ok.size() - 1) /
                                     static_cast<double>(ok.size()))
                         : 0.0;
    }
    res.table.rows.push_back(
        {format_number(snrs[p]), format_number(mean), format_number(se), std::to_string(ok.size())});
    Json row;
    row["snr_db"] = snrs[p];
    row["ratio"] = json_number(mean);
    row["ratio_std_err"] = json_number(se);
    row["realizations_used"] = ok.size();
    rows.push_back(row);
    if (ok.size() < static_cast<std::size_t>(R) && 20 * (R - static_cast<long>(ok.size())) > R)
      res.exit_code = kExitInvalidPoints;
  }
  res.json["columns"] = res.table.columns;
  res.json["rows"] = rows;
  return res;
}

}  // namespace tadc
