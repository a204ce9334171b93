// tadc: bounds and estimators for two-threshold quantized massive MIMO.
//
//   tadc crlb      --config sweep.ini [--out curve.csv]
//   tadc siso-crlb --config siso.ini
//   tadc estimate  --config em.ini --threads 4
//   tadc jpd-ratio --config jpd.ini
//   tadc selftest

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tadc/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out;
  bool strict = false;
};

void add_common(CLI::App* sub, Flags& f, bool needs_config) {
  auto* c = sub->add_option("--config", f.config, "experiment configuration file");
  if (needs_config) c->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", f.seed, "override [sweep] seed");
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", f.out, "CSV output path (JSON twin written alongside)");
  sub->add_flag("--strict", f.strict, "treat warnings and invalid points as errors");
}

int run_command(const std::string& name, const Flags& f) {
  using namespace tadc;
  CommandOptions opts;
  opts.threads = f.threads;
  opts.strict = f.strict;
  if (name == "selftest") {
    const SelftestReport report = run_selftest(std::cout, f.threads);
    return report.passed() ? kExitOk : kExitFailure;
  }

  CliConfig cfg;
  try {
    cfg = load_config(parse_config_file(f.config));
    if (f.seed) {
      cfg.plan.seed = *f.seed;
      cfg.plan.base.system.seed = *f.seed;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  CommandResult res;
  try {
    if (name == "crlb") res = cmd_crlb(cfg, opts);
    else if (name == "siso-crlb") res = cmd_siso_crlb(cfg, opts);
    else if (name == "estimate") res = cmd_estimate(cfg, opts);
    else res = cmd_jpd_ratio(cfg, opts);
  } catch (const UnsupportedConfigError& e) {
    std::cerr << "unsupported configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  }

  for (const std::string& d : res.diagnostics) std::cerr << "warning: " << d << '\n';
  const std::string path = !f.out.empty() ? f.out : cfg.output_path;
  if (path.empty()) {
    write_csv(std::cout, res.table);
  } else {
    std::ofstream csv(path);
    if (!csv) {
      std::cerr << "cannot write " << path << '\n';
      return kExitFailure;
    }
    write_csv(csv, res.table);
    std::ofstream json(json_twin_path(path));
    json << res.json.dump(2) << '\n';
  }
  if (f.strict && !res.diagnostics.empty() && res.exit_code == kExitOk) return kExitInvalidPoints;
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel estimation bounds and algorithms for ternary and parallel one-bit ADCs"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const char* name : {"crlb", "siso-crlb", "estimate", "jpd-ratio", "selftest"}) {
    const bool needs_config = std::string(name) != "selftest";
    const char* help = needs_config ? "run a sweep described by --config" : "run the invariant suite";
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, flags, needs_config);
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : tadc::kExitConfig;
  }
  try {
    return run_command(chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tadc::kExitFailure;
  }
}
