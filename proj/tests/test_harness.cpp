#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tadc/errors.hpp"
#include "tadc/commands.hpp"
#include "tadc/config.hpp"
#include "tadc/harness.hpp"
#include "tadc/parallel.hpp"

using namespace tadc;

TEST_CASE("SNR to symbol power") {
  CHECK(snr_to_power(0.0, 1.0) == 1.0);
  CHECK(snr_to_power(10.0, 1.0) == doctest::Approx(10.0));
  CHECK(snr_to_power(-3.0, 2.0) == doctest::Approx(2.0 * std::pow(10.0, -0.3)));
  CHECK_THROWS(snr_to_power(0.0, 0.0));
}

TEST_CASE("NMSE and SER") {
  CMatrix H(1, 2);
  H << Complex(1, 0), Complex(0, 1);
  CMatrix Hh = H;
  CHECK(nmse(H, H) == 0.0);
  Hh(0, 0) += 0.5;
  CHECK(nmse(Hh, H) == doctest::Approx(0.125));
  CMatrix X(1, 4), Xh(1, 4);
  X << 1, 2, 3, 4;
  Xh << 1, 2, 0, 4;
  CHECK(ser(Xh, X) == doctest::Approx(0.25));
  CHECK(ser(X, X) == 0.0);
  CHECK_THROWS(nmse(CMatrix::Zero(1, 2), CMatrix::Zero(1, 2)));
}

TEST_CASE("name parsing round trips") {
  for (EstimatorKind e : {EstimatorKind::oracle, EstimatorKind::nr_ml, EstimatorKind::em, EstimatorKind::pem,
                          EstimatorKind::gpem, EstimatorKind::viem, EstimatorKind::viem_pa, EstimatorKind::zf})
    CHECK(parse_estimator(to_string(e)) == e);
  CHECK(parse_adc_kind("po") == AdcKind::parallel_one_bit);
  CHECK(parse_threshold_scheme("DT") == ThresholdScheme::dynamic);
  CHECK_THROWS(parse_estimator("gamp"));
}

TEST_CASE("oracle estimator has zero error everywhere") {
  ExperimentConfig cfg;
  cfg.system.M = 3;
  cfg.system.K = 2;
  cfg.system.T_p = 6;
  cfg.system.T_d = 3;
  cfg.estimator = EstimatorKind::oracle;
  for (double snr : {-10.0, 0.0, 10.0}) {
    cfg.snr_db = snr;
    for (const TrialOutcome& t : run_trials(cfg, 5, 1, 0, 1)) {
      REQUIRE(t.ok);
      CHECK(t.nmse == 0.0);
    }
  }
}

TEST_CASE("scenes do not depend on the estimator") {
  ExperimentConfig a;
  a.system.M = 4;
  a.system.K = 1;
  a.system.T_p = 6;
  a.system.T_d = 4;
  a.snr_db = 3.0;
  ExperimentConfig b = a;
  b.estimator = EstimatorKind::zf;
  RandomStream ra(5), rb(5);
  const TrialScene sa = realize_scene(a.at_snr(), ra), sb = realize_scene(b.at_snr(), rb);
  CHECK(sa.H == sb.H);
  CHECK(sa.Xp == sb.Xp);
  CHECK(sa.obs_p.re == sb.obs_p.re);
  CHECK(sa.spec.tau2 == sb.spec.tau2);
}

TEST_CASE("realized quantizer thresholds") {
  ExperimentConfig cfg;
  cfg.system.M = 2;
  cfg.system.T_p = 3;
  cfg.quantizer.scheme = ThresholdScheme::fixed;
  cfg.quantizer.delta = 0.7;
  CMatrix Y = CMatrix::Zero(2, 3);
  Y(0, 0) = 12.0;
  QuantizerSpec s = realize_quantizer(cfg, Y);
  CHECK(s.tau2 == doctest::Approx(0.7));
  CHECK(s.tau1 == doctest::Approx(-0.7));
  cfg.quantizer.scheme = ThresholdScheme::dynamic;
  cfg.quantizer.c = 2.0;
  s = realize_quantizer(cfg, Y);
  CHECK(s.tau2 == doctest::Approx(1.0));
  CHECK(s.scale > 0);
}

TEST_CASE("trial results are independent of thread count") {
  ExperimentConfig cfg;
  cfg.system.M = 4;
  cfg.system.K = 1;
  cfg.system.T_p = 8;
  cfg.system.T_d = 4;
  cfg.estimator = EstimatorKind::em;
  cfg.snr_db = 2.0;
  const auto a = run_trials(cfg, 8, 3, 1, 1);
  const auto b = run_trials(cfg, 8, 3, 1, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].nmse == b[i].nmse);
    CHECK(a[i].llf_trace == b[i].llf_trace);
  }
}

TEST_CASE("deterministic trials carry a per-realization bound") {
  ExperimentConfig cfg;
  cfg.system.M = 2;
  cfg.system.K = 1;
  cfg.system.T_p = 20;
  cfg.estimator = EstimatorKind::nr_ml;
  cfg.quantizer.scheme = ThresholdScheme::fixed;
  for (const TrialOutcome& t : run_trials(cfg, 4, 9, 0, 1)) {
    REQUIRE(t.ok);
    REQUIRE(t.ncrlb.has_value());
    CHECK(*t.ncrlb > 0);
  }
}

TEST_CASE("aggregation statistics") {
  std::vector<TrialOutcome> trials(4);
  const double v[4] = {0.1, 0.2, 0.3, 0.4};
  for (int i = 0; i < 4; ++i) {
    trials[i].ok = true;
    trials[i].nmse = v[i];
    trials[i].ser = i < 2 ? 0.0 : 0.5;
    trials[i].iterations = 2 * i;
    trials[i].converged = i != 3;
  }
  MetricRecord r = aggregate(trials);
  CHECK(r.nmse == doctest::Approx(0.25));
  CHECK(r.nmse_db == doctest::Approx(10 * std::log10(0.25)));
  // Sample standard deviation over sqrt(n).
  CHECK(r.mc_std_err == doctest::Approx(std::sqrt(0.05 / 3.0 / 4.0)));
  CHECK(*r.ser == doctest::Approx(0.25));
  CHECK(r.mean_iterations == doctest::Approx(3.0));
  CHECK(r.not_converged == 1);
  CHECK(r.valid);

  trials[0].ok = false;
  trials[0].error = "boom";
  r = aggregate(trials);
  CHECK(r.failed == 1);
  CHECK(r.realizations_used == 3);
  CHECK_FALSE(r.valid);  // 25% failed
  CHECK(r.first_error == "boom");
}

TEST_CASE("SNR sweep is monotone for Newton ML under DT") {
  SweepPlan plan;
  plan.base.system.M = 8;
  plan.base.system.K = 2;
  plan.base.system.T_p = 100;
  plan.base.estimator = EstimatorKind::nr_ml;
  plan.axes = {{"snr_db", {"-10", "-5", "0", "5"}}};
  plan.num_realizations = 30;
  plan.seed = 61;
  const auto rec = run_sweep(plan, 1);
  REQUIRE(rec.size() == 4);
  for (std::size_t i = 1; i < rec.size(); ++i) CHECK(rec[i].nmse <= rec[i - 1].nmse);
  for (const MetricRecord& r : rec) CHECK(r.ncrlb_db.has_value());
}

TEST_CASE("sweep points enumerate the cartesian product") {
  SweepPlan plan;
  plan.axes = {{"M", {"2", "4"}}, {"snr_db", {"0", "5", "10"}}};
  const auto pts = plan.points();
  REQUIRE(pts.size() == 6);
  CHECK(pts[0][0].second == "2");
  CHECK(pts[1][1].second == "5");
  CHECK(pts[3][0].second == "4");
  ExperimentConfig cfg;
  apply_axis_value(cfg, "estimator", "pem");
  CHECK(cfg.estimator == EstimatorKind::pem);
  apply_axis_value(cfg, "threshold_scheme", "fixed");
  CHECK(cfg.quantizer.scheme == ThresholdScheme::fixed);
  CHECK_THROWS(apply_axis_value(cfg, "colour", "blue"));
}

TEST_CASE("hybrid NCRLB for gaussian-prior points") {
  ExperimentConfig cfg;
  cfg.system.M = 2;
  cfg.system.K = 1;
  cfg.system.T_p = 10;
  cfg.system.channel_kind = ChannelKind::gaussian_prior;
  cfg.hybrid_draws = 500;
  const auto a = hybrid_ncrlb(cfg, 4, 1), b = hybrid_ncrlb(cfg, 4, 2);
  REQUIRE(a.has_value());
  CHECK(*a == *b);
  CHECK(*a > 0);
  CHECK(*a < 1.0);  // never worse than the prior alone
}

TEST_CASE("parallel_for covers every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 3, [&](std::size_t i) { hits[i]++; });
  for (int h : hits) CHECK(h == 1);
}

// ---------------------------------------------------------------------------
// Configuration files

TEST_CASE("config parsing") {
  const ConfigFile f = parse_config_string(
      "# comment\n[system]\nM = 4 ; trailing\nK=2\nT_p = 8\n\n[sweep]\nsnr_db = -5:5:5\nseed = 9\n", "t.ini");
  const CliConfig c = load_config(f);
  CHECK(c.plan.base.system.M == 4);
  CHECK(c.plan.base.system.K == 2);
  CHECK(c.plan.seed == 9);
  REQUIRE(c.plan.axes.size() == 1);
  CHECK(c.plan.axes[0].values.size() == 3);
  CHECK(parse_number_list("0:0.25:1").size() == 5);
  CHECK(split_list(" a, b ,c ") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("config errors carry line numbers") {
  auto line_of = [](const std::string& text) {
    try {
      load_config(parse_config_string(text, "x.ini"));
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("[system]\nM = 4\nbogus = 1\n") == 3);
  CHECK(line_of("[nowhere]\nM = 4\n") == 1);
  CHECK(line_of("M = 4\n") == 1);
  CHECK(line_of("[system]\nM = 4\nM = 5\n") == 3);
  CHECK(line_of("[system]\nM = four\n") == 2);
  CHECK(line_of("[system]\nK = 9\n[estimator]\nname = em\n[system2]\n") == 5);
  CHECK(line_of("[system]\nM = 4\n") == -1);
  try {
    load_config(parse_config_string("[system]\nK = 0\n", "y.ini"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("y.ini:", 0) == 0);
  }
}

TEST_CASE("config hash ignores formatting but not content") {
  const CliConfig a = load_config(parse_config_string("[system]\nM = 4\nK = 1\n"));
  const CliConfig b = load_config(parse_config_string("# hi\n[system]\nK=1\nM=4\n"));
  const CliConfig c = load_config(parse_config_string("[system]\nM = 5\nK = 1\n"));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("formatting helpers") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_db(0.1) == "-10");
  CHECK(json_twin_path("out/run.csv") == "out/run.json");
  CHECK(json_twin_path("run") == "run.json");
  Table t;
  t.meta = {"tadc test"};
  t.columns = {"a", "b"};
  t.rows = {{"1", "2"}};
  std::ostringstream os;
  write_csv(os, t);
  CHECK(os.str() == "# tadc test\na,b\n1,2\n");
}
