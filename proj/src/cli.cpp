#include "cpmmg/cli.hpp"

#include <chrono>
#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "cpmmg/engine.hpp"
#include "cpmmg/error.hpp"
#include "cpmmg/rng.hpp"

namespace cpmmg {

namespace {

struct RunOptions {
  std::string case_path;
  std::size_t years = 1000;
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  ScenarioFlags flags;
  std::size_t t_ini = 1;
  std::size_t predict_every = 0;
  bool predict_mean = false;
  std::optional<double> lambda_thr, lambda_ser, lambda_ess, ess_reserve;
  std::size_t lp_dumps = 0;
  std::size_t threads = 1;
  bool check_invariants = false;
  std::size_t histogram_bins = 20;
};

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

int execute(const RunOptions& o, std::ostream& out) {
  if (o.years == 0) throw ValidationError("--years must be at least 1");
  if (o.t_ini == 0) throw ValidationError("--t-ini must be at least 1");
  if (o.threads == 0) throw ValidationError("--threads must be at least 1");
  if (o.lambda_ser && !(*o.lambda_ser > 0.0)) throw ValidationError("--lambda-ser must be positive");
  if (o.lambda_ess && !(*o.lambda_ess >= 0.0)) throw ValidationError("--lambda-ess must be >= 0");

  const auto t0 = std::chrono::steady_clock::now();
  CaseModel model = scenario_transform(parse_case(o.case_path), o.flags);
  if (o.lambda_thr) model.defaults.lambda_thr = *o.lambda_thr;
  if (o.lambda_ser) model.defaults.lambda_ser = *o.lambda_ser;
  if (o.lambda_ess) model.defaults.lambda_ess = *o.lambda_ess;
  const ExogenousSeries series = build_series(model.series);

  SimulationConfig cfg;
  cfg.years = o.years;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.prediction.t_ini = o.t_ini;
  cfg.prediction.update_every = o.predict_every;
  cfg.prediction.truth = !o.predict_mean;
  cfg.island.ess_reserve_cost = o.ess_reserve;
  cfg.check_invariants = o.check_invariants;
  std::unique_ptr<LpDumpSink> dumps;
  if (o.lp_dumps > 0) {
    dumps = std::make_unique<LpDumpSink>(std::filesystem::path(o.out_dir) / "lp", o.lp_dumps);
    cfg.dumps = dumps.get();
  }

  const SimulationResult res = simulate(model, series, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const JointDispatchConfig joint = joint_config(model, series);
  RunMetadata meta;
  meta.seed = o.seed;
  meta.years = o.years;
  meta.flags = o.flags.as_map();
  meta.flags["truth_prediction"] = cfg.prediction.truth;
  meta.parameters = {{"t_ini", static_cast<double>(o.t_ini)},
                     {"predict_every", static_cast<double>(o.predict_every)},
                     {"lambda_thr", joint.lambda_thr},
                     {"lambda_ser", joint.lambda_ser},
                     {"lambda_ess", joint.lambda_ess}};
  if (o.ess_reserve) meta.parameters["ess_reserve_cost"] = *o.ess_reserve;
  std::ostringstream fingerprint;
  fingerprint << std::setprecision(17) << serialize_case(model);
  for (const auto& [k, v] : meta.parameters) fingerprint << k << '=' << v << ';';
  meta.config_hash = hex(fnv1a(fingerprint.str()));
  meta.wall_seconds = wall;
  emit_reports(res.report, meta, o.out_dir, o.histogram_bins);

  out << "EENS " << std::fixed << std::setprecision(4) << res.report.eens_total << " MWh/yr";
  if (res.report.cov) out << "  CoV " << std::setprecision(4) << *res.report.cov;
  else out << "  CoV n/a";
  out << "  years " << o.years << "  wall " << std::setprecision(2) << wall << " s";
  if (o.check_invariants) out << "  invariant violations " << res.invariants.violations;
  out << '\n';
  if (o.check_invariants && res.invariants.violations > 0)
    throw SimulationError("invariant violated: " + res.invariants.first);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adequacy assessment of cyber-physical multi-microgrid systems"};
  app.require_subcommand(1);
  RunOptions o;
  auto* run = app.add_subcommand("run", "Simulate sample years and write reports");
  run->add_option("--case", o.case_path, "Case file (JSON)")->required();
  run->add_option("--years", o.years, "Sample years")->capture_default_str();
  run->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  run->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  run->add_flag("--ideal-cyber", o.flags.ideal_cyber, "Controllers and cyber links never fail");
  run->add_flag("--no-internal-protection", o.flags.no_internal_protection, "Remove switches inside microgrids");
  run->add_flag("--backup-supply", o.flags.backup_supply, "Enable the normally open backup tie");
  run->add_flag("--distributed-control", o.flags.distributed_control,
                "DMS/MGCC failures ignored while the commanded controllers are up");
  run->add_flag("--ablate-indirect", o.flags.ablate_indirect, "Disable switch mis-operation and LC-failure effects");
  run->add_option("--t-ini", o.t_ini, "Hours of conservative operation before the first prediction")
      ->capture_default_str();
  run->add_option("--predict-every", o.predict_every, "Re-predict the repair time every n hours (0 = once)")
      ->capture_default_str();
  run->add_flag("--predict-mean", o.predict_mean, "Predict the expected instead of the true remaining repair time");
  run->add_option("--lambda-thr", o.lambda_thr, "Expensive-energy threshold ($/MWh), default from the case (2)");
  run->add_option("--lambda-ser", o.lambda_ser, "Service price on joint purchases ($/MWh), default from the case (0.01)");
  run->add_option("--lambda-ess", o.lambda_ess, "SOC-hold multiplier ($/MWh), default mean energy price");
  run->add_option("--ess-reserve-cost", o.ess_reserve,
                  "Island conservative step discharges only for segments at or above this cost");
  run->add_option("--emit-lp-dumps", o.lp_dumps, "Write the first n dispatch LPs to <out>/lp")
      ->capture_default_str();
  run->add_option("--threads", o.threads, "Worker threads (results do not depend on it)")->capture_default_str();
  run->add_flag("--check-invariants", o.check_invariants, "Check balance, SOC and shedding bounds every hour");
  run->add_option("--histogram-bins", o.histogram_bins, "Bins in histogram.csv")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  try {
    return execute(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "simulation error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace cpmmg
