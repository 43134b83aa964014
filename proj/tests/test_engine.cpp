#include <gtest/gtest.h>

#include "cpmmg/casemodel.hpp"
#include "cpmmg/engine.hpp"
#include "cpmmg/error.hpp"
#include "support.hpp"

using namespace cpmmg;
using namespace cpmmg::testing;

namespace {

SimulationResult run(const CaseModel& m, std::size_t years, std::uint64_t seed, std::size_t threads = 1) {
  const auto series = build_series(m.series);
  SimulationConfig cfg;
  cfg.years = years;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.check_invariants = true;
  return simulate(m, series, cfg);
}

}  // namespace

TEST(Scenario, IdealCyberZeroesCyberRates) {
  const auto m = parse_case(bundled_case());
  ScenarioFlags f;
  f.ideal_cyber = true;
  const auto t = scenario_transform(m, f);
  std::size_t cyber = 0;
  for (std::size_t c = 0; c < t.components.size(); ++c) {
    if (is_cyber(t.components[c].kind)) {
      ++cyber;
      EXPECT_EQ(t.components[c].failure_rate, 0.0) << t.components[c].id;
    } else {
      EXPECT_EQ(t.components[c].failure_rate, m.components[c].failure_rate);
    }
  }
  EXPECT_GT(cyber, 10u);
}

TEST(Scenario, RejectsContradictions) {
  const auto m = parse_case(bundled_case());
  ScenarioFlags a;
  a.ideal_cyber = a.distributed_control = true;
  EXPECT_THROW(scenario_transform(m, a), ValidationError);
  ScenarioFlags b;
  b.ideal_cyber = b.ablate_indirect = true;
  EXPECT_THROW(scenario_transform(m, b), ValidationError);
  ScenarioFlags c;
  c.backup_supply = true;
  const auto single = parse_case(write_single_mg_case(scratch_dir("engine_tie"), 1.0, 100.0));
  EXPECT_THROW(scenario_transform(single, c), ValidationError);
}

TEST(Scenario, DefaultsLeaveTheCaseUnchanged) {
  const auto m = parse_case(bundled_case());
  EXPECT_EQ(serialize_case(scenario_transform(m, {})), serialize_case(m));
}

TEST(Simulate, FailureFreeSystemHasNoShedding) {
  const auto m = parse_case(write_single_mg_case(scratch_dir("engine_zero"), 0.0, 100.0));
  const auto res = run(m, 20, 1);
  EXPECT_EQ(res.report.eens_total, 0.0);
  EXPECT_EQ(res.stats.windows, 0u);
  EXPECT_FALSE(res.report.cov.has_value());
}

TEST(Simulate, SingleMicrogridMatchesUnavailability) {
  // no DERs: every outage hour of the upstream grid sheds the whole 1 MW load
  const double lambda = 10.0, mu = 100.0;
  const auto m = parse_case(write_single_mg_case(scratch_dir("engine_analytic"), lambda, mu));
  const auto res = run(m, 400, 3);
  const double want = 8760.0 * lambda / (lambda + mu);
  EXPECT_NEAR(res.report.eens_total, want, 0.05 * want);
  EXPECT_EQ(res.report.mode_total(LedgerMode::gc), 0.0);
  EXPECT_EQ(res.invariants.violations, 0u) << res.invariants.first;
}

TEST(Simulate, ShutdownWindowBooksWholeLoad) {
  const auto m = parse_case(write_single_mg_case(scratch_dir("engine_sd"), 0.0, 100.0));
  const auto series = build_series(m.series);
  NormalOperationCache cache(m, series);
  EngineContext ctx{m, series, CyberRoutes(m), cache, {}, true};
  ctx.settings.joint = joint_config(m, series);
  ContingencyWindow w;
  w.start = 100;
  w.end = 105;
  w.failed = {{m.find("mgcc1"), 105.0}};
  auto rec = YearRecord::empty(m, 0);
  InvariantReport inv;
  run_window(ctx, w, 0, {0.0}, rec, &inv);
  EXPECT_NEAR(rec.eens[0][0][static_cast<std::size_t>(LedgerMode::sd)], 5.0, 1e-9);
  EXPECT_NEAR(rec.total(), 5.0, 1e-9);
}

TEST(Simulate, SameSeedSameReport) {
  const auto m = parse_case(bundled_case());
  const auto a = run(m, 15, 77), b = run(m, 15, 77);
  EXPECT_EQ(a.ledger.years(), b.ledger.years());
  EXPECT_EQ(a.report.yearly_totals, b.report.yearly_totals);
  EXPECT_NE(a.report.yearly_totals, run(m, 15, 78).report.yearly_totals);
}

TEST(Simulate, ThreadCountDoesNotMatter) {
  const auto m = parse_case(bundled_case());
  const auto a = run(m, 24, 5, 1), b = run(m, 24, 5, 3);
  EXPECT_EQ(a.ledger.years(), b.ledger.years());
  EXPECT_EQ(a.report.eens_total, b.report.eens_total);
  EXPECT_EQ(a.invariants.violations, 0u) << a.invariants.first;
}

TEST(Simulate, DistributedControlDoesNotHurt) {
  const auto m = parse_case(bundled_case());
  ScenarioFlags f;
  f.distributed_control = true;
  const auto central = run(m, 100, 9);
  const auto distributed = run(scenario_transform(m, f), 100, 9);
  EXPECT_LE(distributed.report.eens_total, central.report.eens_total * 1.001);
}

TEST(Simulate, SharedCacheGivesSameAnswer) {
  const auto m = parse_case(bundled_case());
  const auto series = build_series(m.series);
  NormalOperationCache cache(m, series);
  SimulationConfig cfg;
  cfg.years = 10;
  cfg.seed = 13;
  cfg.cache = &cache;
  const auto with = simulate(m, series, cfg);
  EXPECT_GT(cache.days_computed(), 0u);
  cfg.cache = nullptr;
  EXPECT_EQ(simulate(m, series, cfg).report.yearly_totals, with.report.yearly_totals);
}

TEST(Prediction, TruthAndMean) {
  PredictionPolicy p;
  EXPECT_EQ(p.predict_end(10, 30, 5.0), 30u);
  p.truth = false;
  EXPECT_EQ(p.predict_end(10, 30, 5.0), 15u);
  EXPECT_EQ(p.predict_end(10, 30, 0.2), 11u);
}

TEST(Prediction, LongHorizonsAreChunked) {
  PredictionPolicy p;
  EXPECT_EQ(p.predict_end(10, 100, 0.0), 10u + p.max_horizon);
}

TEST(Simulate, RejectsZeroYears) {
  const auto m = parse_case(write_single_mg_case(scratch_dir("engine_years"), 0.0, 100.0));
  const auto series = build_series(m.series);
  SimulationConfig cfg;
  cfg.years = 0;
  EXPECT_THROW(simulate(m, series, cfg), ValidationError);
}
