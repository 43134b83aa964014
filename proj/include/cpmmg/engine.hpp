#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cpmmg/adequacy.hpp"
#include "cpmmg/casemodel.hpp"
#include "cpmmg/cybernet.hpp"
#include "cpmmg/dispatch.hpp"
#include "cpmmg/sampler.hpp"
#include "cpmmg/series.hpp"
#include "cpmmg/zoning.hpp"

namespace cpmmg {

struct ScenarioFlags {
  bool ideal_cyber = false;
  bool no_internal_protection = false;
  bool backup_supply = false;
  bool distributed_control = false;
  bool ablate_indirect = false;

  std::map<std::string, bool> as_map() const;
};

/// Applies the study toggles to a copy of the case. Throws ValidationError
/// for contradictory combinations.
CaseModel scenario_transform(const CaseModel& model, const ScenarioFlags& flags);

/// Multipliers from the case defaults; lambda_ess falls back to the mean price.
JointDispatchConfig joint_config(const CaseModel& model, const ExogenousSeries& series);

struct SimulationConfig {
  std::size_t years = 1;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  PredictionPolicy prediction;
  IslandConfig island;
  LpDumpSink* dumps = nullptr;
  bool check_invariants = false;
  /// Normal-day SOC cache to reuse across runs; built privately when null
  /// or incompatible with the case.
  NormalOperationCache* cache = nullptr;
};

struct SimulationStats {
  std::size_t windows = 0;
  std::size_t fast_windows = 0;  // settled without an LP
  std::size_t island_windows = 0;
  std::size_t joint_windows = 0;
  std::size_t shutdown_windows = 0;

  void merge(const SimulationStats& other);
};

struct SimulationResult {
  AdequacyLedger ledger;
  AdequacyReport report;
  InvariantReport invariants;
  SimulationStats stats;
};

/// Shared read-only state of one run.
struct EngineContext {
  const CaseModel& model;
  const ExogenousSeries& series;
  CyberRoutes routes;
  NormalOperationCache& cache;
  DispatchSettings settings;
  bool check_invariants = false;
};

struct WindowOutcome {
  std::vector<double> soc_end;   // per microgrid
  std::vector<char> carry_soc;   // the ESS ended the window outside NO
  SimulationStats stats;
};

/// Dispatches one contingency window of `year` and books its shedding.
/// `soc_start` is per microgrid.
WindowOutcome run_window(const EngineContext& ctx, const ContingencyWindow& window, std::size_t year,
                         const std::vector<double>& soc_start, YearRecord& record, InvariantReport* invariants);

/// True when a NO zone can be settled in closed form: no line or supply
/// limit can bind and buying always beats shedding.
bool no_zone_fast_path(const std::vector<PartProfile>& parts, const ZoneNetwork& net);

SimulationResult simulate(const CaseModel& model, const ExogenousSeries& series, const SimulationConfig& config);

}  // namespace cpmmg
