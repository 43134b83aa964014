#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cpmmg/casemodel.hpp"
#include "cpmmg/cybernet.hpp"
#include "cpmmg/lp.hpp"
#include "cpmmg/series.hpp"
#include "cpmmg/zoning.hpp"

namespace cpmmg {

/// Shedding cost added on top of the segment cost for load that has no
/// working load controller and cannot be served.
inline constexpr double kEmergencyPenalty = 1e4;

// ---------------------------------------------------------------- inputs

/// Hourly data of one microgrid part over a scheduling slice. Segment
/// quantities are peak values scaled by the hourly load fraction.
struct PartProfile {
  std::size_t microgrid = 0;
  std::size_t hours = 0;
  double delta_t = 1.0;
  std::vector<double> wind;  // available MW (capacity x factor x availability)
  std::vector<double> pv;
  std::vector<double> diesel_cap;   // MW, availability applied
  std::vector<double> diesel_cost;  // fuel + emission per MWh
  std::optional<EssSpec> ess;       // present when the ESS sits in this part
  bool ess_available = false;
  std::vector<double> segment_cost;
  std::vector<double> demand_peak;  // D_r at load fraction 1
  std::vector<double> forced_peak;  // F_r: behind failed transformers
  std::vector<double> upper_peak;   // U_r: controllable or forced
  std::vector<double> load_frac;
  std::vector<double> price;

  std::size_t segments() const { return segment_cost.size(); }
  double demand(std::size_t r, std::size_t t) const { return demand_peak[r] * load_frac[t]; }
  double forced(std::size_t r, std::size_t t) const { return forced_peak[r] * load_frac[t]; }
  double upper(std::size_t r, std::size_t t) const { return upper_peak[r] * load_frac[t]; }
  double total_demand(std::size_t t) const;
  double total_forced(std::size_t t) const;
  /// Slice of hours [from, from + count).
  PartProfile slice(std::size_t from, std::size_t count) const;
};

/// `series_hour` is an absolute index into the series (wrapped).
PartProfile make_profile(const CaseModel& model, const MgPart& part, const MicrogridAvailability& availability,
                         const ExogenousSeries& series, std::size_t series_hour, std::size_t hours);

/// Per-hour dispatch of one part. soc[t] is the state at the end of hour t.
struct PartSchedule {
  std::size_t microgrid = 0;
  std::size_t hours = 0;
  std::vector<std::vector<double>> diesel;  // [unit][t]
  std::vector<double> charge, discharge, wind, pv, buy, sell, soc;
  std::vector<std::vector<double>> shed;  // [segment][t], forced and emergency included
  double soc_initial = 0.0;

  explicit PartSchedule(const PartProfile& profile = {});
  double exchange(std::size_t t) const { return buy[t] - sell[t]; }
  double total_shed(std::size_t t) const;
  /// Copies hours [0, count) of `other` to [offset, offset + count).
  void splice(const PartSchedule& other, std::size_t offset, std::size_t count);
};

/// Tree of the parts in one zone, oriented away from its root part.
struct ZoneNetwork {
  struct Edge {
    std::size_t line = 0;
    std::size_t parent = 0;
    std::size_t child = 0;
    double capacity = 0.0;
    std::vector<std::size_t> subtree;  // parts at or below the child
  };
  std::size_t parts = 0;
  std::size_t root = 0;
  std::vector<Edge> edges;
  bool has_supply = false;
  double supply_capacity = 0.0;
};

ZoneNetwork zone_network(const CaseModel& model, const Zone& zone);

/// Flow on every edge (positive toward the child) and at the supply point
/// (positive = import) for the given per-part exchanges.
struct NetworkFlows {
  std::vector<double> line;
  double supply = 0.0;
};
NetworkFlows network_flows(const ZoneNetwork& net, const std::vector<double>& exchange);

// ---------------------------------------------------------------- settings

/// Cost multipliers of joint operation.
struct JointDispatchConfig {
  double lambda_ess = 0.0;  // SOC-hold multiplier
  double lambda_ser = 0.01;
  double lambda_thr = 2.0;
};

struct PredictionPolicy {
  std::size_t t_ini = 1;         // hours before the first prediction
  std::size_t update_every = 0;  // re-predict every n hours, 0 = never
  bool truth = true;             // predictions equal the true remaining repair time
  std::size_t max_horizon = 48;  // longest horizon LP in hours, longer predictions are solved in chunks

  std::size_t predict_end(std::size_t now, std::size_t true_end, double mean_remaining) const;
};

struct IslandConfig {
  /// When set, the conservative island step keeps ESS energy for
  /// segments at or above this cost.
  std::optional<double> ess_reserve_cost;
};

/// Writes LP files for the first `limit` problems.
class LpDumpSink {
 public:
  LpDumpSink(std::filesystem::path directory, std::size_t limit);
  void dump(const LpProblem& problem, const std::string& tag);

 private:
  std::filesystem::path directory_;
  std::size_t limit_;
  std::size_t count_ = 0;
  std::mutex mutex_;
};

struct DispatchSettings {
  JointDispatchConfig joint;
  PredictionPolicy prediction;
  IslandConfig island;
  LpDumpSink* dumps = nullptr;
  std::string dump_tag;
};

// ---------------------------------------------------------------- LP builder

enum class Formulation : std::uint8_t { p1, p2b, p3a, p3b };

struct ExchangeCap {
  double import = kInf;
  double export_ = kInf;
};

struct ZoneLpOptions {
  Formulation form = Formulation::p1;
  JointDispatchConfig joint;
  std::optional<std::vector<double>> terminal_soc;   // per part, P1 only
  const std::vector<std::vector<ExchangeCap>>* caps = nullptr;  // [part][t]
  bool names = false;
};

struct ZoneLpResult {
  LpStatus status = LpStatus::infeasible;
  std::vector<PartSchedule> parts;
  std::vector<std::vector<double>> line_flow;  // [edge][t]
  double objective = 0.0;
  LpProblem problem;
};

/// Builds and solves one LP over all parts of a zone. P1 and P2(B) take a
/// single part; P3(A)/(B) couple the parts through line flow variables with
/// zero upstream exchange.
ZoneLpResult solve_zone_lp(const std::vector<PartProfile>& parts, const ZoneNetwork& net,
                           const std::vector<double>& soc_start, const ZoneLpOptions& options,
                           const DispatchSettings* settings = nullptr);

// ---------------------------------------------------------------- strategies

/// Proportional rule: scales the same-direction claims so they sum to
/// capacity + counterflow. Identity when the claims already fit.
std::vector<double> ps_allocate(const std::vector<double>& claims, double capacity, double counterflow);

/// MGCC P1 for one part over its profile, terminal SOC equal to the start.
PartSchedule schedule_normal_day(const PartProfile& profile, double soc_start, const DispatchSettings* settings = nullptr,
                                 const std::vector<ExchangeCap>* caps = nullptr);

struct CoordinationResult {
  std::vector<PartSchedule> parts;
  std::vector<std::vector<double>> line_flow;  // [edge][t]
  std::vector<double> supply_flow;
  std::size_t iterations = 0;
};

/// DMS P1: checks line and supply limits of the parts' P1 schedules and
/// rescales the congested claims with ps_allocate until no limit is
/// violated. Throws SimulationError after 20 rounds.
CoordinationResult dms_coordinate(const std::vector<PartProfile>& parts, const ZoneNetwork& net,
                                  const std::vector<double>& soc_start, const DispatchSettings* settings = nullptr);

/// One-hour conservative island dispatch: renewables, charging, diesel in merit
/// order, discharge, then shedding cheapest segments first. `t` indexes
/// the profile.
PartSchedule island_conservative_step(const PartProfile& profile, std::size_t t, double soc_prev,
                                      const IslandConfig& config = {});

/// P2(B): P1 without exchange and with a free terminal SOC.
PartSchedule island_horizon(const PartProfile& profile, double soc_start, const DispatchSettings* settings = nullptr);

/// P3(A) for hour t of the profiles.
std::vector<PartSchedule> joint_step(const std::vector<PartProfile>& parts, const ZoneNetwork& net, std::size_t t,
                                     const std::vector<double>& soc_prev, const JointDispatchConfig& config,
                                     const DispatchSettings* settings = nullptr);

/// P3(B) over the whole profile length.
std::vector<PartSchedule> joint_horizon(const std::vector<PartProfile>& parts, const ZoneNetwork& net,
                                        const std::vector<double>& soc_start, const JointDispatchConfig& config,
                                        const DispatchSettings* settings = nullptr);

// ---------------------------------------------------------------- checks

struct InvariantReport {
  std::size_t hours_checked = 0;
  std::size_t violations = 0;
  std::string first;

  void fail(const std::string& what);
  void merge(const InvariantReport& other);
};

/// Power balance, device limits, SOC bounds and recursion, shedding bounds.
void check_schedule(const PartProfile& profile, const PartSchedule& schedule, bool exchange_allowed,
                    InvariantReport& report, double tol = 1e-6);

// ---------------------------------------------------------------- normal days

/// Grid-connected day schedule with everything available, started from the
/// reference SOC; one entry per series day, computed on demand. Safe to
/// share between runs of one case/series pair and between threads.
class NormalOperationCache {
 public:
  NormalOperationCache(const CaseModel& model, const ExogenousSeries& series);

  /// SOC of each microgrid's ESS at the start of the series hour.
  std::vector<double> soc_at(std::size_t series_hour);
  bool compatible(const CaseModel& model, const ExogenousSeries& series) const;
  std::size_t days_computed() const;

 private:
  struct Day {
    std::vector<double> start;                // per microgrid
    std::vector<std::vector<double>> soc_end;  // [mg][hour]
  };
  std::shared_ptr<const Day> day(std::size_t series_day);

  CaseModel model_;
  const ExogenousSeries* series_;
  Zone whole_;
  ZoneNetwork net_;
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<const Day>> days_;
};

/// Reference SOC of a microgrid's ESS (0 without one).
double reference_soc(const CaseModel& model, std::size_t mg);

}  // namespace cpmmg
