#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cpmmg/series.hpp"

namespace cpmmg {

using ComponentIndex = std::uint32_t;
using SectionIndex = std::uint32_t;

inline constexpr ComponentIndex kNoComponent = std::numeric_limits<ComponentIndex>::max();
/// Pseudo-sections used as switch endpoints.
inline constexpr SectionIndex kSubstationNode = std::numeric_limits<SectionIndex>::max();
inline constexpr SectionIndex kBackupNode = kSubstationNode - 1;

enum class ComponentKind : std::uint8_t {
  line,
  transformer,
  busbar,
  power_switch,
  physical_der,
  physical_ess,
  dms,
  mgcc,
  mc,
  lc,
  cbc,
  cyber_link,
  upstream,
};

std::string_view to_string(ComponentKind kind);
std::optional<ComponentKind> parse_component_kind(std::string_view text);
/// Controllers and communication links (everything the ideal-cyber study zeroes).
bool is_cyber(ComponentKind kind);

/// Two-state repairable component; rates are occurrences per year.
struct ComponentSpec {
  std::string id;
  ComponentKind kind = ComponentKind::line;
  double failure_rate = 0.0;
  double repair_rate = 0.0;

  bool operator==(const ComponentSpec&) const = default;
};

/// Physical unit, its micro controller and the section it is wired into.
struct DerUnit {
  ComponentIndex physical = kNoComponent;
  ComponentIndex mc = kNoComponent;
  SectionIndex section = 0;

  bool operator==(const DerUnit&) const = default;
};

struct RenewableSpec {
  double capacity = 0.0;  // MW
  DerUnit unit;

  bool operator==(const RenewableSpec&) const = default;
};

struct DieselSpec {
  std::string id;
  double max_output = 0.0;     // MW, minimum output is zero
  double fuel_cost = 0.0;      // per MWh
  double emission_cost = 0.0;  // per MWh
  DerUnit unit;

  double marginal_cost() const { return fuel_cost + emission_cost; }
  bool operator==(const DieselSpec&) const = default;
};

struct EssSpec {
  double max_charge = 0.0;     // MW, grid side
  double max_discharge = 0.0;  // MW, grid side
  double charge_eff = 1.0;
  double discharge_eff = 1.0;
  double soc_min = 0.0;  // MWh
  double soc_max = 0.0;  // MWh
  double charge_cost = 0.0;
  double discharge_cost = 0.0;
  DerUnit unit;

  bool operator==(const EssSpec&) const = default;
};

struct LoadSegment {
  double share = 0.0;  // proportion of the load point demand
  double cost = 0.0;   // interruption cost per MWh

  bool operator==(const LoadSegment&) const = default;
};

struct LoadPointSpec {
  std::string id;
  int bus = 0;
  double peak_load = 0.0;  // MW
  std::vector<LoadSegment> segments;
  ComponentIndex transformer = kNoComponent;
  ComponentIndex lc = kNoComponent;
  SectionIndex section = 0;

  bool operator==(const LoadPointSpec&) const = default;
};

/// Load-point segments with equal interruption cost merged into one
/// microgrid segment. `costs` is strictly increasing; `segment_of[l][k]`
/// is the microgrid segment of segment k of load point l.
struct SegmentCatalog {
  std::vector<double> costs;
  std::vector<std::vector<std::size_t>> segment_of;

  std::size_t size() const { return costs.size(); }
  bool operator==(const SegmentCatalog&) const = default;
};

struct MicrogridSpec {
  int tag = 0;
  ComponentIndex mgcc = kNoComponent;
  std::optional<RenewableSpec> wind;
  std::optional<RenewableSpec> pv;
  std::vector<DieselSpec> diesels;
  std::optional<EssSpec> ess;
  std::vector<LoadPointSpec> load_points;
  SegmentCatalog catalog;  // derived by aggregate_segments

  bool operator==(const MicrogridSpec&) const = default;
};

/// Protection section: the smallest region that switches can isolate.
struct SectionSpec {
  std::string id;
  std::size_t microgrid = 0;
  std::vector<ComponentIndex> elements;  // lines and busbars inside

  bool operator==(const SectionSpec&) const = default;
};

enum class SwitchRole : std::uint8_t { internal, poi, substation, backup };

std::string_view to_string(SwitchRole role);

struct SwitchSpec {
  std::string id;
  SwitchRole role = SwitchRole::internal;
  ComponentIndex device = kNoComponent;  // physical breaker, optional
  ComponentIndex cbc = kNoComponent;
  std::vector<ComponentIndex> controllers;
  SectionIndex a = 0;
  SectionIndex b = 0;  // may be kSubstationNode / kBackupNode

  bool operator==(const SwitchSpec&) const = default;
};

/// Tie line between microgrids, directed away from the substation.
struct MmgLine {
  std::size_t from = 0;  // microgrid index (sending end, nearer the root)
  std::size_t to = 0;
  double capacity = 0.0;  // MW
  std::size_t poi_switch = 0;

  bool operator==(const MmgLine&) const = default;
};

struct Substation {
  double capacity = 0.0;  // MW
  ComponentIndex upstream = kNoComponent;
  ComponentIndex upstream_link = kNoComponent;  // DMS <-> upstream cyber link
  ComponentIndex dms = kNoComponent;
  std::size_t feeder_switch = 0;
  SectionIndex root_section = 0;

  bool operator==(const Substation&) const = default;
};

struct BackupTie {
  bool present = false;
  bool enabled = false;
  std::size_t tie_switch = 0;
  double capacity = 0.0;

  bool operator==(const BackupTie&) const = default;
};

struct CyberEdge {
  ComponentIndex link = kNoComponent;
  ComponentIndex a = kNoComponent;
  ComponentIndex b = kNoComponent;

  bool operator==(const CyberEdge&) const = default;
};

struct CaseDefaults {
  double delta_t = 1.0;             // hours
  double soc_start_fraction = 0.5;  // reference SOC of each normal day
  double lambda_ser = 0.01;
  std::optional<double> lambda_ess;  // empty: mean energy price
  double lambda_thr = 2.0;

  bool operator==(const CaseDefaults&) const = default;
};

/// Behaviour switches set by scenario transforms.
struct ControlOptions {
  bool distributed_control = false;
  bool ablate_indirect = false;
  bool no_internal_protection = false;  // internal switches act as solid joints

  bool operator==(const ControlOptions&) const = default;
};

struct CaseModel {
  std::string name;
  std::vector<ComponentSpec> components;  // sorted by id
  std::map<std::string, ComponentIndex, std::less<>> component_index;
  std::vector<MicrogridSpec> microgrids;
  std::vector<SectionSpec> sections;
  std::vector<SwitchSpec> switches;
  std::vector<MmgLine> lines;
  Substation substation;
  BackupTie backup;
  std::vector<CyberEdge> cyber_edges;
  CaseDefaults defaults;
  ControlOptions control;
  SeriesSpec series;

  ComponentIndex find(std::string_view id) const;
  const ComponentSpec& component(ComponentIndex index) const { return components.at(index); }
  std::size_t root_microgrid() const { return sections.at(substation.root_section).microgrid; }

  bool operator==(const CaseModel&) const = default;
};

/// Parses and fully validates a case document. Relative CSV paths in the
/// series block resolve against the case file's directory.
CaseModel parse_case(const std::filesystem::path& path);
CaseModel parse_case_text(std::string_view text, const std::filesystem::path& base_dir = {});
std::string serialize_case(const CaseModel& model);

/// Re-runs every structural check; throws ValidationError on the first breach.
void validate_case(const CaseModel& model);

SegmentCatalog aggregate_segments(const MicrogridSpec& mg);

/// Per-segment demand of the microgrid for the given per-load-point
/// demands (MW), counting only load points whose transformer is available.
std::vector<double> segment_demand(const MicrogridSpec& mg, const std::vector<double>& load_point_mw,
                                   const std::vector<bool>& transformer_up);

}  // namespace cpmmg
