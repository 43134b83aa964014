#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "cpmmg/casemodel.hpp"
#include "cpmmg/cybernet.hpp"

namespace cpmmg {

/// NO = normal (grid or backup fed), JO = joint islanded group,
/// IO = single islanded microgrid, SD = shut down.
enum class OperationMode : std::uint8_t { no, jo, io, sd };

std::string_view to_string(OperationMode mode);

enum class SupplyKind : std::uint8_t { none, substation, backup };

/// The sections of one microgrid that lie inside one zone; this is the
/// unit that is dispatched.
struct MgPart {
  std::size_t microgrid = 0;
  std::vector<SectionIndex> sections;  // ascending

  bool operator==(const MgPart&) const = default;
};

/// A closed tie line joining two parts of the same zone.
struct ZoneLink {
  std::size_t line = 0;  // index into CaseModel::lines
  std::size_t part_a = 0;
  std::size_t part_b = 0;

  bool operator==(const ZoneLink&) const = default;
};

struct Zone {
  std::vector<SectionIndex> sections;  // ascending
  std::vector<MgPart> parts;           // ascending microgrid
  std::vector<ZoneLink> links;
  OperationMode mode = OperationMode::sd;
  SupplyKind supply = SupplyKind::none;
  double supply_capacity = 0.0;
  std::size_t root_part = 0;
  bool has_substation = false;     // electrically joined to the substation bus
  bool has_backup_anchor = false;  // holds the section the backup tie attaches to
  bool dead = false;               // fault or shutdown isolation region

  bool operator==(const Zone&) const = default;
};

struct ZoneFamily {
  std::vector<Zone> zones;
  bool grid_available = false;  // upstream, its link and the DMS up, substation bus not faulted

  /// Index of the zone holding a section.
  std::size_t zone_of(SectionIndex section) const;
  bool operator==(const ZoneFamily&) const = default;
};

/// Isolates faulted sections and shut-down microgrids behind the nearest
/// switches that can open, applies the islanding opens of microgrids that
/// lost their DMS link, and returns the resulting connected zones. Modes
/// are left unset except for the dead regions (SD).
ZoneFamily partition_zones(const CaseModel& model, const AvailabilityFrame& frame);

/// Assigns NO/JO/IO to the live zones. With the DMS down every part
/// becomes its own IO zone.
void classify_modes(const CaseModel& model, const AvailabilityFrame& frame, ZoneFamily& family);

/// Reconnects a separated zone holding the backup anchor through the
/// normally open tie when it is enabled, healthy and accessible.
void backup_tie_state(const CaseModel& model, const AvailabilityFrame& frame, ZoneFamily& family);

/// partition_zones + classify_modes + backup_tie_state.
ZoneFamily operation_zones(const CaseModel& model, const AvailabilityFrame& frame);

/// Every section appears in exactly one zone and every part holds only
/// sections of its microgrid.
bool is_partition(const CaseModel& model, const ZoneFamily& family);

}  // namespace cpmmg
