#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "cpmmg/casemodel.hpp"

namespace cpmmg {

/// Element set of one route: node and link component indices, ascending.
using PathSet = std::vector<ComponentIndex>;

/// Undirected communication graph; nodes and links share the component
/// index space of the case.
class CyberGraph {
 public:
  CyberGraph() = default;
  explicit CyberGraph(const std::vector<CyberEdge>& edges);

  bool has_node(ComponentIndex node) const { return adjacency_.contains(node); }
  /// (link, neighbour) pairs, sorted.
  const std::vector<std::pair<ComponentIndex, ComponentIndex>>& neighbours(ComponentIndex node) const;
  const std::vector<CyberEdge>& edges() const { return edges_; }

 private:
  std::vector<CyberEdge> edges_;
  std::map<ComponentIndex, std::vector<std::pair<ComponentIndex, ComponentIndex>>> adjacency_;
};

/// All simple routes between src and dst as element sets. Every simple
/// path's set is minimal. Sets are sorted internally and the list is in
/// lexicographic order. Throws ValidationError for unknown nodes.
std::vector<PathSet> enumerate_minimal_paths(const CyberGraph& graph, ComponentIndex src, ComponentIndex dst);

/// Structure function in minimal sum-of-products form. `up` is indexed by
/// component.
template <typename UpVector>
bool link_available(const std::vector<PathSet>& paths, const UpVector& up) {
  for (const auto& path : paths) {
    bool all = true;
    for (ComponentIndex c : path) {
      if (!up[c]) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

/// Per microgrid availabilities after the cyber consequences are applied.
struct MicrogridAvailability {
  bool mgcc_up = true;
  bool mgcc_dms_link = true;
  bool mgcc_isolated = false;  // every cyber link at the MGCC is down
  bool wind = true;
  bool pv = true;
  std::vector<bool> diesel;
  bool ess = true;
  std::vector<bool> lc;  // load point controllable
  std::vector<bool> tr;  // transformer in service

  bool shutdown() const { return !mgcc_up || mgcc_isolated; }
  bool operator==(const MicrogridAvailability&) const = default;
};

struct SwitchAvailability {
  bool device_up = true;   // a failed breaker is an open circuit
  bool accessible = true;  // can be commanded to open or close
  bool operator==(const SwitchAvailability&) const = default;
};

struct AvailabilityFrame {
  std::size_t hour = 0;
  bool dms_up = true;
  bool upstream_up = true;  // upstream supply and its link to the DMS
  std::vector<MicrogridAvailability> microgrids;
  std::vector<SwitchAvailability> switches;
  std::vector<bool> section_faulted;

  bool operator==(const AvailabilityFrame&) const = default;
};

/// Precomputed route sets for every controller pair the case needs.
class CyberRoutes {
 public:
  CyberRoutes() = default;
  explicit CyberRoutes(const CaseModel& model);

  const CyberGraph& graph() const { return graph_; }
  /// Routes between two nodes; empty when either endpoint is not in the graph.
  const std::vector<PathSet>& paths(ComponentIndex a, ComponentIndex b) const;

 private:
  void ensure(ComponentIndex a, ComponentIndex b);

  CyberGraph graph_;
  std::map<std::pair<ComponentIndex, ComponentIndex>, std::vector<PathSet>> cache_;
};

/// CBC up and at least one controller up with a live route to the CBC.
bool switch_accessible(const CaseModel& model, const CyberRoutes& routes, std::size_t switch_index,
                       const std::vector<char>& up);

/// Applies the cyber-failure consequence table to one component state
/// vector (1 = up). Honours model.control (distributed control, indirect
/// impact ablation) and no-internal-protection handling of internal switches.
AvailabilityFrame availability_frame(const CaseModel& model, const CyberRoutes& routes, const std::vector<char>& up,
                                     std::size_t hour = 0);

}  // namespace cpmmg
