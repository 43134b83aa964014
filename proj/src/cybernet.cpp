#include "cpmmg/cybernet.hpp"

#include <algorithm>

#include "cpmmg/error.hpp"

namespace cpmmg {

namespace {

constexpr std::size_t kMaxRoutes = 200000;

void collect_paths(const CyberGraph& g, ComponentIndex node, ComponentIndex dst, std::vector<ComponentIndex>& trail,
                   std::vector<ComponentIndex>& visited, std::vector<PathSet>& out) {
  if (node == dst) {
    PathSet set = trail;
    std::sort(set.begin(), set.end());
    out.push_back(std::move(set));
    if (out.size() > kMaxRoutes) throw ValidationError("cyber graph: too many routes to enumerate");
    return;
  }
  for (const auto& [link, next] : g.neighbours(node)) {
    if (std::find(visited.begin(), visited.end(), next) != visited.end()) continue;
    visited.push_back(next);
    trail.push_back(link);
    trail.push_back(next);
    collect_paths(g, next, dst, trail, visited, out);
    trail.pop_back();
    trail.pop_back();
    visited.pop_back();
  }
}

/// Devices an MGCC commands: micro and load controllers of its microgrid
/// and the breaker controllers of switches it may operate.
std::vector<ComponentIndex> commanded_devices(const CaseModel& model, std::size_t mg) {
  const auto& spec = model.microgrids[mg];
  std::vector<ComponentIndex> out;
  auto add_unit = [&](const DerUnit& u) { out.push_back(u.mc); };
  if (spec.wind) add_unit(spec.wind->unit);
  if (spec.pv) add_unit(spec.pv->unit);
  for (const auto& d : spec.diesels) add_unit(d.unit);
  if (spec.ess) add_unit(spec.ess->unit);
  for (const auto& lp : spec.load_points) out.push_back(lp.lc);
  for (const auto& sw : model.switches) {
    if (std::find(sw.controllers.begin(), sw.controllers.end(), spec.mgcc) != sw.controllers.end()) {
      out.push_back(sw.cbc);
    }
  }
  return out;
}

}  // namespace

CyberGraph::CyberGraph(const std::vector<CyberEdge>& edges) : edges_(edges) {
  for (const auto& e : edges_) {
    adjacency_[e.a].emplace_back(e.link, e.b);
    adjacency_[e.b].emplace_back(e.link, e.a);
  }
  for (auto& [node, list] : adjacency_) std::sort(list.begin(), list.end());
}

const std::vector<std::pair<ComponentIndex, ComponentIndex>>& CyberGraph::neighbours(ComponentIndex node) const {
  static const std::vector<std::pair<ComponentIndex, ComponentIndex>> kNone;
  auto it = adjacency_.find(node);
  return it == adjacency_.end() ? kNone : it->second;
}

std::vector<PathSet> enumerate_minimal_paths(const CyberGraph& graph, ComponentIndex src, ComponentIndex dst) {
  if (!graph.has_node(src)) throw ValidationError("cyber graph: unknown node " + std::to_string(src));
  if (!graph.has_node(dst)) throw ValidationError("cyber graph: unknown node " + std::to_string(dst));
  std::vector<PathSet> out;
  std::vector<ComponentIndex> trail{src};
  std::vector<ComponentIndex> visited{src};
  collect_paths(graph, src, dst, trail, visited, out);
  std::sort(out.begin(), out.end());
  return out;
}

CyberRoutes::CyberRoutes(const CaseModel& model) : graph_(model.cyber_edges) {
  const ComponentIndex dms = model.substation.dms;
  for (const auto& mg : model.microgrids) {
    ensure(mg.mgcc, dms);
    auto unit = [&](const DerUnit& u) { ensure(u.mc, mg.mgcc); };
    if (mg.wind) unit(mg.wind->unit);
    if (mg.pv) unit(mg.pv->unit);
    for (const auto& d : mg.diesels) unit(d.unit);
    if (mg.ess) unit(mg.ess->unit);
    for (const auto& lp : mg.load_points) ensure(lp.lc, mg.mgcc);
  }
  for (const auto& sw : model.switches) {
    for (ComponentIndex c : sw.controllers) ensure(sw.cbc, c);
  }
}

void CyberRoutes::ensure(ComponentIndex a, ComponentIndex b) {
  const auto key = std::minmax(a, b);
  if (cache_.contains(key)) return;
  std::vector<PathSet> paths;
  if (graph_.has_node(a) && graph_.has_node(b)) paths = enumerate_minimal_paths(graph_, key.first, key.second);
  cache_.emplace(key, std::move(paths));
}

const std::vector<PathSet>& CyberRoutes::paths(ComponentIndex a, ComponentIndex b) const {
  static const std::vector<PathSet> kNone;
  auto it = cache_.find(std::minmax(a, b));
  return it == cache_.end() ? kNone : it->second;
}

bool switch_accessible(const CaseModel& model, const CyberRoutes& routes, std::size_t switch_index,
                       const std::vector<char>& up) {
  if (switch_index >= model.switches.size()) {
    throw ValidationError("switch index " + std::to_string(switch_index) + " is not registered");
  }
  const auto& sw = model.switches[switch_index];
  if (!up[sw.cbc]) return false;
  for (ComponentIndex c : sw.controllers) {
    if (up[c] && link_available(routes.paths(sw.cbc, c), up)) return true;
  }
  return false;
}

AvailabilityFrame availability_frame(const CaseModel& model, const CyberRoutes& routes, const std::vector<char>& up_in,
                                     std::size_t hour) {
  const auto& ctl = model.control;
  std::vector<char> up = up_in;
  if (ctl.distributed_control) {
    bool all_mgcc = true;
    for (std::size_t m = 0; m < model.microgrids.size(); ++m) {
      const ComponentIndex mgcc = model.microgrids[m].mgcc;
      if (!up[mgcc]) {
        const auto devices = commanded_devices(model, m);
        up[mgcc] = std::all_of(devices.begin(), devices.end(), [&](ComponentIndex d) { return up_in[d] != 0; });
      }
      all_mgcc = all_mgcc && up[mgcc];
    }
    if (!up[model.substation.dms] && all_mgcc) up[model.substation.dms] = 1;
  }

  AvailabilityFrame f;
  f.hour = hour;
  const ComponentIndex dms = model.substation.dms;
  f.dms_up = up[dms] != 0;
  f.upstream_up = up[model.substation.upstream] &&
                  (model.substation.upstream_link == kNoComponent || up[model.substation.upstream_link]);

  f.microgrids.reserve(model.microgrids.size());
  for (const auto& mg : model.microgrids) {
    MicrogridAvailability a;
    a.mgcc_up = up[mg.mgcc] != 0;
    a.mgcc_dms_link = link_available(routes.paths(mg.mgcc, dms), up);
    const auto& incident = routes.graph().neighbours(mg.mgcc);
    a.mgcc_isolated = !incident.empty() && std::none_of(incident.begin(), incident.end(),
                                                        [&](const auto& e) { return up[e.first] != 0; });
    auto der = [&](const DerUnit& u) {
      return up[u.physical] && up[u.mc] && link_available(routes.paths(u.mc, mg.mgcc), up);
    };
    a.wind = mg.wind ? der(mg.wind->unit) : false;
    a.pv = mg.pv ? der(mg.pv->unit) : false;
    for (const auto& d : mg.diesels) a.diesel.push_back(der(d.unit));
    a.ess = mg.ess ? der(mg.ess->unit) : false;
    for (const auto& lp : mg.load_points) {
      a.tr.push_back(up[lp.transformer] != 0);
      a.lc.push_back(ctl.ablate_indirect || (up[lp.lc] && link_available(routes.paths(lp.lc, mg.mgcc), up)));
    }
    f.microgrids.push_back(std::move(a));
  }

  f.switches.reserve(model.switches.size());
  for (std::size_t k = 0; k < model.switches.size(); ++k) {
    const auto& sw = model.switches[k];
    SwitchAvailability s;
    if (ctl.no_internal_protection && sw.role == SwitchRole::internal) {
      s.device_up = true;
      s.accessible = false;
    } else {
      s.device_up = sw.device == kNoComponent || up[sw.device];
      s.accessible = ctl.ablate_indirect || switch_accessible(model, routes, k, up);
    }
    f.switches.push_back(s);
  }

  f.section_faulted.reserve(model.sections.size());
  for (const auto& sec : model.sections) {
    f.section_faulted.push_back(
        std::any_of(sec.elements.begin(), sec.elements.end(), [&](ComponentIndex e) { return !up[e]; }));
  }
  return f;
}

}  // namespace cpmmg
