#include "cpmmg/zoning.hpp"

#include <algorithm>
#include <deque>
#include <map>

namespace cpmmg {

namespace {

struct SectionGraph {
  // node S is the substation bus
  std::size_t sections = 0;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj;  // (switch, neighbour)

  std::size_t node(SectionIndex s) const { return s == kSubstationNode ? sections : s; }
};

SectionGraph build_graph(const CaseModel& model) {
  SectionGraph g;
  g.sections = model.sections.size();
  g.adj.resize(g.sections + 1);
  for (std::size_t k = 0; k < model.switches.size(); ++k) {
    const auto& sw = model.switches[k];
    if (sw.role == SwitchRole::backup) continue;  // normally open
    const std::size_t a = g.node(sw.a);
    const std::size_t b = g.node(sw.b);
    g.adj[a].emplace_back(k, b);
    g.adj[b].emplace_back(k, a);
  }
  return g;
}

std::vector<std::vector<std::size_t>> components(const SectionGraph& g, const std::vector<bool>& alive,
                                                 const std::vector<bool>& closed) {
  std::vector<int> seen(g.adj.size(), 0);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < g.adj.size(); ++start) {
    if (!alive[start] || seen[start]) continue;
    std::vector<std::size_t> comp;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const std::size_t n = queue.front();
      queue.pop_front();
      comp.push_back(n);
      for (const auto& [sw, next] : g.adj[n]) {
        if (!closed[sw] || !alive[next] || seen[next]) continue;
        seen[next] = 1;
        queue.push_back(next);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(std::move(comp));
  }
  return out;
}

Zone make_zone(const CaseModel& model, const std::vector<std::size_t>& nodes, const std::vector<bool>& closed) {
  Zone z;
  const std::size_t S = model.sections.size();
  std::map<std::size_t, std::vector<SectionIndex>> by_mg;
  for (std::size_t n : nodes) {
    if (n == S) {
      z.has_substation = true;
      continue;
    }
    z.sections.push_back(static_cast<SectionIndex>(n));
    by_mg[model.sections[n].microgrid].push_back(static_cast<SectionIndex>(n));
  }
  for (auto& [mg, secs] : by_mg) z.parts.push_back({mg, std::move(secs)});
  auto part_of = [&](SectionIndex s) -> std::size_t {
    const std::size_t mg = model.sections[s].microgrid;
    for (std::size_t p = 0; p < z.parts.size(); ++p) {
      if (z.parts[p].microgrid == mg) return p;
    }
    return z.parts.size();
  };
  auto in_zone = [&](SectionIndex s) { return std::binary_search(z.sections.begin(), z.sections.end(), s); };
  for (std::size_t l = 0; l < model.lines.size(); ++l) {
    const auto& sw = model.switches[model.lines[l].poi_switch];
    if (!closed[model.lines[l].poi_switch] || !in_zone(sw.a) || !in_zone(sw.b)) continue;
    z.links.push_back({l, part_of(sw.a), part_of(sw.b)});
  }
  if (model.backup.present) {
    z.has_backup_anchor = in_zone(model.switches[model.backup.tie_switch].a);
  }
  if (z.has_substation) {
    const std::size_t p = part_of(model.substation.root_section);
    if (p < z.parts.size()) z.root_part = p;
  }
  return z;
}

bool backup_usable(const CaseModel& model, const AvailabilityFrame& frame) {
  if (!model.backup.present || !model.backup.enabled) return false;
  const auto& s = frame.switches[model.backup.tie_switch];
  return s.device_up && s.accessible;
}

void feed_from_backup(const CaseModel& model, Zone& z) {
  z.mode = OperationMode::no;
  z.supply = SupplyKind::backup;
  z.supply_capacity = model.backup.capacity;
  const SectionIndex anchor = model.switches[model.backup.tie_switch].a;
  const std::size_t mg = model.sections[anchor].microgrid;
  for (std::size_t p = 0; p < z.parts.size(); ++p) {
    if (z.parts[p].microgrid == mg) z.root_part = p;
  }
}

}  // namespace

std::string_view to_string(OperationMode mode) {
  switch (mode) {
    case OperationMode::no: return "NO";
    case OperationMode::jo: return "JO";
    case OperationMode::io: return "IO";
    case OperationMode::sd: return "SD";
  }
  return "?";
}

std::size_t ZoneFamily::zone_of(SectionIndex section) const {
  for (std::size_t z = 0; z < zones.size(); ++z) {
    if (std::binary_search(zones[z].sections.begin(), zones[z].sections.end(), section)) return z;
  }
  return zones.size();
}

ZoneFamily partition_zones(const CaseModel& model, const AvailabilityFrame& frame) {
  const SectionGraph g = build_graph(model);
  const std::size_t S = model.sections.size();
  const std::size_t N = S + 1;

  // isolation regions grow across breakers that are healthy but cannot open
  std::vector<bool> dead(N, false);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < S; ++s) {
    const bool shutdown = frame.microgrids[model.sections[s].microgrid].shutdown();
    if (frame.section_faulted[s] || shutdown) {
      dead[s] = true;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const std::size_t n = queue.front();
    queue.pop_front();
    for (const auto& [sw, next] : g.adj[n]) {
      const auto& st = frame.switches[sw];
      if (dead[next] || !st.device_up || st.accessible) continue;
      dead[next] = true;
      queue.push_back(next);
    }
  }

  std::vector<bool> closed(model.switches.size(), false);
  for (std::size_t k = 0; k < model.switches.size(); ++k) {
    closed[k] = model.switches[k].role != SwitchRole::backup && frame.switches[k].device_up;
  }
  // microgrids that lost their DMS link open their accessible ties
  if (frame.dms_up) {
    for (std::size_t k = 0; k < model.switches.size(); ++k) {
      const auto& sw = model.switches[k];
      if (!closed[k] || !frame.switches[k].accessible) continue;
      if (sw.role != SwitchRole::poi && sw.role != SwitchRole::substation) continue;
      for (SectionIndex end : {sw.a, sw.b}) {
        if (end == kSubstationNode || end == kBackupNode) continue;
        if (!frame.microgrids[model.sections[end].microgrid].mgcc_dms_link) closed[k] = false;
      }
    }
  }

  ZoneFamily family;
  family.grid_available = frame.upstream_up && frame.dms_up && !dead[S];

  std::vector<bool> alive(N), dead_only(N);
  for (std::size_t n = 0; n < N; ++n) {
    alive[n] = !dead[n];
    dead_only[n] = dead[n] && n < S;
  }
  for (const auto& comp : components(g, alive, closed)) {
    if (comp.size() == 1 && comp[0] == S) continue;  // bare substation bus
    family.zones.push_back(make_zone(model, comp, closed));
  }
  // dead regions, joined across the breakers that could not open
  std::vector<bool> stuck(model.switches.size(), false);
  for (std::size_t k = 0; k < model.switches.size(); ++k) {
    stuck[k] = frame.switches[k].device_up && !frame.switches[k].accessible && model.switches[k].role != SwitchRole::backup;
  }
  for (const auto& comp : components(g, dead_only, stuck)) {
    Zone z = make_zone(model, comp, std::vector<bool>(model.switches.size(), false));
    z.dead = true;
    z.mode = OperationMode::sd;
    family.zones.push_back(std::move(z));
  }
  std::sort(family.zones.begin(), family.zones.end(),
            [](const Zone& a, const Zone& b) { return a.sections.front() < b.sections.front(); });
  return family;
}

void classify_modes(const CaseModel& model, const AvailabilityFrame& frame, ZoneFamily& family) {
  std::vector<Zone> out;
  for (auto& z : family.zones) {
    if (z.dead) {
      out.push_back(std::move(z));
      continue;
    }
    if (!frame.dms_up) {
      // no coordinator: every part runs alone
      const SectionIndex anchor = model.backup.present ? model.switches[model.backup.tie_switch].a : kBackupNode;
      for (const auto& part : z.parts) {
        Zone single;
        single.parts = {part};
        single.sections = part.sections;
        single.mode = OperationMode::io;
        single.has_backup_anchor = std::binary_search(part.sections.begin(), part.sections.end(), anchor);
        single.has_substation = z.has_substation && model.sections[model.substation.root_section].microgrid == part.microgrid &&
                                std::binary_search(part.sections.begin(), part.sections.end(), model.substation.root_section);
        out.push_back(std::move(single));
      }
      continue;
    }
    if (z.has_substation && family.grid_available) {
      z.mode = OperationMode::no;
      z.supply = SupplyKind::substation;
      z.supply_capacity = model.substation.capacity;
    } else {
      z.mode = z.parts.size() >= 2 ? OperationMode::jo : OperationMode::io;
      z.supply = SupplyKind::none;
      z.supply_capacity = 0.0;
    }
    out.push_back(std::move(z));
  }
  std::sort(out.begin(), out.end(), [](const Zone& a, const Zone& b) { return a.sections.front() < b.sections.front(); });
  family.zones = std::move(out);
}

void backup_tie_state(const CaseModel& model, const AvailabilityFrame& frame, ZoneFamily& family) {
  if (!backup_usable(model, frame)) return;
  for (auto& z : family.zones) {
    if (z.dead || !z.has_backup_anchor || z.mode == OperationMode::no) continue;
    feed_from_backup(model, z);
  }
}

ZoneFamily operation_zones(const CaseModel& model, const AvailabilityFrame& frame) {
  ZoneFamily f = partition_zones(model, frame);
  classify_modes(model, frame, f);
  backup_tie_state(model, frame, f);
  return f;
}

bool is_partition(const CaseModel& model, const ZoneFamily& family) {
  std::vector<int> count(model.sections.size(), 0);
  for (const auto& z : family.zones) {
    std::size_t in_parts = 0;
    for (const auto& p : z.parts) {
      for (SectionIndex s : p.sections) {
        if (s >= model.sections.size() || model.sections[s].microgrid != p.microgrid) return false;
        if (!std::binary_search(z.sections.begin(), z.sections.end(), s)) return false;
      }
      in_parts += p.sections.size();
    }
    if (in_parts != z.sections.size()) return false;
    for (SectionIndex s : z.sections) {
      if (s >= model.sections.size()) return false;
      ++count[s];
    }
    if (!z.dead) {
      const std::size_t mgs = z.parts.size();
      if (z.mode == OperationMode::jo && mgs < 2) return false;
      if (z.mode == OperationMode::io && mgs != 1) return false;
      if (z.mode == OperationMode::no && z.supply == SupplyKind::substation && !z.has_substation) return false;
    }
  }
  return std::all_of(count.begin(), count.end(), [](int c) { return c == 1; });
}

}  // namespace cpmmg
