#include "cpmmg/casemodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cpmmg/error.hpp"

namespace cpmmg {

using json = nlohmann::json;

namespace {

struct KindName {
  ComponentKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {ComponentKind::line, "line"},
    {ComponentKind::transformer, "transformer"},
    {ComponentKind::busbar, "busbar"},
    {ComponentKind::power_switch, "switch"},
    {ComponentKind::physical_der, "physical-der"},
    {ComponentKind::physical_ess, "physical-ess"},
    {ComponentKind::dms, "dms"},
    {ComponentKind::mgcc, "mgcc"},
    {ComponentKind::mc, "mc"},
    {ComponentKind::lc, "lc"},
    {ComponentKind::cbc, "cbc"},
    {ComponentKind::cyber_link, "cyber-link"},
    {ComponentKind::upstream, "upstream"},
};

constexpr std::initializer_list<ComponentKind> kCyberNodes = {ComponentKind::dms, ComponentKind::mgcc, ComponentKind::mc,
                                                            ComponentKind::lc, ComponentKind::cbc};

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

std::string at(const std::string& path, std::string_view key) { return path + "." + std::string(key); }
std::string at(const std::string& path, std::size_t index) { return path + "[" + std::to_string(index) + "]"; }

const json& field(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(at(path, key), "missing field");
  return *it;
}

const json* optional_field(const json& obj, std::string_view key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& value, const std::string& path) {
  if (!value.is_number()) fail(path, "expected a number");
  const double x = value.get<double>();
  if (!std::isfinite(x)) fail(path, "expected a finite number");
  return x;
}

double number(const json& obj, std::string_view key, const std::string& path) {
  return number(field(obj, key, path), at(path, key));
}

double number_or(const json& obj, std::string_view key, double fallback, const std::string& path) {
  const json* v = optional_field(obj, key);
  return v ? number(*v, at(path, key)) : fallback;
}

std::string text(const json& obj, std::string_view key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_string()) fail(at(path, key), "expected a string");
  return v.get<std::string>();
}

const json& array(const json& obj, std::string_view key, const std::string& path) {
  const json& v = field(obj, key, path);
  if (!v.is_array()) fail(at(path, key), "expected an array");
  return v;
}

class CaseReader {
 public:
  CaseReader(const json& root, std::filesystem::path base_dir) : root_(root), base_dir_(std::move(base_dir)) {}

  CaseModel read() {
    if (!root_.is_object()) fail("case", "top level must be an object");
    model_.name = root_.contains("name") ? text(root_, "name", "case") : std::string("case");
    read_components();
    read_sections();
    read_microgrids();
    read_switches();
    read_lines();
    read_substation();
    read_backup();
    read_cyber_edges();
    read_defaults();
    read_series();
    for (auto& mg : model_.microgrids) mg.catalog = aggregate_segments(mg);
    validate_case(model_);
    return std::move(model_);
  }

 private:
  ComponentIndex ref(const json& obj, std::string_view key, const std::string& path,
                     std::initializer_list<ComponentKind> kinds) {
    const std::string id = text(obj, key, path);
    return resolve(id, at(path, key), kinds);
  }

  ComponentIndex resolve(const std::string& id, const std::string& path, std::initializer_list<ComponentKind> kinds) {
    auto it = model_.component_index.find(id);
    if (it == model_.component_index.end()) fail(path, "unknown component '" + id + "'");
    const ComponentKind kind = model_.components[it->second].kind;
    if (kinds.size() > 0 && std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
      fail(path, "component '" + id + "' has kind '" + std::string(to_string(kind)) + "'");
    }
    return it->second;
  }

  SectionIndex section_ref(const json& obj, std::string_view key, const std::string& path) {
    const std::string id = text(obj, key, path);
    return section_by_id(id, at(path, key));
  }

  SectionIndex section_by_id(const std::string& id, const std::string& path) {
    auto it = section_index_.find(id);
    if (it == section_index_.end()) fail(path, "unknown section '" + id + "'");
    return it->second;
  }

  std::size_t microgrid_by_tag(int tag, const std::string& path) {
    auto it = mg_index_.find(tag);
    if (it == mg_index_.end()) fail(path, "unknown microgrid " + std::to_string(tag));
    return it->second;
  }

  void read_components() {
    const json& list = array(root_, "components", "case");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = at("components", i);
      ComponentSpec spec;
      spec.id = text(list[i], "id", path);
      const std::string kind = text(list[i], "kind", path);
      auto parsed = parse_component_kind(kind);
      if (!parsed) fail(at(path, "kind"), "unknown kind '" + kind + "'");
      spec.kind = *parsed;
      spec.failure_rate = number_or(list[i], "failure_rate", 0.0, path);
      spec.repair_rate = number_or(list[i], "repair_rate", 0.0, path);
      model_.components.push_back(std::move(spec));
    }
    std::stable_sort(model_.components.begin(), model_.components.end(),
                     [](const ComponentSpec& a, const ComponentSpec& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < model_.components.size(); ++i) {
      auto [it, inserted] = model_.component_index.emplace(model_.components[i].id, static_cast<ComponentIndex>(i));
      if (!inserted) fail("components", "duplicate id '" + model_.components[i].id + "'");
    }
  }

  void read_sections() {
    // microgrid tags are needed first
    const json& mgs = array(root_, "microgrids", "case");
    for (std::size_t i = 0; i < mgs.size(); ++i) {
      const std::string path = at("microgrids", i);
      const int tag = static_cast<int>(number(mgs[i], "tag", path));
      if (!mg_index_.emplace(tag, i).second) fail(at(path, "tag"), "duplicate microgrid tag " + std::to_string(tag));
    }
    const json& list = array(root_, "sections", "case");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = at("sections", i);
      SectionSpec s;
      s.id = text(list[i], "id", path);
      s.microgrid = microgrid_by_tag(static_cast<int>(number(list[i], "microgrid", path)), at(path, "microgrid"));
      if (const json* el = optional_field(list[i], "elements")) {
        if (!el->is_array()) fail(at(path, "elements"), "expected an array");
        for (std::size_t k = 0; k < el->size(); ++k) {
          if (!(*el)[k].is_string()) fail(at(at(path, "elements"), k), "expected a string");
          s.elements.push_back(resolve((*el)[k].get<std::string>(), at(at(path, "elements"), k),
                                       {ComponentKind::line, ComponentKind::busbar}));
        }
      }
      if (!section_index_.emplace(s.id, static_cast<SectionIndex>(i)).second) {
        fail(at(path, "id"), "duplicate section '" + s.id + "'");
      }
      model_.sections.push_back(std::move(s));
    }
  }

  DerUnit der_unit(const json& obj, const std::string& path, ComponentKind physical_kind) {
    DerUnit u;
    u.physical = ref(obj, "physical", path, {physical_kind});
    u.mc = ref(obj, "mc", path, {ComponentKind::mc});
    u.section = section_ref(obj, "section", path);
    return u;
  }

  std::vector<LoadSegment> segments(const json& list, const std::string& path) {
    if (!list.is_array() || list.empty()) fail(path, "expected a non-empty array of [share, cost]");
    std::vector<LoadSegment> out;
    for (std::size_t k = 0; k < list.size(); ++k) {
      const json& pair = list[k];
      if (!pair.is_array() || pair.size() != 2) fail(at(path, k), "expected [share, cost]");
      out.push_back({number(pair[0], at(at(path, k), 0)), number(pair[1], at(at(path, k), 1))});
    }
    return out;
  }

  void read_microgrids() {
    std::map<std::string, std::vector<LoadSegment>, std::less<>> sectors;
    if (const json* s = optional_field(root_, "sectors")) {
      if (!s->is_object()) fail("sectors", "expected an object");
      for (auto it = s->begin(); it != s->end(); ++it) {
        sectors[it.key()] = segments(it.value(), at("sectors", it.key()));
      }
    }
    const json& mgs = array(root_, "microgrids", "case");
    for (std::size_t i = 0; i < mgs.size(); ++i) {
      const std::string path = at("microgrids", i);
      const json& m = mgs[i];
      MicrogridSpec mg;
      mg.tag = static_cast<int>(number(m, "tag", path));
      mg.mgcc = ref(m, "mgcc", path, {ComponentKind::mgcc});
      for (std::string_view key : {"wind", "pv"}) {
        if (const json* r = optional_field(m, key)) {
          RenewableSpec spec;
          spec.capacity = number(*r, "capacity", at(path, key));
          spec.unit = der_unit(*r, at(path, key), ComponentKind::physical_der);
          (key == "wind" ? mg.wind : mg.pv) = spec;
        }
      }
      if (const json* d = optional_field(m, "diesels")) {
        if (!d->is_array()) fail(at(path, "diesels"), "expected an array");
        for (std::size_t k = 0; k < d->size(); ++k) {
          const std::string dp = at(at(path, "diesels"), k);
          DieselSpec de;
          de.id = text((*d)[k], "id", dp);
          de.max_output = number((*d)[k], "max_output", dp);
          de.fuel_cost = number_or((*d)[k], "fuel_cost", 0.0, dp);
          de.emission_cost = number_or((*d)[k], "emission_cost", 0.0, dp);
          de.unit = der_unit((*d)[k], dp, ComponentKind::physical_der);
          mg.diesels.push_back(std::move(de));
        }
      }
      if (const json* e = optional_field(m, "ess")) {
        const std::string ep = at(path, "ess");
        EssSpec ess;
        ess.max_charge = number(*e, "max_charge", ep);
        ess.max_discharge = number(*e, "max_discharge", ep);
        ess.charge_eff = number_or(*e, "charge_eff", 1.0, ep);
        ess.discharge_eff = number_or(*e, "discharge_eff", 1.0, ep);
        ess.soc_min = number(*e, "soc_min", ep);
        ess.soc_max = number(*e, "soc_max", ep);
        ess.charge_cost = number_or(*e, "charge_cost", 0.0, ep);
        ess.discharge_cost = number_or(*e, "discharge_cost", 0.0, ep);
        ess.unit = der_unit(*e, ep, ComponentKind::physical_ess);
        mg.ess = ess;
      }
      const json& lps = array(m, "load_points", path);
      for (std::size_t k = 0; k < lps.size(); ++k) {
        const std::string lp_path = at(at(path, "load_points"), k);
        const json& l = lps[k];
        LoadPointSpec lp;
        lp.id = text(l, "id", lp_path);
        lp.bus = static_cast<int>(number_or(l, "bus", 0.0, lp_path));
        lp.peak_load = number(l, "peak_load", lp_path);
        if (const json* seg = optional_field(l, "segments")) {
          lp.segments = segments(*seg, at(lp_path, "segments"));
        } else {
          const std::string sector = text(l, "sector", lp_path);
          auto it = sectors.find(sector);
          if (it == sectors.end()) fail(at(lp_path, "sector"), "unknown sector '" + sector + "'");
          lp.segments = it->second;
        }
        lp.transformer = ref(l, "transformer", lp_path, {ComponentKind::transformer});
        lp.lc = ref(l, "lc", lp_path, {ComponentKind::lc});
        lp.section = section_ref(l, "section", lp_path);
        mg.load_points.push_back(std::move(lp));
      }
      model_.microgrids.push_back(std::move(mg));
    }
  }

  void read_switches() {
    const json& list = array(root_, "switches", "case");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = at("switches", i);
      const json& s = list[i];
      SwitchSpec sw;
      sw.id = text(s, "id", path);
      const std::string role = text(s, "role", path);
      if (role == "internal") sw.role = SwitchRole::internal;
      else if (role == "poi") sw.role = SwitchRole::poi;
      else if (role == "substation") sw.role = SwitchRole::substation;
      else if (role == "backup") sw.role = SwitchRole::backup;
      else fail(at(path, "role"), "unknown role '" + role + "'");
      if (optional_field(s, "device")) sw.device = ref(s, "device", path, {ComponentKind::power_switch});
      sw.cbc = ref(s, "cbc", path, {ComponentKind::cbc});
      const json& ctrl = array(s, "controllers", path);
      for (std::size_t k = 0; k < ctrl.size(); ++k) {
        if (!ctrl[k].is_string()) fail(at(at(path, "controllers"), k), "expected a string");
        sw.controllers.push_back(resolve(ctrl[k].get<std::string>(), at(at(path, "controllers"), k),
                                         {ComponentKind::dms, ComponentKind::mgcc}));
      }
      const json& between = array(s, "between", path);
      if (between.size() != 2 || !between[0].is_string() || !between[1].is_string()) {
        fail(at(path, "between"), "expected two section ids");
      }
      auto endpoint = [&](const json& v, std::size_t k) -> SectionIndex {
        const std::string id = v.get<std::string>();
        if (id == "substation") return kSubstationNode;
        if (id == "backup") return kBackupNode;
        return section_by_id(id, at(at(path, "between"), k));
      };
      sw.a = endpoint(between[0], 0);
      sw.b = endpoint(between[1], 1);
      if (sw.a == kSubstationNode || sw.a == kBackupNode) std::swap(sw.a, sw.b);
      if (!switch_index_.emplace(sw.id, i).second) fail(at(path, "id"), "duplicate switch '" + sw.id + "'");
      model_.switches.push_back(std::move(sw));
    }
  }

  std::size_t switch_by_id(const json& obj, std::string_view key, const std::string& path) {
    const std::string id = text(obj, key, path);
    auto it = switch_index_.find(id);
    if (it == switch_index_.end()) fail(at(path, key), "unknown switch '" + id + "'");
    return it->second;
  }

  void read_lines() {
    const json& list = array(root_, "lines", "case");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = at("lines", i);
      MmgLine line;
      line.from = microgrid_by_tag(static_cast<int>(number(list[i], "from", path)), at(path, "from"));
      line.to = microgrid_by_tag(static_cast<int>(number(list[i], "to", path)), at(path, "to"));
      line.capacity = number(list[i], "capacity", path);
      line.poi_switch = switch_by_id(list[i], "poi_switch", path);
      model_.lines.push_back(line);
    }
  }

  void read_substation() {
    const json& s = field(root_, "substation", "case");
    Substation sub;
    sub.capacity = number(s, "capacity", "substation");
    sub.upstream = ref(s, "upstream", "substation", {ComponentKind::upstream});
    if (optional_field(s, "upstream_link")) {
      sub.upstream_link = ref(s, "upstream_link", "substation", {ComponentKind::cyber_link});
    }
    sub.dms = ref(s, "dms", "substation", {ComponentKind::dms});
    sub.feeder_switch = switch_by_id(s, "switch", "substation");
    const SwitchSpec& sw = model_.switches[sub.feeder_switch];
    if (sw.role != SwitchRole::substation || sw.b != kSubstationNode) {
      fail("substation.switch", "switch '" + sw.id + "' must have role substation and connect to 'substation'");
    }
    sub.root_section = sw.a;
    model_.substation = sub;
  }

  void read_backup() {
    const json* b = optional_field(root_, "backup");
    if (!b) return;
    BackupTie tie;
    tie.present = true;
    tie.enabled = field(*b, "enabled", "backup").get<bool>();
    tie.tie_switch = switch_by_id(*b, "switch", "backup");
    tie.capacity = number(*b, "capacity", "backup");
    const SwitchSpec& sw = model_.switches[tie.tie_switch];
    if (sw.role != SwitchRole::backup || sw.b != kBackupNode) {
      fail("backup.switch", "switch '" + sw.id + "' must have role backup and connect to 'backup'");
    }
    model_.backup = tie;
  }

  void read_cyber_edges() {
    const json& list = array(root_, "cyber_edges", "case");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = at("cyber_edges", i);
      CyberEdge e;
      e.link = ref(list[i], "id", path, {ComponentKind::cyber_link});
      e.a = ref(list[i], "a", path, kCyberNodes);
      e.b = ref(list[i], "b", path, kCyberNodes);
      model_.cyber_edges.push_back(e);
    }
  }

  void read_defaults() {
    const json* d = optional_field(root_, "defaults");
    if (!d) return;
    auto& out = model_.defaults;
    out.delta_t = number_or(*d, "delta_t", out.delta_t, "defaults");
    out.soc_start_fraction = number_or(*d, "soc_start_fraction", out.soc_start_fraction, "defaults");
    out.lambda_ser = number_or(*d, "lambda_ser", out.lambda_ser, "defaults");
    if (const json* v = optional_field(*d, "lambda_ess")) out.lambda_ess = number(*v, "defaults.lambda_ess");
    out.lambda_thr = number_or(*d, "lambda_thr", out.lambda_thr, "defaults");
  }

  void read_series() {
    const json* s = optional_field(root_, "series");
    if (!s) return;
    auto& out = model_.series;
    const std::string source = s->contains("source") ? text(*s, "source", "series") : std::string("synthetic");
    if (source == "csv") {
      out.source = SeriesSpec::Source::csv;
      out.csv_path = text(*s, "path", "series");
      std::filesystem::path p(out.csv_path);
      out.resolved_csv = p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
    } else if (source != "synthetic") {
      fail("series.source", "expected 'synthetic' or 'csv'");
    }
    const double years = number_or(*s, "years", 1.0, "series");
    if (years < 1.0 || years != std::floor(years)) fail("series.years", "expected a positive integer");
    out.years = static_cast<std::size_t>(years);
    out.seed = static_cast<std::uint64_t>(number_or(*s, "seed", static_cast<double>(out.seed), "series"));
    if (const json* c = optional_field(*s, "clamp")) out.clamp = c->get<bool>();
    if (const json* p = optional_field(*s, "synthetic")) {
      auto& syn = out.synthetic;
      const std::string sp = "series.synthetic";
      syn.wind_mean = number_or(*p, "wind_mean", syn.wind_mean, sp);
      syn.wind_seasonal = number_or(*p, "wind_seasonal", syn.wind_seasonal, sp);
      syn.wind_diurnal = number_or(*p, "wind_diurnal", syn.wind_diurnal, sp);
      syn.wind_noise = number_or(*p, "wind_noise", syn.wind_noise, sp);
      syn.pv_peak = number_or(*p, "pv_peak", syn.pv_peak, sp);
      syn.pv_seasonal = number_or(*p, "pv_seasonal", syn.pv_seasonal, sp);
      syn.pv_noise = number_or(*p, "pv_noise", syn.pv_noise, sp);
      syn.price_mean = number_or(*p, "price_mean", syn.price_mean, sp);
      syn.price_daily = number_or(*p, "price_daily", syn.price_daily, sp);
      syn.price_noise = number_or(*p, "price_noise", syn.price_noise, sp);
    }
  }

  const json& root_;
  std::filesystem::path base_dir_;
  CaseModel model_;
  std::map<std::string, SectionIndex, std::less<>> section_index_;
  std::map<std::string, std::size_t, std::less<>> switch_index_;
  std::map<int, std::size_t> mg_index_;
};

void require_kind(const CaseModel& m, ComponentIndex c, std::initializer_list<ComponentKind> kinds,
                  const std::string& where) {
  if (c >= m.components.size()) fail(where, "dangling component reference");
  if (std::find(kinds.begin(), kinds.end(), m.components[c].kind) == kinds.end()) {
    fail(where, "component '" + m.components[c].id + "' has the wrong kind");
  }
}

void require_section(const CaseModel& m, SectionIndex s, std::size_t mg, const std::string& where) {
  if (s >= m.sections.size()) fail(where, "dangling section reference");
  if (m.sections[s].microgrid != mg) fail(where, "section '" + m.sections[s].id + "' belongs to another microgrid");
}

/// Union-find over sections plus the two pseudo nodes.
class Dsu {
 public:
  explicit Dsu(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

json der_json(const CaseModel& m, const DerUnit& u) {
  return json{{"physical", m.components[u.physical].id},
              {"mc", m.components[u.mc].id},
              {"section", m.sections[u.section].id}};
}

std::string endpoint_name(const CaseModel& m, SectionIndex s) {
  if (s == kSubstationNode) return "substation";
  if (s == kBackupNode) return "backup";
  return m.sections[s].id;
}

}  // namespace

std::string_view to_string(ComponentKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "?";
}

std::optional<ComponentKind> parse_component_kind(std::string_view text) {
  for (const auto& k : kKindNames) {
    if (k.name == text) return k.kind;
  }
  return std::nullopt;
}

bool is_cyber(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::dms:
    case ComponentKind::mgcc:
    case ComponentKind::mc:
    case ComponentKind::lc:
    case ComponentKind::cbc:
    case ComponentKind::cyber_link:
      return true;
    default:
      return false;
  }
}

std::string_view to_string(SwitchRole role) {
  switch (role) {
    case SwitchRole::internal: return "internal";
    case SwitchRole::poi: return "poi";
    case SwitchRole::substation: return "substation";
    case SwitchRole::backup: return "backup";
  }
  return "?";
}

ComponentIndex CaseModel::find(std::string_view id) const {
  auto it = component_index.find(id);
  return it == component_index.end() ? kNoComponent : it->second;
}

SegmentCatalog aggregate_segments(const MicrogridSpec& mg) {
  SegmentCatalog cat;
  for (const auto& lp : mg.load_points) {
    for (const auto& seg : lp.segments) cat.costs.push_back(seg.cost);
  }
  std::sort(cat.costs.begin(), cat.costs.end());
  cat.costs.erase(std::unique(cat.costs.begin(), cat.costs.end()), cat.costs.end());
  for (const auto& lp : mg.load_points) {
    std::vector<std::size_t> map;
    for (const auto& seg : lp.segments) {
      auto it = std::lower_bound(cat.costs.begin(), cat.costs.end(), seg.cost);
      map.push_back(static_cast<std::size_t>(it - cat.costs.begin()));
    }
    cat.segment_of.push_back(std::move(map));
  }
  return cat;
}

std::vector<double> segment_demand(const MicrogridSpec& mg, const std::vector<double>& load_point_mw,
                                   const std::vector<bool>& transformer_up) {
  std::vector<double> demand(mg.catalog.size(), 0.0);
  for (std::size_t l = 0; l < mg.load_points.size(); ++l) {
    if (!transformer_up[l]) continue;
    const auto& segs = mg.load_points[l].segments;
    for (std::size_t k = 0; k < segs.size(); ++k) {
      demand[mg.catalog.segment_of[l][k]] += segs[k].share * load_point_mw[l];
    }
  }
  return demand;
}

void validate_case(const CaseModel& m) {
  if (m.components.empty()) fail("components", "case has no components");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < m.components.size(); ++i) {
    const auto& c = m.components[i];
    const std::string where = "component '" + c.id + "'";
    if (!ids.insert(c.id).second) fail(where, "duplicate id");
    if (i > 0 && m.components[i - 1].id > c.id) fail("components", "not sorted by id");
    if (!(c.failure_rate >= 0.0)) fail(where, "failure_rate must be >= 0");
    if (c.failure_rate > 0.0 && !(c.repair_rate > 0.0)) fail(where, "repair_rate must be > 0 when failure_rate > 0");
  }
  if (m.microgrids.empty()) fail("microgrids", "case has no microgrids");

  for (std::size_t s = 0; s < m.sections.size(); ++s) {
    if (m.sections[s].microgrid >= m.microgrids.size()) fail("sections[" + std::to_string(s) + "]", "dangling microgrid");
    for (ComponentIndex e : m.sections[s].elements) {
      require_kind(m, e, {ComponentKind::line, ComponentKind::busbar}, "sections[" + std::to_string(s) + "]");
    }
  }

  for (std::size_t i = 0; i < m.microgrids.size(); ++i) {
    const auto& mg = m.microgrids[i];
    const std::string where = "microgrid " + std::to_string(mg.tag);
    require_kind(m, mg.mgcc, {ComponentKind::mgcc}, where + ".mgcc");
    auto check_unit = [&](const DerUnit& u, ComponentKind kind, const std::string& w) {
      require_kind(m, u.physical, {kind}, w + ".physical");
      require_kind(m, u.mc, {ComponentKind::mc}, w + ".mc");
      require_section(m, u.section, i, w + ".section");
    };
    for (const auto* r : {&mg.wind, &mg.pv}) {
      if (!*r) continue;
      if (!((*r)->capacity >= 0.0)) fail(where, "renewable capacity must be >= 0");
      check_unit((*r)->unit, ComponentKind::physical_der, where);
    }
    for (const auto& de : mg.diesels) {
      if (!(de.max_output > 0.0)) fail(where + ".diesel " + de.id, "max_output must be > 0");
      check_unit(de.unit, ComponentKind::physical_der, where + ".diesel " + de.id);
    }
    if (mg.ess) {
      const auto& e = *mg.ess;
      if (!(e.max_charge >= 0.0 && e.max_discharge >= 0.0)) fail(where + ".ess", "rates must be >= 0");
      if (!(e.charge_eff > 0.0 && e.charge_eff <= 1.0 && e.discharge_eff > 0.0 && e.discharge_eff <= 1.0)) {
        fail(where + ".ess", "efficiencies must lie in (0, 1]");
      }
      if (!(e.soc_min >= 0.0 && e.soc_min <= e.soc_max)) fail(where + ".ess", "need 0 <= soc_min <= soc_max");
      check_unit(e.unit, ComponentKind::physical_ess, where + ".ess");
    }
    if (mg.load_points.empty()) fail(where, "microgrid has no load points");
    for (const auto& lp : mg.load_points) {
      const std::string lw = where + ".load_point " + lp.id;
      if (!(lp.peak_load >= 0.0)) fail(lw, "peak_load must be >= 0");
      if (lp.segments.empty()) fail(lw, "no segments");
      double total = 0.0;
      for (const auto& seg : lp.segments) {
        if (!(seg.share > 0.0 && seg.share <= 1.0)) fail(lw, "segment share must lie in (0, 1]");
        if (!(seg.cost >= 0.0)) fail(lw, "segment cost must be >= 0");
        total += seg.share;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "segment proportions sum to " << total << ", expected 1";
        fail(lw, msg.str());
      }
      require_kind(m, lp.transformer, {ComponentKind::transformer}, lw + ".transformer");
      require_kind(m, lp.lc, {ComponentKind::lc}, lw + ".lc");
      require_section(m, lp.section, i, lw + ".section");
    }
    if (mg.catalog != aggregate_segments(mg)) fail(where, "segment catalog out of date");
  }

  // section/switch tree: sections + substation node, switches other than the backup tie
  const std::size_t S = m.sections.size();
  if (S == 0) fail("sections", "case has no sections");
  auto node = [&](SectionIndex s) -> std::size_t { return s == kSubstationNode ? S : static_cast<std::size_t>(s); };
  Dsu tree(S + 1);
  std::size_t edges = 0;
  for (std::size_t k = 0; k < m.switches.size(); ++k) {
    const auto& sw = m.switches[k];
    const std::string where = "switch '" + sw.id + "'";
    require_kind(m, sw.cbc, {ComponentKind::cbc}, where + ".cbc");
    if (sw.device != kNoComponent) require_kind(m, sw.device, {ComponentKind::power_switch}, where + ".device");
    if (sw.controllers.empty()) fail(where, "no controllers");
    for (ComponentIndex c : sw.controllers) require_kind(m, c, {ComponentKind::dms, ComponentKind::mgcc}, where);
    if (sw.a >= S) fail(where, "first endpoint must be a section");
    if (sw.role == SwitchRole::backup) {
      if (sw.b != kBackupNode) fail(where, "backup switch must connect to 'backup'");
      continue;
    }
    if (sw.b == kBackupNode) fail(where, "only the backup switch may connect to 'backup'");
    if (sw.b != kSubstationNode && sw.b >= S) fail(where, "dangling section");
    if ((sw.b == kSubstationNode) != (sw.role == SwitchRole::substation)) {
      fail(where, "role substation must connect a section to 'substation'");
    }
    if (sw.role == SwitchRole::internal && m.sections[sw.a].microgrid != m.sections[sw.b].microgrid) {
      fail(where, "internal switch joins two microgrids");
    }
    if (sw.role == SwitchRole::poi && m.sections[sw.a].microgrid == m.sections[sw.b].microgrid) {
      fail(where, "POI switch inside one microgrid");
    }
    if (!tree.unite(node(sw.a), node(sw.b))) fail(where, "closes a loop; the network must be radial");
    ++edges;
  }
  if (edges != S) fail("switches", "sections and substation are not connected into one radial tree");

  // microgrid tree rooted at the substation's microgrid
  const std::size_t M = m.microgrids.size();
  if (m.substation.feeder_switch >= m.switches.size()) fail("substation", "dangling switch");
  require_kind(m, m.substation.upstream, {ComponentKind::upstream}, "substation.upstream");
  require_kind(m, m.substation.dms, {ComponentKind::dms}, "substation.dms");
  if (m.substation.upstream_link != kNoComponent) {
    require_kind(m, m.substation.upstream_link, {ComponentKind::cyber_link}, "substation.upstream_link");
  }
  if (!(m.substation.capacity >= 0.0)) fail("substation", "capacity must be >= 0");
  if (m.lines.size() + 1 != M) fail("lines", "a radial system of " + std::to_string(M) + " microgrids needs " +
                                                 std::to_string(M - 1) + " lines");
  std::vector<int> parent(M, -1);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t poi_count = 0;
  for (const auto& sw : m.switches) poi_count += sw.role == SwitchRole::poi;
  if (poi_count != m.lines.size()) fail("lines", "every POI switch must belong to exactly one line");
  for (std::size_t k = 0; k < m.lines.size(); ++k) {
    const auto& line = m.lines[k];
    const std::string where = "lines[" + std::to_string(k) + "]";
    if (line.from >= M || line.to >= M) fail(where, "dangling microgrid reference");
    if (line.from == line.to) fail(where, "self loop");
    if (!(line.capacity >= 0.0)) fail(where, "capacity must be >= 0");
    auto key = std::minmax(line.from, line.to);
    if (!seen.insert(key).second) fail(where, "microgrid pair listed twice");
    if (line.poi_switch >= m.switches.size() || m.switches[line.poi_switch].role != SwitchRole::poi) {
      fail(where, "poi_switch must be a POI switch");
    }
    const auto& sw = m.switches[line.poi_switch];
    const std::size_t ma = m.sections[sw.a].microgrid;
    const std::size_t mb = m.sections[sw.b].microgrid;
    if (std::minmax(ma, mb) != key) fail(where, "POI switch does not join the line's microgrids");
    if (parent[line.to] != -1) fail(where, "microgrid " + std::to_string(m.microgrids[line.to].tag) + " has two parents");
    parent[line.to] = static_cast<int>(line.from);
  }
  const std::size_t root = m.root_microgrid();
  if (parent[root] != -1) fail("lines", "the substation microgrid cannot be a receiving end");
  for (std::size_t mg = 0; mg < M; ++mg) {
    std::size_t hops = 0;
    std::size_t cur = mg;
    while (cur != root) {
      if (parent[cur] < 0 || ++hops > M) {
        fail("lines", "microgrid " + std::to_string(m.microgrids[mg].tag) +
                          " is not reached from the substation along directed lines");
      }
      cur = static_cast<std::size_t>(parent[cur]);
    }
  }

  if (m.backup.present) {
    if (m.backup.tie_switch >= m.switches.size() || m.switches[m.backup.tie_switch].role != SwitchRole::backup) {
      fail("backup", "switch must have role backup");
    }
    if (!(m.backup.capacity >= 0.0)) fail("backup", "capacity must be >= 0");
  } else {
    for (const auto& sw : m.switches) {
      if (sw.role == SwitchRole::backup) fail("switch '" + sw.id + "'", "backup switch without a backup block");
    }
  }
  for (std::size_t k = 0; k < m.cyber_edges.size(); ++k) {
    const auto& e = m.cyber_edges[k];
    const std::string where = "cyber_edges[" + std::to_string(k) + "]";
    require_kind(m, e.link, {ComponentKind::cyber_link}, where);
    require_kind(m, e.a, {ComponentKind::dms, ComponentKind::mgcc, ComponentKind::mc, ComponentKind::lc, ComponentKind::cbc},
                 where);
    require_kind(m, e.b, {ComponentKind::dms, ComponentKind::mgcc, ComponentKind::mc, ComponentKind::lc, ComponentKind::cbc},
                 where);
    if (e.a == e.b) fail(where, "self loop");
  }
  if (!(m.defaults.delta_t > 0.0)) fail("defaults.delta_t", "must be > 0");
  if (!(m.defaults.soc_start_fraction >= 0.0 && m.defaults.soc_start_fraction <= 1.0)) {
    fail("defaults.soc_start_fraction", "must lie in [0, 1]");
  }
  if (!(m.defaults.lambda_ser > 0.0)) fail("defaults.lambda_ser", "must be > 0");
  if (m.defaults.lambda_ess && !(*m.defaults.lambda_ess >= 0.0)) fail("defaults.lambda_ess", "must be >= 0");
}

CaseModel parse_case_text(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // locate byte offset as line/column
    std::size_t line = 1;
    std::size_t col = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ValidationError("case: parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + e.what());
  }
  try {
    return CaseReader(root, base_dir).read();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("case: ") + e.what());
  }
}

CaseModel parse_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("case: cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_case_text(buffer.str(), path.parent_path());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_case(const CaseModel& m) {
  json root;
  root["name"] = m.name;
  json comps = json::array();
  for (const auto& c : m.components) {
    comps.push_back({{"id", c.id},
                     {"kind", std::string(to_string(c.kind))},
                     {"failure_rate", c.failure_rate},
                     {"repair_rate", c.repair_rate}});
  }
  root["components"] = comps;

  json sections = json::array();
  for (const auto& s : m.sections) {
    json el = json::array();
    for (ComponentIndex e : s.elements) el.push_back(m.components[e].id);
    sections.push_back({{"id", s.id}, {"microgrid", m.microgrids[s.microgrid].tag}, {"elements", el}});
  }
  root["sections"] = sections;

  json mgs = json::array();
  for (const auto& mg : m.microgrids) {
    json j;
    j["tag"] = mg.tag;
    j["mgcc"] = m.components[mg.mgcc].id;
    if (mg.wind) {
      j["wind"] = der_json(m, mg.wind->unit);
      j["wind"]["capacity"] = mg.wind->capacity;
    }
    if (mg.pv) {
      j["pv"] = der_json(m, mg.pv->unit);
      j["pv"]["capacity"] = mg.pv->capacity;
    }
    json diesels = json::array();
    for (const auto& de : mg.diesels) {
      json d = der_json(m, de.unit);
      d["id"] = de.id;
      d["max_output"] = de.max_output;
      d["fuel_cost"] = de.fuel_cost;
      d["emission_cost"] = de.emission_cost;
      diesels.push_back(d);
    }
    j["diesels"] = diesels;
    if (mg.ess) {
      const auto& e = *mg.ess;
      json ej = der_json(m, e.unit);
      ej["max_charge"] = e.max_charge;
      ej["max_discharge"] = e.max_discharge;
      ej["charge_eff"] = e.charge_eff;
      ej["discharge_eff"] = e.discharge_eff;
      ej["soc_min"] = e.soc_min;
      ej["soc_max"] = e.soc_max;
      ej["charge_cost"] = e.charge_cost;
      ej["discharge_cost"] = e.discharge_cost;
      j["ess"] = ej;
    }
    json lps = json::array();
    for (const auto& lp : mg.load_points) {
      json segs = json::array();
      for (const auto& s : lp.segments) segs.push_back({s.share, s.cost});
      lps.push_back({{"id", lp.id},
                     {"bus", lp.bus},
                     {"peak_load", lp.peak_load},
                     {"segments", segs},
                     {"transformer", m.components[lp.transformer].id},
                     {"lc", m.components[lp.lc].id},
                     {"section", m.sections[lp.section].id}});
    }
    j["load_points"] = lps;
    mgs.push_back(j);
  }
  root["microgrids"] = mgs;

  json switches = json::array();
  for (const auto& sw : m.switches) {
    json s;
    s["id"] = sw.id;
    s["role"] = std::string(to_string(sw.role));
    if (sw.device != kNoComponent) s["device"] = m.components[sw.device].id;
    s["cbc"] = m.components[sw.cbc].id;
    json ctrl = json::array();
    for (ComponentIndex c : sw.controllers) ctrl.push_back(m.components[c].id);
    s["controllers"] = ctrl;
    s["between"] = {endpoint_name(m, sw.a), endpoint_name(m, sw.b)};
    switches.push_back(s);
  }
  root["switches"] = switches;

  json lines = json::array();
  for (const auto& l : m.lines) {
    lines.push_back({{"from", m.microgrids[l.from].tag},
                     {"to", m.microgrids[l.to].tag},
                     {"capacity", l.capacity},
                     {"poi_switch", m.switches[l.poi_switch].id}});
  }
  root["lines"] = lines;

  json sub;
  sub["capacity"] = m.substation.capacity;
  sub["upstream"] = m.components[m.substation.upstream].id;
  if (m.substation.upstream_link != kNoComponent) sub["upstream_link"] = m.components[m.substation.upstream_link].id;
  sub["dms"] = m.components[m.substation.dms].id;
  sub["switch"] = m.switches[m.substation.feeder_switch].id;
  root["substation"] = sub;

  if (m.backup.present) {
    root["backup"] = {{"enabled", m.backup.enabled},
                      {"switch", m.switches[m.backup.tie_switch].id},
                      {"capacity", m.backup.capacity}};
  }
  json edges = json::array();
  for (const auto& e : m.cyber_edges) {
    edges.push_back({{"id", m.components[e.link].id}, {"a", m.components[e.a].id}, {"b", m.components[e.b].id}});
  }
  root["cyber_edges"] = edges;

  json defaults;
  defaults["delta_t"] = m.defaults.delta_t;
  defaults["soc_start_fraction"] = m.defaults.soc_start_fraction;
  defaults["lambda_ser"] = m.defaults.lambda_ser;
  if (m.defaults.lambda_ess) defaults["lambda_ess"] = *m.defaults.lambda_ess;
  defaults["lambda_thr"] = m.defaults.lambda_thr;
  root["defaults"] = defaults;

  json series;
  series["source"] = m.series.source == SeriesSpec::Source::csv ? "csv" : "synthetic";
  if (m.series.source == SeriesSpec::Source::csv) series["path"] = m.series.csv_path;
  series["years"] = m.series.years;
  series["seed"] = m.series.seed;
  series["clamp"] = m.series.clamp;
  const auto& syn = m.series.synthetic;
  series["synthetic"] = {{"wind_mean", syn.wind_mean},       {"wind_seasonal", syn.wind_seasonal},
                         {"wind_diurnal", syn.wind_diurnal}, {"wind_noise", syn.wind_noise},
                         {"pv_peak", syn.pv_peak},           {"pv_seasonal", syn.pv_seasonal},
                         {"pv_noise", syn.pv_noise},         {"price_mean", syn.price_mean},
                         {"price_daily", syn.price_daily},   {"price_noise", syn.price_noise}};
  root["series"] = series;
  return root.dump(2);
}

}  // namespace cpmmg
