#include "cpmmg/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cpmmg/error.hpp"

namespace cpmmg {

namespace {

constexpr double kEps = 1e-9;
// tiny extra cost on exports so a P1 solution never buys and sells at once
constexpr double kWashBreak = 1e-6;

bool in_sections(const std::vector<SectionIndex>& sections, SectionIndex s) {
  return std::binary_search(sections.begin(), sections.end(), s);
}

std::string_view form_name(Formulation f) {
  switch (f) {
    case Formulation::p1: return "p1";
    case Formulation::p2b: return "p2b";
    case Formulation::p3a: return "p3a";
    case Formulation::p3b: return "p3b";
  }
  return "?";
}

MicrogridAvailability full_availability(const MicrogridSpec& mg) {
  MicrogridAvailability a;
  a.diesel.assign(mg.diesels.size(), true);
  a.lc.assign(mg.load_points.size(), true);
  a.tr.assign(mg.load_points.size(), true);
  return a;
}

}  // namespace

// ---------------------------------------------------------------- profiles

double PartProfile::total_demand(std::size_t t) const {
  double s = 0.0;
  for (std::size_t r = 0; r < segments(); ++r) s += demand(r, t);
  return s;
}

double PartProfile::total_forced(std::size_t t) const {
  double s = 0.0;
  for (std::size_t r = 0; r < segments(); ++r) s += forced(r, t);
  return s;
}

PartProfile PartProfile::slice(std::size_t from, std::size_t count) const {
  PartProfile p = *this;
  p.hours = count;
  auto cut = [&](std::vector<double>& v) {
    v = std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(from),
                            v.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  cut(p.wind);
  cut(p.pv);
  cut(p.load_frac);
  cut(p.price);
  return p;
}

PartProfile make_profile(const CaseModel& model, const MgPart& part, const MicrogridAvailability& availability,
                         const ExogenousSeries& series, std::size_t series_hour, std::size_t hours) {
  const MicrogridSpec& mg = model.microgrids.at(part.microgrid);
  PartProfile p;
  p.microgrid = part.microgrid;
  p.hours = hours;
  p.delta_t = model.defaults.delta_t;
  p.wind.assign(hours, 0.0);
  p.pv.assign(hours, 0.0);
  p.load_frac.resize(hours);
  p.price.resize(hours);
  const bool has_wind = mg.wind && in_sections(part.sections, mg.wind->unit.section) && availability.wind;
  const bool has_pv = mg.pv && in_sections(part.sections, mg.pv->unit.section) && availability.pv;
  for (std::size_t t = 0; t < hours; ++t) {
    const std::size_t h = series.wrap(series_hour + t);
    if (has_wind) p.wind[t] = mg.wind->capacity * series.wind_cf[h];
    if (has_pv) p.pv[t] = mg.pv->capacity * series.pv_cf[h];
    p.load_frac[t] = series.load_frac[h];
    p.price[t] = series.price[h];
  }
  for (std::size_t d = 0; d < mg.diesels.size(); ++d) {
    const auto& unit = mg.diesels[d];
    if (!in_sections(part.sections, unit.unit.section)) continue;
    p.diesel_cap.push_back(availability.diesel[d] ? unit.max_output : 0.0);
    p.diesel_cost.push_back(unit.marginal_cost());
  }
  if (mg.ess && in_sections(part.sections, mg.ess->unit.section)) {
    p.ess = *mg.ess;
    p.ess_available = availability.ess;
  }
  const std::size_t R = mg.catalog.size();
  p.segment_cost = mg.catalog.costs;
  p.demand_peak.assign(R, 0.0);
  p.forced_peak.assign(R, 0.0);
  p.upper_peak.assign(R, 0.0);
  for (std::size_t l = 0; l < mg.load_points.size(); ++l) {
    const auto& lp = mg.load_points[l];
    if (!in_sections(part.sections, lp.section)) continue;
    const bool tr = availability.tr[l];
    const bool lc = availability.lc[l];
    for (std::size_t k = 0; k < lp.segments.size(); ++k) {
      const std::size_t r = mg.catalog.segment_of[l][k];
      const double mw = lp.segments[k].share * lp.peak_load;
      p.demand_peak[r] += mw;
      if (!tr) p.forced_peak[r] += mw;
      if (lc || !tr) p.upper_peak[r] += mw;
    }
  }
  return p;
}

PartSchedule::PartSchedule(const PartProfile& profile) : microgrid(profile.microgrid), hours(profile.hours) {
  const std::size_t T = profile.hours;
  diesel.assign(profile.diesel_cap.size(), std::vector<double>(T, 0.0));
  charge.assign(T, 0.0);
  discharge.assign(T, 0.0);
  wind.assign(T, 0.0);
  pv.assign(T, 0.0);
  buy.assign(T, 0.0);
  sell.assign(T, 0.0);
  soc.assign(T, 0.0);
  shed.assign(profile.segments(), std::vector<double>(T, 0.0));
}

double PartSchedule::total_shed(std::size_t t) const {
  double s = 0.0;
  for (const auto& row : shed) s += row[t];
  return s;
}

void PartSchedule::splice(const PartSchedule& other, std::size_t offset, std::size_t count) {
  auto copy = [&](std::vector<double>& dst, const std::vector<double>& src) {
    std::copy_n(src.begin(), count, dst.begin() + static_cast<std::ptrdiff_t>(offset));
  };
  for (std::size_t d = 0; d < diesel.size(); ++d) copy(diesel[d], other.diesel[d]);
  copy(charge, other.charge);
  copy(discharge, other.discharge);
  copy(wind, other.wind);
  copy(pv, other.pv);
  copy(buy, other.buy);
  copy(sell, other.sell);
  copy(soc, other.soc);
  for (std::size_t r = 0; r < shed.size(); ++r) copy(shed[r], other.shed[r]);
  if (offset == 0) soc_initial = other.soc_initial;
}

// ---------------------------------------------------------------- network

ZoneNetwork zone_network(const CaseModel& model, const Zone& zone) {
  ZoneNetwork net;
  net.parts = zone.parts.size();
  net.root = zone.root_part < net.parts ? zone.root_part : 0;
  net.has_supply = zone.mode == OperationMode::no && zone.supply != SupplyKind::none;
  net.supply_capacity = zone.supply_capacity;
  if (net.parts == 0) return net;

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(net.parts);  // (link, other)
  for (std::size_t k = 0; k < zone.links.size(); ++k) {
    adj[zone.links[k].part_a].emplace_back(k, zone.links[k].part_b);
    adj[zone.links[k].part_b].emplace_back(k, zone.links[k].part_a);
  }
  std::vector<int> seen(net.parts, 0);
  std::vector<std::size_t> order{net.root};
  std::vector<std::size_t> parent_edge(net.parts, SIZE_MAX);
  seen[net.root] = 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t u = order[i];
    for (const auto& [k, v] : adj[u]) {
      if (seen[v]) continue;
      seen[v] = 1;
      const auto& link = zone.links[k];
      net.edges.push_back({link.line, u, v, model.lines.at(link.line).capacity, {}});
      parent_edge[v] = net.edges.size() - 1;
      order.push_back(v);
    }
  }
  // subtrees by reverse BFS order
  std::vector<std::vector<std::size_t>> below(net.parts);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t v = *it;
    below[v].push_back(v);
    std::sort(below[v].begin(), below[v].end());
    if (parent_edge[v] != SIZE_MAX) {
      auto& e = net.edges[parent_edge[v]];
      e.subtree = below[v];
      auto& up = below[e.parent];
      up.insert(up.end(), below[v].begin(), below[v].end());
    }
  }
  return net;
}

NetworkFlows network_flows(const ZoneNetwork& net, const std::vector<double>& exchange) {
  NetworkFlows f;
  f.line.reserve(net.edges.size());
  for (const auto& e : net.edges) {
    double s = 0.0;
    for (std::size_t p : e.subtree) s += exchange[p];
    f.line.push_back(s);
  }
  f.supply = std::accumulate(exchange.begin(), exchange.end(), 0.0);
  return f;
}

// ---------------------------------------------------------------- settings

std::size_t PredictionPolicy::predict_end(std::size_t now, std::size_t true_end, double mean_remaining) const {
  std::size_t end;
  if (truth) {
    end = std::max(true_end, now + 1);
  } else {
    const double h = std::max(1.0, std::round(mean_remaining));
    end = now + static_cast<std::size_t>(std::min(h, 1e6));
  }
  return std::min(end, now + std::max<std::size_t>(max_horizon, 1));
}

LpDumpSink::LpDumpSink(std::filesystem::path directory, std::size_t limit)
    : directory_(std::move(directory)), limit_(limit) {
  std::filesystem::create_directories(directory_);
}

void LpDumpSink::dump(const LpProblem& problem, const std::string& tag) {
  std::size_t n;
  {
    std::lock_guard lock(mutex_);
    if (count_ >= limit_) return;
    n = count_++;
  }
  std::ostringstream name;
  name << n << '_' << tag << ".lp";
  std::ofstream out(directory_ / name.str());
  write_lp(problem, out);
}

// ---------------------------------------------------------------- LP builder

namespace {

struct PartVars {
  std::vector<std::vector<std::size_t>> diesel;  // [d][t]
  std::vector<std::size_t> wind, pv, ch, dch, soc, buy, sell;
  std::vector<std::vector<std::size_t>> ls, em;  // [r][t], SIZE_MAX when absent
};

double value(const std::vector<double>& x, std::size_t var) { return var == SIZE_MAX ? 0.0 : x[var]; }

}  // namespace

ZoneLpResult solve_zone_lp(const std::vector<PartProfile>& parts, const ZoneNetwork& net,
                           const std::vector<double>& soc_start, const ZoneLpOptions& options,
                           const DispatchSettings* settings) {
  const Formulation form = options.form;
  const bool joint = form == Formulation::p3a || form == Formulation::p3b;
  const bool exchange = form != Formulation::p2b;
  const bool names = options.names || (settings && settings->dumps);
  const std::size_t P = parts.size();
  const std::size_t T = P ? parts.front().hours : 0;

  ZoneLpResult result;
  LpProblem& lp = result.problem;
  std::vector<PartVars> vars(P);
  auto nm = [&](std::size_t var, std::size_t p, const char* what, std::size_t t, long extra = -1) {
    if (!names) return;
    std::ostringstream s;
    s << what << "_m" << parts[p].microgrid + 1;
    if (extra >= 0) s << '_' << extra + 1;
    s << "_t" << t;
    lp.name_variable(var, s.str());
  };

  for (std::size_t p = 0; p < P; ++p) {
    const PartProfile& pr = parts[p];
    PartVars& v = vars[p];
    const double dt = pr.delta_t;
    const std::size_t D = pr.diesel_cap.size();
    const std::size_t R = pr.segments();
    v.diesel.assign(D, std::vector<std::size_t>(T));
    v.ls.assign(R, std::vector<std::size_t>(T, SIZE_MAX));
    v.em.assign(R, std::vector<std::size_t>(T, SIZE_MAX));
    const bool ess = pr.ess.has_value();
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<LpTerm> balance;
      for (std::size_t d = 0; d < D; ++d) {
        const auto x = lp.add_variable(0.0, pr.diesel_cap[d], pr.diesel_cost[d] * dt);
        nm(x, p, "de", t, static_cast<long>(d));
        v.diesel[d][t] = x;
        balance.push_back({x, 1.0});
      }
      v.wind.push_back(lp.add_variable(0.0, pr.wind[t], 0.0));
      nm(v.wind.back(), p, "w", t);
      v.pv.push_back(lp.add_variable(0.0, pr.pv[t], 0.0));
      nm(v.pv.back(), p, "pv", t);
      balance.push_back({v.wind.back(), 1.0});
      balance.push_back({v.pv.back(), 1.0});
      if (ess) {
        const auto& e = *pr.ess;
        const double phi = pr.ess_available ? 1.0 : 0.0;
        v.ch.push_back(lp.add_variable(0.0, e.max_charge * phi, e.charge_cost * dt));
        nm(v.ch.back(), p, "ch", t);
        v.dch.push_back(lp.add_variable(0.0, e.max_discharge * phi, e.discharge_cost * dt));
        nm(v.dch.back(), p, "dch", t);
        double lo = e.soc_min, hi = e.soc_max;
        if (t + 1 == T && form == Formulation::p1) {
          const double target = options.terminal_soc ? (*options.terminal_soc)[p] : soc_start[p];
          lo = hi = target;
        }
        double soc_cost = 0.0;
        if (form == Formulation::p3a) soc_cost = -options.joint.lambda_ess;
        v.soc.push_back(lp.add_variable(lo, hi, soc_cost));
        nm(v.soc.back(), p, "soc", t);
        balance.push_back({v.ch.back(), -1.0});
        balance.push_back({v.dch.back(), 1.0});
        std::vector<LpTerm> rec{{v.soc.back(), 1.0},
                                {v.ch.back(), -e.charge_eff * dt},
                                {v.dch.back(), dt / e.discharge_eff}};
        double rhs = 0.0;
        if (t == 0) {
          rhs = soc_start[p];
        } else {
          rec.push_back({v.soc[t - 1], -1.0});
        }
        const auto row = lp.add_row(std::move(rec), RowSense::eq, rhs);
        if (names) lp.name_row(row, "soc_m" + std::to_string(pr.microgrid + 1) + "_t" + std::to_string(t));
        if (form == Formulation::p3a) lp.offset += options.joint.lambda_ess * soc_start[p];
      }
      if (exchange) {
        double imp = kInf, exp = kInf;
        if (options.caps) {
          imp = (*options.caps)[p][t].import;
          exp = (*options.caps)[p][t].export_;
        }
        double buy_cost, sell_cost;
        if (joint) {
          buy_cost = options.joint.lambda_ser * dt;
          sell_cost = 0.0;
        } else {
          buy_cost = pr.price[t] * dt;
          sell_cost = -pr.price[t] * dt + kWashBreak;
        }
        v.buy.push_back(lp.add_variable(0.0, imp, buy_cost));
        nm(v.buy.back(), p, "buy", t);
        v.sell.push_back(lp.add_variable(0.0, exp, sell_cost));
        nm(v.sell.back(), p, "sell", t);
        balance.push_back({v.buy.back(), 1.0});
        balance.push_back({v.sell.back(), -1.0});
      }
      double demand = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        const double dr = pr.demand(r, t);
        if (dr <= 0.0) continue;
        demand += dr;
        const double f = pr.forced(r, t);
        const double u = pr.upper(r, t);
        const double c = pr.segment_cost[r] * dt;
        v.ls[r][t] = lp.add_variable(f, u, c);
        nm(v.ls[r][t], p, "ls", t, static_cast<long>(r));
        balance.push_back({v.ls[r][t], 1.0});
        if (dr - u > kEps) {
          v.em[r][t] = lp.add_variable(0.0, dr - u, c + kEmergencyPenalty * dt);
          nm(v.em[r][t], p, "em", t, static_cast<long>(r));
          balance.push_back({v.em[r][t], 1.0});
        }
      }
      const auto row = lp.add_row(std::move(balance), RowSense::eq, demand);
      if (names) lp.name_row(row, "bal_m" + std::to_string(pr.microgrid + 1) + "_t" + std::to_string(t));
    }
  }

  std::vector<std::vector<std::size_t>> flow(net.edges.size(), std::vector<std::size_t>(T));
  if (joint) {
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<LpTerm> sum;
      for (std::size_t p = 0; p < P; ++p) {
        sum.push_back({vars[p].buy[t], 1.0});
        sum.push_back({vars[p].sell[t], -1.0});
      }
      const auto row = lp.add_row(std::move(sum), RowSense::eq, 0.0);
      if (names) lp.name_row(row, "pool_t" + std::to_string(t));
      for (std::size_t k = 0; k < net.edges.size(); ++k) {
        const auto& e = net.edges[k];
        const auto f = lp.add_variable(-e.capacity, e.capacity, 0.0);
        flow[k][t] = f;
        if (names) lp.name_variable(f, "f_l" + std::to_string(e.line + 1) + "_t" + std::to_string(t));
        std::vector<LpTerm> terms{{f, 1.0}};
        for (std::size_t p : e.subtree) {
          terms.push_back({vars[p].buy[t], -1.0});
          terms.push_back({vars[p].sell[t], 1.0});
        }
        const auto r = lp.add_row(std::move(terms), RowSense::eq, 0.0);
        if (names) lp.name_row(r, "flow_l" + std::to_string(e.line + 1) + "_t" + std::to_string(t));
      }
    }
  }

  if (settings && settings->dumps) {
    settings->dumps->dump(lp, settings->dump_tag + std::string(form_name(form)));
  }
  const LpSolution sol = solve_lp(lp);
  result.status = sol.status;
  if (sol.status != LpStatus::optimal) {
    std::ostringstream msg;
    msg << "dispatch LP " << form_name(form) << " not solved: " << to_string(sol.status);
    throw SimulationError(msg.str());
  }
  result.objective = sol.objective;
  const auto& x = sol.x;
  for (std::size_t p = 0; p < P; ++p) {
    const PartProfile& pr = parts[p];
    const PartVars& v = vars[p];
    PartSchedule s(pr);
    s.soc_initial = soc_start.empty() ? 0.0 : soc_start[p];
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < v.diesel.size(); ++d) s.diesel[d][t] = x[v.diesel[d][t]];
      s.wind[t] = x[v.wind[t]];
      s.pv[t] = x[v.pv[t]];
      if (pr.ess) {
        s.charge[t] = x[v.ch[t]];
        s.discharge[t] = x[v.dch[t]];
        s.soc[t] = x[v.soc[t]];
      }
      if (exchange) {
        s.buy[t] = x[v.buy[t]];
        s.sell[t] = x[v.sell[t]];
      }
      for (std::size_t r = 0; r < pr.segments(); ++r) s.shed[r][t] = value(x, v.ls[r][t]) + value(x, v.em[r][t]);
    }
    result.parts.push_back(std::move(s));
  }
  result.line_flow.assign(net.edges.size(), std::vector<double>(T, 0.0));
  if (joint) {
    for (std::size_t k = 0; k < net.edges.size(); ++k)
      for (std::size_t t = 0; t < T; ++t) result.line_flow[k][t] = x[flow[k][t]];
  }
  return result;
}

// ---------------------------------------------------------------- strategies

std::vector<double> ps_allocate(const std::vector<double>& claims, double capacity, double counterflow) {
  const double total = std::accumulate(claims.begin(), claims.end(), 0.0);
  const double room = std::max(0.0, capacity + counterflow);
  if (total <= room) return claims;
  std::vector<double> out(claims);
  const double k = room / total;
  for (double& c : out) c *= k;
  return out;
}

PartSchedule schedule_normal_day(const PartProfile& profile, double soc_start, const DispatchSettings* settings,
                                 const std::vector<ExchangeCap>* caps) {
  ZoneNetwork net;
  net.parts = 1;
  ZoneLpOptions opt;
  opt.form = Formulation::p1;
  std::vector<std::vector<ExchangeCap>> cap_matrix;
  if (caps) {
    cap_matrix.push_back(*caps);
    opt.caps = &cap_matrix;
  }
  if (settings) opt.joint = settings->joint;
  auto res = solve_zone_lp({profile}, net, {soc_start}, opt, settings);
  return std::move(res.parts.front());
}

CoordinationResult dms_coordinate(const std::vector<PartProfile>& parts, const ZoneNetwork& net,
                                  const std::vector<double>& soc_start, const DispatchSettings* settings) {
  constexpr std::size_t kMaxRounds = 20;
  constexpr double kTol = 1e-6;
  const std::size_t P = parts.size();
  const std::size_t T = P ? parts.front().hours : 0;
  std::vector<std::vector<ExchangeCap>> caps(P, std::vector<ExchangeCap>(T));
  CoordinationResult out;
  for (std::size_t p = 0; p < P; ++p) out.parts.push_back(schedule_normal_day(parts[p], soc_start[p], settings));

  auto limit = [&](const std::vector<std::size_t>& members, const std::vector<double>& ex, double flow, double capacity,
                   std::size_t t, std::vector<char>& touched) {
    const double dir = flow > 0 ? 1.0 : -1.0;
    std::vector<double> claims;
    std::vector<std::size_t> who;
    double counter = 0.0;
    for (std::size_t p : members) {
      const double e = ex[p] * dir;
      if (e > 0) {
        claims.push_back(e);
        who.push_back(p);
      } else {
        counter -= e;
      }
    }
    const auto alloc = ps_allocate(claims, capacity, counter);
    for (std::size_t i = 0; i < who.size(); ++i) {
      ExchangeCap& c = caps[who[i]][t];
      double& bound = dir > 0 ? c.import : c.export_;
      if (alloc[i] < bound) {
        bound = alloc[i];
        touched[who[i]] = 1;
      }
    }
  };

  std::vector<std::size_t> everyone(P);
  std::iota(everyone.begin(), everyone.end(), 0);
  for (std::size_t round = 0;; ++round) {
    std::vector<char> touched(P, 0);
    bool violated = false;
    out.line_flow.assign(net.edges.size(), std::vector<double>(T, 0.0));
    out.supply_flow.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> ex(P);
      for (std::size_t p = 0; p < P; ++p) ex[p] = out.parts[p].exchange(t);
      const NetworkFlows f = network_flows(net, ex);
      out.supply_flow[t] = f.supply;
      for (std::size_t k = 0; k < net.edges.size(); ++k) {
        out.line_flow[k][t] = f.line[k];
        if (std::abs(f.line[k]) > net.edges[k].capacity + kTol) {
          violated = true;
          limit(net.edges[k].subtree, ex, f.line[k], net.edges[k].capacity, t, touched);
        }
      }
      if (net.has_supply && std::abs(f.supply) > net.supply_capacity + kTol) {
        violated = true;
        limit(everyone, ex, f.supply, net.supply_capacity, t, touched);
      }
    }
    out.iterations = round;
    if (!violated) return out;
    if (round >= kMaxRounds) throw SimulationError("DMS congestion management did not settle within 20 rounds");
    for (std::size_t p = 0; p < P; ++p) {
      if (touched[p]) out.parts[p] = schedule_normal_day(parts[p], soc_start[p], settings, &caps[p]);
    }
  }
}

PartSchedule island_conservative_step(const PartProfile& profile, std::size_t t, double soc_prev,
                                      const IslandConfig& config) {
  const PartProfile one = profile.slice(t, 1);
  PartSchedule s(one);
  s.soc_initial = soc_prev;
  const double dt = one.delta_t;
  const std::size_t R = one.segments();
  double load = 0.0;
  for (std::size_t r = 0; r < R; ++r) load += one.demand(r, 0) - one.forced(r, 0);
  const double W = one.wind[0], PV = one.pv[0];
  const double zeta = load - (W + PV);

  double ch_room = 0.0, dch_room = 0.0;
  if (one.ess && one.ess_available) {
    const auto& e = *one.ess;
    ch_room = std::max(0.0, std::min(e.max_charge, (e.soc_max - soc_prev) / (e.charge_eff * dt)));
    dch_room = std::max(0.0, std::min(e.max_discharge, (soc_prev - e.soc_min) * e.discharge_eff / dt));
    if (config.ess_reserve_cost) {
      double critical = 0.0;
      for (std::size_t r = 0; r < R; ++r)
        if (one.segment_cost[r] >= *config.ess_reserve_cost) critical += one.demand(r, 0) - one.forced(r, 0);
      dch_room = std::min(dch_room, critical);
    }
  }
  const double cap = std::accumulate(one.diesel_cap.begin(), one.diesel_cap.end(), 0.0);
  auto diesel_max = [&] {
    for (std::size_t d = 0; d < one.diesel_cap.size(); ++d) s.diesel[d][0] = one.diesel_cap[d];
  };
  double gap = 0.0;
  if (zeta + ch_room <= 0.0) {
    s.charge[0] = ch_room;
    const double used = load + ch_room;
    const double avail = W + PV;
    const double k = avail > 0.0 ? used / avail : 0.0;
    s.wind[0] = W * k;
    s.pv[0] = PV * k;
  } else {
    s.wind[0] = W;
    s.pv[0] = PV;
    if (zeta + ch_room <= cap) {
      s.charge[0] = ch_room;
      double need = zeta + ch_room;
      std::vector<std::size_t> order(one.diesel_cap.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return one.diesel_cost[a] < one.diesel_cost[b]; });
      for (std::size_t d : order) {
        const double g = std::min(need, one.diesel_cap[d]);
        s.diesel[d][0] = g;
        need -= g;
      }
    } else if (zeta <= cap) {
      diesel_max();
      s.charge[0] = cap - zeta;
    } else if (zeta <= cap + dch_room) {
      diesel_max();
      s.discharge[0] = zeta - cap;
    } else {
      diesel_max();
      s.discharge[0] = dch_room;
      gap = zeta - cap - dch_room;
    }
  }

  for (std::size_t r = 0; r < R; ++r) s.shed[r][0] = one.forced(r, 0);
  if (gap > 0.0) {
    std::vector<std::size_t> order(R);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return one.segment_cost[a] < one.segment_cost[b]; });
    for (std::size_t r : order) {
      const double x = std::min(gap, std::max(0.0, one.upper(r, 0) - one.forced(r, 0)));
      s.shed[r][0] += x;
      gap -= x;
    }
    for (std::size_t r : order) {
      const double x = std::min(gap, std::max(0.0, one.demand(r, 0) - one.upper(r, 0)));
      s.shed[r][0] += x;
      gap -= x;
    }
  }
  if (one.ess) {
    const auto& e = *one.ess;
    s.soc[0] = soc_prev + e.charge_eff * s.charge[0] * dt - s.discharge[0] * dt / e.discharge_eff;
    s.soc[0] = std::clamp(s.soc[0], e.soc_min, e.soc_max);
  }
  return s;
}

PartSchedule island_horizon(const PartProfile& profile, double soc_start, const DispatchSettings* settings) {
  ZoneNetwork net;
  net.parts = 1;
  ZoneLpOptions opt;
  opt.form = Formulation::p2b;
  if (settings) opt.joint = settings->joint;
  auto res = solve_zone_lp({profile}, net, {soc_start}, opt, settings);
  return std::move(res.parts.front());
}

std::vector<PartSchedule> joint_step(const std::vector<PartProfile>& parts, const ZoneNetwork& net, std::size_t t,
                                     const std::vector<double>& soc_prev, const JointDispatchConfig& config,
                                     const DispatchSettings* settings) {
  std::vector<PartProfile> one;
  one.reserve(parts.size());
  for (const auto& p : parts) one.push_back(p.slice(t, 1));
  ZoneLpOptions opt;
  opt.form = Formulation::p3a;
  opt.joint = config;
  return solve_zone_lp(one, net, soc_prev, opt, settings).parts;
}

std::vector<PartSchedule> joint_horizon(const std::vector<PartProfile>& parts, const ZoneNetwork& net,
                                        const std::vector<double>& soc_start, const JointDispatchConfig& config,
                                        const DispatchSettings* settings) {
  ZoneLpOptions opt;
  opt.form = Formulation::p3b;
  opt.joint = config;
  return solve_zone_lp(parts, net, soc_start, opt, settings).parts;
}

// ---------------------------------------------------------------- checks

void InvariantReport::fail(const std::string& what) {
  if (violations++ == 0) first = what;
}

void InvariantReport::merge(const InvariantReport& other) {
  hours_checked += other.hours_checked;
  if (violations == 0 && other.violations > 0) first = other.first;
  violations += other.violations;
}

void check_schedule(const PartProfile& profile, const PartSchedule& s, bool exchange_allowed, InvariantReport& report,
                    double tol) {
  const double dt = profile.delta_t;
  auto fail = [&](std::size_t t, const char* what, double got) {
    std::ostringstream m;
    m << "MG" << profile.microgrid + 1 << " hour " << t << ": " << what << " (" << got << ")";
    report.fail(m.str());
  };
  for (std::size_t t = 0; t < profile.hours; ++t) {
    ++report.hours_checked;
    double supply = s.wind[t] + s.pv[t] + s.discharge[t] - s.charge[t] + s.buy[t] - s.sell[t];
    for (std::size_t d = 0; d < s.diesel.size(); ++d) {
      supply += s.diesel[d][t];
      if (s.diesel[d][t] < -tol || s.diesel[d][t] > profile.diesel_cap[d] + tol) fail(t, "diesel limit", s.diesel[d][t]);
    }
    const double demand = profile.total_demand(t);
    const double mismatch = supply + s.total_shed(t) - demand;
    if (std::abs(mismatch) > tol * (1.0 + demand)) fail(t, "power balance", mismatch);
    if (s.wind[t] < -tol || s.wind[t] > profile.wind[t] + tol) fail(t, "wind limit", s.wind[t]);
    if (s.pv[t] < -tol || s.pv[t] > profile.pv[t] + tol) fail(t, "pv limit", s.pv[t]);
    if (!exchange_allowed && (std::abs(s.buy[t]) > tol || std::abs(s.sell[t]) > tol)) fail(t, "exchange", s.buy[t]);
    if (s.buy[t] < -tol || s.sell[t] < -tol) fail(t, "negative exchange", std::min(s.buy[t], s.sell[t]));
    for (std::size_t r = 0; r < profile.segments(); ++r) {
      const double x = s.shed[r][t];
      if (x < profile.forced(r, t) - tol || x > profile.demand(r, t) + tol) fail(t, "shedding bounds", x);
    }
    if (profile.ess) {
      const auto& e = *profile.ess;
      const double phi = profile.ess_available ? 1.0 : 0.0;
      if (s.charge[t] < -tol || s.charge[t] > e.max_charge * phi + tol) fail(t, "charge limit", s.charge[t]);
      if (s.discharge[t] < -tol || s.discharge[t] > e.max_discharge * phi + tol)
        fail(t, "discharge limit", s.discharge[t]);
      if (s.soc[t] < e.soc_min - tol || s.soc[t] > e.soc_max + tol) fail(t, "soc bounds", s.soc[t]);
      const double prev = t == 0 ? s.soc_initial : s.soc[t - 1];
      const double expect = prev + e.charge_eff * s.charge[t] * dt - s.discharge[t] * dt / e.discharge_eff;
      if (std::abs(expect - s.soc[t]) > tol * (1.0 + std::abs(expect))) fail(t, "soc recursion", s.soc[t] - expect);
    } else if (std::abs(s.charge[t]) > tol || std::abs(s.discharge[t]) > tol) {
      fail(t, "storage without ESS", s.charge[t] + s.discharge[t]);
    }
  }
}

// ---------------------------------------------------------------- normal days

double reference_soc(const CaseModel& model, std::size_t mg) {
  const auto& ess = model.microgrids.at(mg).ess;
  if (!ess) return 0.0;
  return ess->soc_min + model.defaults.soc_start_fraction * (ess->soc_max - ess->soc_min);
}

NormalOperationCache::NormalOperationCache(const CaseModel& model, const ExogenousSeries& series)
    : model_(model), series_(&series) {
  whole_.mode = OperationMode::no;
  whole_.supply = SupplyKind::substation;
  whole_.supply_capacity = model.substation.capacity;
  whole_.has_substation = true;
  for (SectionIndex s = 0; s < model.sections.size(); ++s) whole_.sections.push_back(s);
  for (std::size_t m = 0; m < model.microgrids.size(); ++m) {
    MgPart part{m, {}};
    for (SectionIndex s = 0; s < model.sections.size(); ++s)
      if (model.sections[s].microgrid == m) part.sections.push_back(s);
    if (m == model.root_microgrid()) whole_.root_part = whole_.parts.size();
    whole_.parts.push_back(std::move(part));
  }
  auto part_of = [&](std::size_t mg) {
    for (std::size_t p = 0; p < whole_.parts.size(); ++p)
      if (whole_.parts[p].microgrid == mg) return p;
    return std::size_t{0};
  };
  for (std::size_t l = 0; l < model.lines.size(); ++l)
    whole_.links.push_back({l, part_of(model.lines[l].from), part_of(model.lines[l].to)});
  net_ = zone_network(model_, whole_);
  days_.resize(std::max<std::size_t>(series.days(), 1));
}

bool NormalOperationCache::compatible(const CaseModel& model, const ExogenousSeries& series) const {
  return &series == series_ && model.microgrids == model_.microgrids && model.lines == model_.lines &&
         model.sections == model_.sections && model.substation.capacity == model_.substation.capacity &&
         model.substation.root_section == model_.substation.root_section &&
         model.defaults.delta_t == model_.defaults.delta_t &&
         model.defaults.soc_start_fraction == model_.defaults.soc_start_fraction;
}

std::size_t NormalOperationCache::days_computed() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count_if(days_.begin(), days_.end(), [](const auto& d) { return d != nullptr; }));
}

std::shared_ptr<const NormalOperationCache::Day> NormalOperationCache::day(std::size_t series_day) {
  series_day %= days_.size();
  {
    std::lock_guard lock(mutex_);
    if (days_[series_day]) return days_[series_day];
  }
  std::vector<PartProfile> profiles;
  std::vector<double> start;
  for (const auto& part : whole_.parts) {
    const auto avail = full_availability(model_.microgrids[part.microgrid]);
    profiles.push_back(make_profile(model_, part, avail, *series_, series_day * kHoursPerDay, kHoursPerDay));
    start.push_back(reference_soc(model_, part.microgrid));
  }
  const CoordinationResult res = dms_coordinate(profiles, net_, start);
  auto d = std::make_shared<Day>();
  d->start.assign(model_.microgrids.size(), 0.0);
  d->soc_end.assign(model_.microgrids.size(), std::vector<double>(kHoursPerDay, 0.0));
  for (std::size_t p = 0; p < whole_.parts.size(); ++p) {
    const std::size_t mg = whole_.parts[p].microgrid;
    d->start[mg] = start[p];
    if (profiles[p].ess) d->soc_end[mg] = res.parts[p].soc;
    else d->soc_end[mg].assign(kHoursPerDay, 0.0);
  }
  std::lock_guard lock(mutex_);
  if (!days_[series_day]) days_[series_day] = std::move(d);
  return days_[series_day];
}

std::vector<double> NormalOperationCache::soc_at(std::size_t series_hour) {
  series_hour %= days_.size() * kHoursPerDay;
  const auto d = day(series_hour / kHoursPerDay);
  const std::size_t h = series_hour % kHoursPerDay;
  if (h == 0) return d->start;
  std::vector<double> out(d->start.size());
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = d->soc_end[m][h - 1];
  return out;
}

}  // namespace cpmmg
