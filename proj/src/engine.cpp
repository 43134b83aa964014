#include "cpmmg/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "cpmmg/error.hpp"

namespace cpmmg {

std::map<std::string, bool> ScenarioFlags::as_map() const {
  return {{"ideal_cyber", ideal_cyber},
          {"no_internal_protection", no_internal_protection},
          {"backup_supply", backup_supply},
          {"distributed_control", distributed_control},
          {"ablate_indirect", ablate_indirect}};
}

CaseModel scenario_transform(const CaseModel& model, const ScenarioFlags& flags) {
  if (flags.ideal_cyber && flags.distributed_control)
    throw ValidationError("--ideal-cyber and --distributed-control both redefine cyber failures; pick one");
  if (flags.ideal_cyber && flags.ablate_indirect)
    throw ValidationError("--ideal-cyber and --ablate-indirect both redefine cyber failures; pick one");
  if (flags.backup_supply && !model.backup.present) throw ValidationError("--backup-supply: the case has no backup tie");

  CaseModel out = model;
  if (flags.ideal_cyber) {
    for (auto& c : out.components)
      if (is_cyber(c.kind)) c.failure_rate = 0.0;
  }
  if (flags.no_internal_protection) {
    out.control.no_internal_protection = true;
    for (const auto& sw : out.switches) {
      if (sw.role == SwitchRole::internal && sw.device != kNoComponent) out.components[sw.device].failure_rate = 0.0;
    }
  }
  if (flags.backup_supply) out.backup.enabled = true;
  if (flags.distributed_control) out.control.distributed_control = true;
  if (flags.ablate_indirect) out.control.ablate_indirect = true;
  return out;
}

JointDispatchConfig joint_config(const CaseModel& model, const ExogenousSeries& series) {
  JointDispatchConfig c;
  c.lambda_ser = model.defaults.lambda_ser;
  c.lambda_thr = model.defaults.lambda_thr;
  c.lambda_ess = model.defaults.lambda_ess.value_or(series.mean_price());
  return c;
}

void SimulationStats::merge(const SimulationStats& o) {
  windows += o.windows;
  fast_windows += o.fast_windows;
  island_windows += o.island_windows;
  joint_windows += o.joint_windows;
  shutdown_windows += o.shutdown_windows;
}

bool no_zone_fast_path(const std::vector<PartProfile>& parts, const ZoneNetwork& net) {
  std::vector<double> import_max(parts.size()), export_max(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const PartProfile& pr = parts[p];
    double cheapest = kInf;
    double frac = 0.0, wind = 0.0, pv = 0.0, price = -kInf;
    for (std::size_t r = 0; r < pr.segments(); ++r)
      if (pr.upper_peak[r] - pr.forced_peak[r] > 0.0) cheapest = std::min(cheapest, pr.segment_cost[r]);
    for (std::size_t t = 0; t < pr.hours; ++t) {
      if (!(pr.price[t] < cheapest)) return false;
      frac = std::max(frac, pr.load_frac[t]);
      wind = std::max(wind, pr.wind[t]);
      pv = std::max(pv, pr.pv[t]);
      price = std::max(price, pr.price[t]);
    }
    double demand = 0.0;
    for (double d : pr.demand_peak) demand += d;
    // a unit dearer than every price in the window never runs at the optimum
    double diesel = 0.0;
    for (std::size_t d = 0; d < pr.diesel_cap.size(); ++d)
      if (pr.diesel_cost[d] <= price) diesel += pr.diesel_cap[d];
    const bool ess = pr.ess && pr.ess_available;
    import_max[p] = demand * frac + (ess ? pr.ess->max_charge : 0.0);
    export_max[p] = wind + pv + diesel + (ess ? pr.ess->max_discharge : 0.0);
  }
  auto fits = [&](const std::vector<std::size_t>& members, double cap) {
    double imp = 0.0, exp = 0.0;
    for (std::size_t p : members) {
      imp += import_max[p];
      exp += export_max[p];
    }
    return imp <= cap && exp <= cap;
  };
  for (const auto& e : net.edges)
    if (!fits(e.subtree, e.capacity)) return false;
  if (net.has_supply) {
    std::vector<std::size_t> all(parts.size());
    for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
    if (!fits(all, net.supply_capacity)) return false;
  }
  return true;
}

namespace {

// Closed-form NO schedule: only forced shedding, the exchange closes the balance.
PartSchedule fast_schedule(const PartProfile& pr, double soc) {
  PartSchedule s(pr);
  s.soc_initial = soc;
  for (std::size_t t = 0; t < pr.hours; ++t) {
    s.wind[t] = pr.wind[t];
    s.pv[t] = pr.pv[t];
    double net = -(pr.wind[t] + pr.pv[t]);
    for (std::size_t r = 0; r < pr.segments(); ++r) {
      s.shed[r][t] = pr.forced(r, t);
      net += pr.demand(r, t) - s.shed[r][t];
    }
    if (net >= 0) s.buy[t] = net;
    else s.sell[t] = -net;
    if (pr.ess) s.soc[t] = soc;
  }
  return s;
}

PartSchedule shutdown_schedule(const PartProfile& pr, double soc) {
  PartSchedule s(pr);
  s.soc_initial = soc;
  for (std::size_t t = 0; t < pr.hours; ++t) {
    for (std::size_t r = 0; r < pr.segments(); ++r) s.shed[r][t] = pr.demand(r, t);
    if (pr.ess) s.soc[t] = soc;
  }
  return s;
}

double last_soc(const PartSchedule& s) { return s.hours ? s.soc.back() : s.soc_initial; }

}  // namespace

WindowOutcome run_window(const EngineContext& ctx, const ContingencyWindow& window, std::size_t year,
                         const std::vector<double>& soc_start, YearRecord& record, InvariantReport* invariants) {
  const CaseModel& model = ctx.model;
  const std::size_t T = window.hours();
  const std::size_t abs0 = year * kHoursPerYear + window.start;
  const double dt = model.defaults.delta_t;
  WindowOutcome out;
  out.soc_end = soc_start;
  out.carry_soc.assign(model.microgrids.size(), 0);
  out.stats.windows = 1;

  std::vector<char> up(model.components.size(), 1);
  for (const auto& f : window.failed) up[f.component] = 0;
  const AvailabilityFrame frame = availability_frame(model, ctx.routes, up, window.start);
  const ZoneFamily family = operation_zones(model, frame);
  if (invariants && !is_partition(model, family)) invariants->fail("zone family is not a partition");

  // prediction inputs
  double earliest_repair = kInf, repair_rate_sum = 0.0;
  for (const auto& f : window.failed) {
    earliest_repair = std::min(earliest_repair, f.repair_end);
    repair_rate_sum += model.component(f.component).repair_rate;
  }
  std::size_t true_end = T;
  if (std::isfinite(earliest_repair)) {
    const double h = std::ceil(earliest_repair - 0.5) - static_cast<double>(window.start);
    true_end = static_cast<std::size_t>(std::max(1.0, h));
  }
  const double mean_remaining = repair_rate_sum > 0 ? kHoursPerYear / repair_rate_sum : static_cast<double>(T);

  auto profile = [&](const MgPart& part, std::size_t from, std::size_t hours) {
    return make_profile(model, part, frame.microgrids[part.microgrid], ctx.series, abs0 + from, hours);
  };
  auto has_ess = [&](const MgPart& part) {
    const auto& ess = model.microgrids[part.microgrid].ess;
    return ess && std::binary_search(part.sections.begin(), part.sections.end(), ess->unit.section);
  };
  auto check = [&](const PartProfile& pr, const PartSchedule& s, bool exchange) {
    if (invariants) check_schedule(pr, s, exchange, *invariants);
  };

  for (const Zone& zone : family.zones) {
    const std::size_t P = zone.parts.size();
    std::vector<PartProfile> profiles;
    std::vector<double> soc(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      profiles.push_back(profile(zone.parts[p], 0, T));
      if (has_ess(zone.parts[p])) soc[p] = soc_start[zone.parts[p].microgrid];
    }
    std::vector<PartSchedule> schedules;

    if (zone.mode == OperationMode::sd) {
      out.stats.shutdown_windows = 1;
      for (std::size_t p = 0; p < P; ++p) schedules.push_back(shutdown_schedule(profiles[p], soc[p]));
    } else if (zone.mode == OperationMode::no) {
      const ZoneNetwork net = zone_network(model, zone);
      if (no_zone_fast_path(profiles, net)) {
        for (std::size_t p = 0; p < P; ++p) schedules.push_back(fast_schedule(profiles[p], soc[p]));
      } else {
        schedules = dms_coordinate(profiles, net, soc, &ctx.settings).parts;
      }
    } else {
      const bool joint = zone.mode == OperationMode::jo;
      const ZoneNetwork net = zone_network(model, zone);
      if (joint) out.stats.joint_windows = 1;
      else out.stats.island_windows = 1;
      for (std::size_t p = 0; p < P; ++p) {
        schedules.emplace_back(profiles[p]);
        schedules.back().soc_initial = soc[p];
      }
      const auto& policy = ctx.settings.prediction;
      const std::size_t ini_end = std::min(T, std::max<std::size_t>(policy.t_ini, 1));
      for (std::size_t t = 0; t < ini_end; ++t) {
        std::vector<PartSchedule> step;
        if (joint) {
          step = joint_step(profiles, net, t, soc, ctx.settings.joint, &ctx.settings);
        } else {
          step.push_back(island_conservative_step(profiles[0], t, soc[0], ctx.settings.island));
        }
        for (std::size_t p = 0; p < P; ++p) {
          schedules[p].splice(step[p], t, 1);
          if (profiles[p].ess) soc[p] = step[p].soc[0];
        }
      }
      std::size_t cursor = ini_end;
      while (cursor < T) {
        const std::size_t end = policy.predict_end(cursor, true_end, mean_remaining);
        std::size_t exec_end = std::min(end, T);
        if (policy.update_every > 0) exec_end = std::min(exec_end, cursor + policy.update_every);
        std::vector<PartProfile> horizon;
        for (std::size_t p = 0; p < P; ++p) horizon.push_back(profile(zone.parts[p], cursor, end - cursor));
        std::vector<PartSchedule> plan;
        if (joint) {
          plan = joint_horizon(horizon, net, soc, ctx.settings.joint, &ctx.settings);
        } else {
          plan.push_back(island_horizon(horizon[0], soc[0], &ctx.settings));
        }
        const std::size_t n = exec_end - cursor;
        for (std::size_t p = 0; p < P; ++p) {
          schedules[p].splice(plan[p], cursor, n);
          if (profiles[p].ess) soc[p] = plan[p].soc[n - 1];
        }
        cursor = exec_end;
      }
      if (joint) {
        for (std::size_t t = 0; t < T; ++t) {
          std::vector<JoParticipant> hour;
          for (std::size_t p = 0; p < P; ++p) {
            const PartProfile& pr = profiles[p];
            JoParticipant j;
            j.microgrid = pr.microgrid;
            const double ex = schedules[p].exchange(t);
            j.buy = std::max(ex, 0.0);
            j.sell = std::max(-ex, 0.0);
            j.cost = pr.segment_cost;
            for (std::size_t r = 0; r < pr.segments(); ++r) {
              j.shed.push_back(schedules[p].shed[r][t]);
              j.demand.push_back(pr.demand(r, t));
            }
            hour.push_back(std::move(j));
          }
          const auto inc = run_ibgc_sber(hour, ctx.settings.joint.lambda_thr);
          for (std::size_t p = 0; p < P; ++p) {
            const std::size_t mg = hour[p].microgrid;
            for (std::size_t r = 0; r < inc.ibgc[p].size(); ++r) {
              record.ibgc[mg][r] += inc.ibgc[p][r] * dt;
              record.sber[mg][r] += inc.sber[p][r] * dt;
            }
          }
        }
      }
    }

    const bool exchange = zone.mode == OperationMode::no || zone.mode == OperationMode::jo;
    for (std::size_t p = 0; p < P; ++p) {
      check(profiles[p], schedules[p], exchange);
      record_shedding(schedules[p], zone.mode, dt, record);
      if (profiles[p].ess) {
        const std::size_t mg = zone.parts[p].microgrid;
        out.soc_end[mg] = last_soc(schedules[p]);
        out.carry_soc[mg] = zone.mode != OperationMode::no;
      }
    }
  }
  if (out.stats.island_windows + out.stats.joint_windows + out.stats.shutdown_windows == 0) out.stats.fast_windows = 1;
  return out;
}

namespace {

struct YearOutput {
  YearRecord record;
  InvariantReport invariants;
  SimulationStats stats;
};

YearOutput run_year(const EngineContext& ctx, std::size_t year, const std::vector<ContingencyWindow>& windows) {
  YearOutput y;
  y.record = YearRecord::empty(ctx.model, year);
  const std::size_t M = ctx.model.microgrids.size();
  std::size_t prev_end = SIZE_MAX;
  std::vector<double> carried(M, 0.0);
  std::vector<char> carry(M, 0);
  for (const auto& w : windows) {
    std::vector<double> soc = ctx.cache.soc_at(year * kHoursPerYear + w.start);
    if (prev_end == w.start) {
      for (std::size_t m = 0; m < M; ++m)
        if (carry[m]) soc[m] = carried[m];
    }
    const WindowOutcome o = run_window(ctx, w, year, soc, y.record, ctx.check_invariants ? &y.invariants : nullptr);
    y.stats.merge(o.stats);
    carried = o.soc_end;
    carry = o.carry_soc;
    prev_end = w.end;
  }
  return y;
}

}  // namespace

SimulationResult simulate(const CaseModel& model, const ExogenousSeries& series, const SimulationConfig& config) {
  if (config.years == 0) throw ValidationError("years must be at least 1");
  if (series.hours() == 0 || series.hours() % kHoursPerDay != 0)
    throw ValidationError("series length must be a positive multiple of 24");

  std::unique_ptr<NormalOperationCache> own;
  NormalOperationCache* cache = config.cache;
  if (!cache || !cache->compatible(model, series)) {
    own = std::make_unique<NormalOperationCache>(model, series);
    cache = own.get();
  }
  EngineContext ctx{model, series, CyberRoutes(model), *cache, {}, config.check_invariants};
  ctx.settings.joint = joint_config(model, series);
  ctx.settings.prediction = config.prediction;
  ctx.settings.island = config.island;
  ctx.settings.dumps = config.dumps;

  // sampling is sequential because residual times carry across years
  std::vector<std::vector<ContingencyWindow>> windows(config.years);
  {
    SamplerState state(model, config.seed);
    for (std::size_t y = 0; y < config.years; ++y) windows[y] = contingency_windows(build_timelines(model, y, state));
  }

  std::vector<YearOutput> years(config.years);
  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, config.years);
  if (threads == 1) {
    for (std::size_t y = 0; y < config.years; ++y) years[y] = run_year(ctx, y, windows[y]);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) {
      pool.emplace_back([&] {
        for (std::size_t y = next++; y < config.years; y = next++) {
          try {
            years[y] = run_year(ctx, y, windows[y]);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = config.years;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
  }

  SimulationResult res;
  for (auto& y : years) {
    res.invariants.merge(y.invariants);
    res.stats.merge(y.stats);
    res.ledger.add(std::move(y.record));
  }
  res.report = summarize(res.ledger, model);
  return res;
}

}  // namespace cpmmg
