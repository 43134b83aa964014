#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <boost/multiprecision/cpp_int.hpp>

#include "cpmmg/adequacy.hpp"
#include "cpmmg/casemodel.hpp"
#include "cpmmg/dispatch.hpp"

namespace cpmmg::testing {

inline std::filesystem::path data_dir() { return CPMMG_DATA_DIR; }
inline std::filesystem::path bundled_case() { return data_dir() / "rbts6f4.json"; }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("cpmmg_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// One microgrid without DERs behind a single upstream component, flat
/// 1 MW load. Writes case.json and flat.csv into `dir`.
inline std::filesystem::path write_single_mg_case(const std::filesystem::path& dir, double lambda, double mu) {
  {
    std::ofstream f(dir / "flat.csv");
    f << "hour,wind_cf,pv_cf,load_frac,price\n";
    for (int h = 0; h < 8760; ++h) f << h << ",0,0,1,0.05\n";
  }
  auto comp = [](const std::string& id, const std::string& kind, double l = 0.0, double m = 0.0) {
    std::ostringstream s;
    s.precision(17);
    s << R"({"id":")" << id << R"(","kind":")" << kind << R"(","failure_rate":)" << l << R"(,"repair_rate":)" << m
      << "}";
    return s.str();
  };
  std::ostringstream j;
  j << R"({"name":"single","components":[)" << comp("upstream", "upstream", lambda, mu) << ','
    << comp("dms", "dms") << ',' << comp("mgcc1", "mgcc") << ',' << comp("ln1", "line") << ','
    << comp("tr1", "transformer") << ',' << comp("lc1", "lc") << ',' << comp("cbc_sub", "cbc") << ','
    << comp("lk_dms_1", "cyber-link") << ',' << comp("lk_lc1", "cyber-link") << ','
    << comp("lk_cbc_sub", "cyber-link") << R"(],
  "sections":[{"id":"s1","microgrid":1,"elements":["ln1"]}],
  "microgrids":[{"tag":1,"mgcc":"mgcc1","diesels":[],"load_points":[{"id":"lp1","bus":1,"peak_load":1.0,
     "segments":[[1.0,1.0]],"transformer":"tr1","lc":"lc1","section":"s1"}]}],
  "switches":[{"id":"sub","role":"substation","cbc":"cbc_sub","controllers":["dms"],"between":["substation","s1"]}],
  "lines":[],
  "substation":{"capacity":10.0,"upstream":"upstream","dms":"dms","switch":"sub"},
  "cyber_edges":[{"id":"lk_dms_1","a":"dms","b":"mgcc1"},{"id":"lk_lc1","a":"mgcc1","b":"lc1"},
                 {"id":"lk_cbc_sub","a":"dms","b":"cbc_sub"}],
  "series":{"source":"csv","path":"flat.csv"}})";
  const auto path = dir / "case.json";
  std::ofstream(path) << j.str();
  return path;
}

/// Part with flat load fraction 1, no DERs and fully controllable segments.
inline PartProfile bare_profile(std::size_t hours, std::vector<double> costs, std::vector<double> demand) {
  PartProfile p;
  p.hours = hours;
  p.wind.assign(hours, 0.0);
  p.pv.assign(hours, 0.0);
  p.load_frac.assign(hours, 1.0);
  p.price.assign(hours, 0.05);
  p.segment_cost = std::move(costs);
  p.demand_peak = std::move(demand);
  p.forced_peak.assign(p.demand_peak.size(), 0.0);
  p.upper_peak = p.demand_peak;
  return p;
}

inline EssSpec unit_ess(double rate, double soc_min, double soc_max, double cost = 0.002) {
  EssSpec e;
  e.max_charge = e.max_discharge = rate;
  e.soc_min = soc_min;
  e.soc_max = soc_max;
  e.charge_cost = e.discharge_cost = cost;
  return e;
}

inline ZoneNetwork two_part_network(double capacity) {
  ZoneNetwork net;
  net.parts = 2;
  net.root = 0;
  net.edges.push_back({0, 0, 1, capacity, {1}});
  return net;
}

// ------------------------------------------------------------ P3(B) oracle

inline constexpr double kGrid = 0.05;

inline double snap(double x) { return std::round(x / kGrid) * kGrid; }

/// Random 2-part, 3-hour joint instance with every quantity on the grid
/// and unit ESS efficiencies.
struct JointInstance {
  std::vector<PartProfile> parts;
  ZoneNetwork net;
  std::vector<double> soc_start;
  JointDispatchConfig config;
};

inline JointInstance random_joint_instance(std::mt19937_64& rng) {
  auto grid = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng) * kGrid; };
  auto coin = [&] { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; };
  JointInstance in;
  const std::size_t T = 3;
  for (int p = 0; p < 2; ++p) {
    const double c1 = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    const double c2 = c1 + std::uniform_real_distribution<double>(0.5, 15.0)(rng);
    PartProfile pr = bare_profile(T, {c1, c2}, {grid(1, 8), grid(1, 8)});
    pr.microgrid = static_cast<std::size_t>(p);
    pr.load_frac.clear();
    for (std::size_t t = 0; t < T; ++t) {
      pr.load_frac.push_back(1.0);
      pr.wind[t] = grid(0, 10);
      pr.pv[t] = grid(0, 6);
    }
    for (int d = 0, n = std::uniform_int_distribution<int>(0, 2)(rng); d < n; ++d) {
      pr.diesel_cap.push_back(grid(1, 8));
      pr.diesel_cost.push_back(std::uniform_real_distribution<double>(0.05, 3.0)(rng));
    }
    if (coin()) {
      const double lo = grid(0, 2);
      pr.ess = unit_ess(grid(1, 4), lo, lo + grid(2, 8), std::uniform_real_distribution<double>(0.0, 0.01)(rng));
      pr.ess_available = true;
      const int steps = static_cast<int>(std::lround((pr.ess->soc_max - lo) / kGrid));
      in.soc_start.push_back(lo + std::uniform_int_distribution<int>(0, steps)(rng) * kGrid);
    } else {
      in.soc_start.push_back(0.0);
    }
    in.parts.push_back(std::move(pr));
  }
  in.net = two_part_network(grid(0, 10));
  in.config.lambda_ser = std::uniform_real_distribution<double>(0.001, 0.1)(rng);
  return in;
}

/// Cheapest cover of `need` MW from free renewables, diesel units and
/// shedding in merit order; +inf when it cannot be covered.
inline double merit_cost(const PartProfile& p, std::size_t t, double need) {
  if (need < -1e-9) {
    return std::numeric_limits<double>::infinity();
  }
  need -= p.wind[t] + p.pv[t];
  if (need <= 1e-12) return 0.0;
  std::vector<std::pair<double, double>> offers;
  for (std::size_t d = 0; d < p.diesel_cap.size(); ++d) offers.emplace_back(p.diesel_cost[d], p.diesel_cap[d]);
  for (std::size_t r = 0; r < p.segments(); ++r) offers.emplace_back(p.segment_cost[r], p.demand(r, t));
  std::sort(offers.begin(), offers.end());
  double cost = 0.0;
  for (auto [c, q] : offers) {
    const double x = std::min(q, need);
    cost += c * x;
    need -= x;
    if (need <= 1e-12) return cost;
  }
  return std::numeric_limits<double>::infinity();
}

/// Exhaustive dynamic program over SOC levels and line flows on the grid.
inline double grid_oracle(const JointInstance& in) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t T = in.parts[0].hours;
  auto levels = [&](std::size_t p) {
    std::vector<double> v;
    const auto& e = in.parts[p].ess;
    if (!e) return std::vector<double>{in.soc_start[p]};
    for (double s = e->soc_min; s <= e->soc_max + 1e-9; s += kGrid) v.push_back(snap(s));
    return v;
  };
  const auto L0 = levels(0), L1 = levels(1);
  const double cap = in.net.edges[0].capacity;
  std::vector<double> flows;
  for (double f = -cap; f <= cap + 1e-9; f += kGrid) flows.push_back(snap(f));

  auto ess_cost = [&](std::size_t p, double a) {
    const auto& e = in.parts[p].ess;
    if (!e) return std::abs(a) < 1e-9 ? 0.0 : inf;
    if (a > e->max_charge + 1e-9 || -a > e->max_discharge + 1e-9) return inf;
    return a > 0 ? e->charge_cost * a : -e->discharge_cost * a;
  };
  auto index_of = [](const std::vector<double>& v, double x) {
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::abs(v[i] - x) < 1e-9) return i;
    return v.size();
  };
  // value[i][j]: cheapest cost of reaching levels (L0[i], L1[j])
  std::vector<std::vector<double>> value(L0.size(), std::vector<double>(L1.size(), inf));
  value[index_of(L0, snap(in.soc_start[0]))][index_of(L1, snap(in.soc_start[1]))] = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    // best hour cost of each part for each (charge step, import) pair
    std::vector<std::vector<double>> next(L0.size(), std::vector<double>(L1.size(), inf));
    for (std::size_t i = 0; i < L0.size(); ++i) {
      for (std::size_t j = 0; j < L1.size(); ++j) {
        if (value[i][j] == inf) continue;
        for (std::size_t i2 = 0; i2 < L0.size(); ++i2) {
          const double a0 = L0[i2] - L0[i];
          const double e0 = ess_cost(0, a0);
          if (e0 == inf) continue;
          for (std::size_t j2 = 0; j2 < L1.size(); ++j2) {
            const double a1 = L1[j2] - L1[j];
            const double e1 = ess_cost(1, a1);
            if (e1 == inf) continue;
            double best = inf;
            for (double f : flows) {
              // f > 0: part 1 imports f from part 0
              const double c0 = merit_cost(in.parts[0], t, in.parts[0].total_demand(t) + a0 + f);
              if (c0 == inf) continue;
              const double c1 = merit_cost(in.parts[1], t, in.parts[1].total_demand(t) + a1 - f);
              if (c1 == inf) continue;
              best = std::min(best, c0 + c1 + in.config.lambda_ser * std::abs(f));
            }
            if (best == inf) continue;
            next[i2][j2] = std::min(next[i2][j2], value[i][j] + e0 + e1 + best);
          }
        }
      }
    }
    value = std::move(next);
  }
  double out = inf;
  for (const auto& row : value)
    for (double v : row) out = std::min(out, v);
  return out;
}

// ------------------------------------------------------------ attribution oracle

using Rational = boost::multiprecision::cpp_rational;

/// Dyadic values (k / 64) so the double implementation is exact.
inline std::vector<JoParticipant> random_jo_hour(std::mt19937_64& rng, std::size_t segments) {
  auto dy = [&](int hi) { return std::uniform_int_distribution<int>(0, hi)(rng) / 64.0; };
  const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 5)(rng);
  std::vector<double> costs;
  double c = 0.0;
  for (std::size_t r = 0; r < segments; ++r) {
    c += std::uniform_int_distribution<int>(1, 8)(rng) / 4.0;
    costs.push_back(c);
  }
  std::vector<JoParticipant> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = out[i];
    p.microgrid = i;
    p.cost = costs;
    const int role = std::uniform_int_distribution<int>(0, 2)(rng);
    if (role == 0) p.sell = dy(128);
    if (role == 1) p.buy = dy(128);
    for (std::size_t r = 0; r < segments; ++r) {
      p.demand.push_back(dy(96));
      p.shed.push_back(std::uniform_int_distribution<int>(0, 2)(rng) == 0 ? 0.0 : std::min(p.demand[r], dy(96)));
    }
  }
  return out;
}

struct RationalIncrement {
  std::vector<std::vector<Rational>> ibgc, sber;
};

/// The attribution loops in exact arithmetic.
inline RationalIncrement attribution_rational(const std::vector<JoParticipant>& ps, double lambda_thr) {
  RationalIncrement out;
  const Rational zero(0);
  const Rational thr(lambda_thr);
  for (const auto& p : ps) {
    out.ibgc.emplace_back(p.shed.size(), zero);
    out.sber.emplace_back(p.shed.size(), zero);
  }
  bool expensive = false;
  for (std::size_t m = 0; m < ps.size(); ++m) {
    const Rational sold(ps[m].sell);
    if (sold <= zero) continue;
    Rational total_shed = zero;
    for (double s : ps[m].shed) total_shed += Rational(s);
    if (total_shed <= zero) continue;
    for (std::size_t r = 0; r < ps[m].shed.size(); ++r)
      if (Rational(ps[m].cost[r]) >= thr && Rational(ps[m].shed[r]) > zero) expensive = true;
    Rational d1 = sold;
    for (std::size_t r = ps[m].shed.size(); r > 0; --r) {
      const Rational ls(ps[m].shed[r - 1]);
      const Rational x = ls < d1 ? ls : d1;
      out.ibgc[m][r - 1] = x;
      d1 -= x;
    }
  }
  if (!expensive) return out;
  for (std::size_t m = 0; m < ps.size(); ++m) {
    Rational d2(ps[m].buy);
    if (d2 <= zero) continue;
    for (std::size_t k = 0; k < ps[m].shed.size(); ++k) {
      const Rational served = Rational(ps[m].demand[k]) - Rational(ps[m].shed[k]);
      const Rational x = served < d2 ? served : d2;
      out.sber[m][k] = x;
      d2 -= x;
    }
  }
  return out;
}

inline bool equals_exactly(const IbgcSberIncrement& got, const RationalIncrement& want) {
  if (got.ibgc.size() != want.ibgc.size()) return false;
  for (std::size_t m = 0; m < got.ibgc.size(); ++m) {
    for (std::size_t r = 0; r < got.ibgc[m].size(); ++r) {
      if (Rational(got.ibgc[m][r]) != want.ibgc[m][r]) return false;
      if (Rational(got.sber[m][r]) != want.sber[m][r]) return false;
    }
  }
  return true;
}

// ------------------------------------------------------------ PS oracle

struct PsInstance {
  std::vector<double> claims;
  double capacity = 0.0;
  double counterflow = 0.0;
};

inline PsInstance random_congestion(std::mt19937_64& rng) {
  PsInstance in;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
  for (std::size_t i = 0; i < n; ++i) in.claims.push_back(std::uniform_real_distribution<double>(0.01, 3.0)(rng));
  double sum = 0.0;
  for (double c : in.claims) sum += c;
  in.counterflow = std::uniform_real_distribution<double>(0.0, 0.5)(rng) * sum;
  // endowment strictly below the claims, so the rule must bind
  in.capacity = std::uniform_real_distribution<double>(0.05, 0.95)(rng) * (sum - in.counterflow);
  return in;
}

}  // namespace cpmmg::testing
