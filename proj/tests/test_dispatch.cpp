#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "cpmmg/casemodel.hpp"
#include "cpmmg/cybernet.hpp"
#include "cpmmg/dispatch.hpp"
#include "cpmmg/engine.hpp"
#include "cpmmg/zoning.hpp"
#include "support.hpp"

using namespace cpmmg;
using namespace cpmmg::testing;

namespace {

double schedule_cost(const PartProfile& pr, const PartSchedule& s) {
  double c = 0.0;
  for (std::size_t t = 0; t < pr.hours; ++t) {
    for (std::size_t d = 0; d < pr.diesel_cap.size(); ++d) c += s.diesel[d][t] * pr.diesel_cost[d];
    if (pr.ess) c += s.charge[t] * pr.ess->charge_cost + s.discharge[t] * pr.ess->discharge_cost;
    for (std::size_t r = 0; r < pr.segments(); ++r) c += s.shed[r][t] * pr.segment_cost[r];
  }
  return c;
}

PartProfile with_ess(PartProfile p, double rate, double lo, double hi) {
  p.ess = unit_ess(rate, lo, hi);
  p.ess_available = true;
  return p;
}

}  // namespace

// ---------------------------------------------------------------- PS rule

TEST(PsAllocate, ProportionalExample) {
  const auto out = ps_allocate({0.8, 0.6}, 1.0, 0.0);
  EXPECT_NEAR(out[0], 0.8 / 1.4, 1e-12);
  EXPECT_NEAR(out[1], 0.6 / 1.4, 1e-12);
  EXPECT_NEAR(out[0] + out[1], 1.0, 1e-12);
  EXPECT_NEAR(out[0] / out[1], 4.0 / 3.0, 1e-12);
}

TEST(PsAllocate, UnderCapacityIsIdentity) {
  EXPECT_EQ(ps_allocate({0.3, 0.2}, 1.0, 0.0), (std::vector<double>{0.3, 0.2}));
}

TEST(PsAllocate, CounterflowRaisesTheEndowment) {
  EXPECT_NEAR(ps_allocate({1.5}, 1.0, 0.2)[0], 1.2, 1e-12);
}

TEST(PsAllocate, RandomInstances) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 200; ++k) {
    const auto in = random_congestion(rng);
    const auto out = ps_allocate(in.claims, in.capacity, in.counterflow);
    EXPECT_NEAR(std::accumulate(out.begin(), out.end(), 0.0), in.capacity + in.counterflow, 1e-9);
    for (std::size_t i = 1; i < out.size(); ++i)
      EXPECT_NEAR(out[i] / out[0], in.claims[i] / in.claims[0], 1e-9 * std::max(1.0, in.claims[i] / in.claims[0]));
  }
}

// ---------------------------------------------------------------- conservative island step

TEST(ConservativeStep, SurplusChargesAndCurtails) {
  auto p = with_ess(bare_profile(1, {1.0}, {0.5}), 0.2, 0.0, 2.0);
  p.wind[0] = 0.8;
  p.diesel_cap = {0.4};
  p.diesel_cost = {0.08};
  const auto s = island_conservative_step(p, 0, 0.5);
  EXPECT_EQ(s.diesel[0][0], 0.0);
  EXPECT_NEAR(s.charge[0], 0.2, 1e-12);
  EXPECT_NEAR(s.wind[0] + s.pv[0], 0.7, 1e-12);
  EXPECT_EQ(s.total_shed(0), 0.0);
}

TEST(ConservativeStep, DieselMeritOrderCoversDeficitAndCharging) {
  auto p = with_ess(bare_profile(1, {1.0}, {0.4}), 0.2, 0.0, 2.0);
  p.diesel_cap = {0.3, 0.4};
  p.diesel_cost = {0.09, 0.085};
  const auto s = island_conservative_step(p, 0, 0.5);
  EXPECT_NEAR(s.diesel[1][0], 0.4, 1e-12);  // cheaper unit first
  EXPECT_NEAR(s.diesel[0][0], 0.2, 1e-12);
  EXPECT_NEAR(s.diesel[0][0] + s.diesel[1][0], 0.6, 1e-12);
  EXPECT_NEAR(s.charge[0], 0.2, 1e-12);
}

TEST(ConservativeStep, DieselMaxSurplusCharges) {
  auto p = with_ess(bare_profile(1, {1.0}, {0.5}), 0.3, 0.0, 2.0);
  p.diesel_cap = {0.6};
  p.diesel_cost = {0.08};
  const auto s = island_conservative_step(p, 0, 0.5);
  EXPECT_NEAR(s.diesel[0][0], 0.6, 1e-12);
  EXPECT_NEAR(s.charge[0], 0.1, 1e-12);
}

TEST(ConservativeStep, DischargeCoversRemainder) {
  auto p = with_ess(bare_profile(1, {1.0}, {0.5}), 0.3, 0.0, 2.0);
  p.diesel_cap = {0.4};
  p.diesel_cost = {0.08};
  const auto s = island_conservative_step(p, 0, 0.5);
  EXPECT_NEAR(s.discharge[0], 0.1, 1e-12);
  EXPECT_NEAR(s.soc[0], 0.4, 1e-12);
  EXPECT_EQ(s.total_shed(0), 0.0);
}

TEST(ConservativeStep, ShedsCheapestFirst) {
  auto p = with_ess(bare_profile(1, {1.0, 5.0}, {0.1, 0.2}), 0.05, 0.0, 2.0);
  p.diesel_cap = {0.1};
  p.diesel_cost = {0.08};
  const auto s = island_conservative_step(p, 0, 0.5);
  EXPECT_NEAR(s.discharge[0], 0.05, 1e-12);
  EXPECT_NEAR(s.shed[0][0], 0.1, 1e-12);
  EXPECT_NEAR(s.shed[1][0], 0.05, 1e-12);
}

TEST(ConservativeStep, NeverShedsWhenSupplySuffices) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    auto p = with_ess(bare_profile(1, {0.5, 3.0}, {u(rng), u(rng)}), u(rng) * 0.5, 0.1, 1.0);
    p.wind[0] = u(rng);
    p.pv[0] = u(rng) * 0.5;
    p.diesel_cap = {u(rng) * 0.5};
    p.diesel_cost = {0.08};
    const double soc = 0.1 + 0.9 * u(rng);
    const auto s = island_conservative_step(p, 0, soc);
    const double dch = std::min(p.ess->max_discharge, soc - 0.1);
    const bool enough = p.wind[0] + p.pv[0] + p.diesel_cap[0] + dch >= p.total_demand(0) + 1e-12;
    if (enough) EXPECT_NEAR(s.total_shed(0), 0.0, 1e-12);
    InvariantReport rep;
    check_schedule(p, s, false, rep);
    EXPECT_EQ(rep.violations, 0u) << rep.first;
  }
}

// ---------------------------------------------------------------- normal operation

TEST(NormalDay, FlatPriceFollowsNetLoad) {
  auto p = with_ess(bare_profile(3, {1.0}, {0.6}), 0.2, 0.0, 1.0);
  p.wind = {0.1, 0.3, 0.0};
  const auto s = schedule_normal_day(p, 0.5);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_NEAR(s.exchange(t), 0.6 - p.wind[t], 1e-9);
    EXPECT_NEAR(s.charge[t] + s.discharge[t], 0.0, 1e-9);
    EXPECT_NEAR(s.total_shed(t), 0.0, 1e-9);
  }
  EXPECT_NEAR(s.soc.back(), 0.5, 1e-9);
}

TEST(NormalDay, UnavailableEssStaysFlat) {
  auto p = with_ess(bare_profile(4, {1.0}, {0.6}), 0.2, 0.0, 1.0);
  p.ess_available = false;
  p.price = {0.01, 0.2, 0.01, 0.2};
  const auto s = schedule_normal_day(p, 0.4);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(s.charge[t], 0.0);
    EXPECT_EQ(s.discharge[t], 0.0);
    EXPECT_NEAR(s.soc[t], 0.4, 1e-12);
  }
}

TEST(NormalDay, ArbitrageEndsAtStartingSoc) {
  auto p = with_ess(bare_profile(4, {1.0}, {0.6}), 0.2, 0.0, 1.0);
  p.price = {0.01, 0.2, 0.01, 0.2};
  const auto s = schedule_normal_day(p, 0.4);
  EXPECT_GT(s.charge[0], 0.1);
  EXPECT_NEAR(s.soc.back(), 0.4, 1e-9);
}

TEST(NetworkFlows, ChainRecursion) {
  // root part 0 holds the supply, part 1 hangs below it
  ZoneNetwork net = two_part_network(5.0);
  net.has_supply = true;
  net.supply_capacity = 10.0;
  const auto f = network_flows(net, {-0.5, 0.2});
  EXPECT_NEAR(f.line[0], 0.2, 1e-12);
  EXPECT_NEAR(f.supply, -0.3, 1e-12);
  const auto z = network_flows(net, {0.0, 0.0});
  EXPECT_EQ(z.line[0], 0.0);
  EXPECT_EQ(z.supply, 0.0);
}

TEST(DmsCoordinate, CongestedLineIsRelieved) {
  auto a = bare_profile(3, {1.0}, {0.2});
  auto b = bare_profile(3, {50.0}, {1.0});
  b.microgrid = 1;
  b.diesel_cap = {1.0};
  b.diesel_cost = {5.0};
  ZoneNetwork net = two_part_network(0.3);
  net.has_supply = true;
  net.supply_capacity = 10.0;
  const auto res = dms_coordinate({a, b}, net, {0.0, 0.0});
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_LE(std::abs(res.line_flow[0][t]), 0.3 + 1e-6);
    EXPECT_NEAR(res.parts[1].exchange(t), 0.3, 1e-6);
    EXPECT_NEAR(res.parts[1].diesel[0][t], 0.7, 1e-6);
    EXPECT_NEAR(res.parts[1].total_shed(t), 0.0, 1e-6);
  }
  EXPECT_GE(res.iterations, 1u);
}

TEST(DmsCoordinate, SupplyLimitSharedProportionally) {
  auto a = bare_profile(1, {50.0}, {1.2});
  auto b = bare_profile(1, {50.0}, {0.6});
  b.microgrid = 1;
  ZoneNetwork net = two_part_network(10.0);
  net.has_supply = true;
  net.supply_capacity = 0.9;
  const auto res = dms_coordinate({a, b}, net, {0.0, 0.0});
  EXPECT_NEAR(res.parts[0].exchange(0), 0.6, 1e-6);
  EXPECT_NEAR(res.parts[1].exchange(0), 0.3, 1e-6);
  EXPECT_NEAR(res.supply_flow[0], 0.9, 1e-6);
}

// ---------------------------------------------------------------- island horizon

TEST(IslandHorizon, GenerousDieselNoShedding) {
  auto p = bare_profile(4, {1.0, 3.0}, {0.3, 0.4});
  p.diesel_cap = {2.0};
  p.diesel_cost = {0.09};
  const auto s = island_horizon(p, 0.0);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(s.total_shed(t), 0.0, 1e-9);
}

TEST(IslandHorizon, NothingToServeShedsEverything) {
  const auto p = bare_profile(3, {1.0, 3.0}, {0.3, 0.4});
  const auto s = island_horizon(p, 0.0);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_NEAR(s.shed[0][t], 0.3, 1e-9);
    EXPECT_NEAR(s.shed[1][t], 0.4, 1e-9);
  }
}

TEST(IslandHorizon, MeritOrderShedding) {
  auto p = bare_profile(2, {1.0, 3.0, 9.0}, {0.2, 0.2, 0.2});
  p.diesel_cap = {0.3};
  p.diesel_cost = {0.09};
  const auto s = island_horizon(p, 0.0);
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_NEAR(s.shed[0][t], 0.2, 1e-9);
    EXPECT_NEAR(s.shed[1][t], 0.1, 1e-9);
    EXPECT_NEAR(s.shed[2][t], 0.0, 1e-9);
  }
}

TEST(IslandHorizon, TerminalSocIsFree) {
  const auto p = with_ess(bare_profile(3, {5.0}, {0.2}), 0.3, 0.1, 1.0);
  const auto s = island_horizon(p, 0.8);
  EXPECT_NEAR(s.soc.back(), 0.2, 1e-9);
  EXPECT_NEAR(s.total_shed(0) + s.total_shed(1) + s.total_shed(2), 0.0, 1e-9);
}

// ---------------------------------------------------------------- joint operation

TEST(JointStep, SurplusServesNeighbour) {
  auto a = bare_profile(1, {1.0}, {0.2});
  a.wind[0] = 1.0;
  auto b = bare_profile(1, {5.0}, {0.5});
  b.microgrid = 1;
  JointDispatchConfig cfg;
  const auto s = joint_step({a, b}, two_part_network(5.0), 0, {0.0, 0.0}, cfg);
  EXPECT_NEAR(s[1].total_shed(0), 0.0, 1e-9);
  EXPECT_NEAR(s[1].exchange(0), 0.5, 1e-9);
  EXPECT_NEAR(s[0].exchange(0), -0.5, 1e-9);
}

TEST(JointStep, NoWashTrade) {
  // both sides shed equal-cost load; moving energy would only pay the service price
  auto a = bare_profile(1, {2.0}, {0.5});
  a.wind[0] = 0.3;
  auto b = bare_profile(1, {2.0}, {0.5});
  b.microgrid = 1;
  JointDispatchConfig cfg;
  cfg.lambda_ser = 0.01;
  const auto s = joint_step({a, b}, two_part_network(5.0), 0, {0.0, 0.0}, cfg);
  EXPECT_NEAR(s[0].sell[0], 0.0, 1e-9);
  EXPECT_NEAR(s[1].buy[0], 0.0, 1e-9);
}

TEST(JointStep, CheapSurplusChargesStorage) {
  auto a = with_ess(bare_profile(1, {1.0}, {0.2}), 0.3, 0.0, 1.0);
  a.wind[0] = 1.0;
  auto b = bare_profile(1, {1.0}, {0.1});
  b.microgrid = 1;
  JointDispatchConfig cfg;
  cfg.lambda_ess = 0.05;
  const auto s = joint_step({a, b}, two_part_network(5.0), 0, {0.5, 0.0}, cfg);
  EXPECT_NEAR(s[0].charge[0], 0.3, 1e-9);
  EXPECT_NEAR(s[0].soc[0], 0.8, 1e-9);
}

TEST(JointHorizon, SymmetricPartsDoNotTrade) {
  auto a = with_ess(bare_profile(3, {1.0, 4.0}, {0.3, 0.3}), 0.2, 0.0, 0.6);
  a.wind = {0.9, 0.1, 0.4};
  a.diesel_cap = {0.2};
  a.diesel_cost = {0.09};
  auto b = a;
  b.microgrid = 1;
  const auto s = joint_horizon({a, b}, two_part_network(5.0), {0.3, 0.3}, {});
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_NEAR(s[0].exchange(t), 0.0, 1e-9);
    EXPECT_NEAR(s[0].total_shed(t), s[1].total_shed(t), 1e-9);
  }
}

TEST(JointHorizon, StorageShiftsSheddingToCheapLoad) {
  // hour 2 carries an expensive segment; the ESS saves energy for it
  auto a = with_ess(bare_profile(3, {1.0, 20.0}, {0.3, 0.3}), 0.3, 0.0, 0.3);
  a.load_frac = {1.0, 1.0, 1.0};
  a.demand_peak = {0.3, 0.3};
  a.upper_peak = a.demand_peak;
  a.wind = {0.6, 0.3, 0.3};
  auto b = bare_profile(3, {1.0}, {0.0});
  b.microgrid = 1;
  const auto s = joint_horizon({a, b}, two_part_network(0.0), {0.0, 0.0}, {});
  EXPECT_NEAR(s[0].shed[1][0] + s[0].shed[1][1] + s[0].shed[1][2], 0.0, 1e-9);
}

TEST(JointHorizon, ZeroCapacityDecomposesIntoIslands) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 10; ++k) {
    auto in = random_joint_instance(rng);
    in.net.edges[0].capacity = 0.0;
    const auto joint = joint_horizon(in.parts, in.net, in.soc_start, in.config);
    for (std::size_t p = 0; p < 2; ++p) {
      const auto alone = island_horizon(in.parts[p], in.soc_start[p]);
      EXPECT_NEAR(schedule_cost(in.parts[p], joint[p]), schedule_cost(in.parts[p], alone), 1e-7);
    }
  }
}

TEST(JointHorizon, SchedulesSatisfyInvariants) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 20; ++k) {
    const auto in = random_joint_instance(rng);
    const auto s = joint_horizon(in.parts, in.net, in.soc_start, in.config);
    for (std::size_t p = 0; p < 2; ++p) {
      InvariantReport rep;
      check_schedule(in.parts[p], s[p], true, rep);
      EXPECT_EQ(rep.violations, 0u) << rep.first;
    }
    for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(s[0].exchange(t) + s[1].exchange(t), 0.0, 1e-9);
  }
}

// ---------------------------------------------------------------- emergency shedding and checks

TEST(Shedding, UncontrollableLoadIsShedOnlyAsLastResort) {
  auto p = bare_profile(1, {1.0, 2.0}, {0.3, 0.3});
  p.upper_peak = {0.0, 0.3};  // segment 1 has no working load controller
  p.diesel_cap = {0.4};
  p.diesel_cost = {0.1};
  const auto s = island_horizon(p, 0.0);
  EXPECT_NEAR(s.shed[0][0], 0.0, 1e-9);
  EXPECT_NEAR(s.shed[1][0], 0.2, 1e-9);
}

TEST(Shedding, ForcedLoadIsAlwaysShed) {
  auto p = bare_profile(2, {1.0}, {0.5});
  p.forced_peak = {0.2};
  p.diesel_cap = {2.0};
  p.diesel_cost = {0.1};
  const auto s = island_horizon(p, 0.0);
  for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(s.shed[0][t], 0.2, 1e-9);
}

TEST(CheckSchedule, DetectsImbalance) {
  const auto p = bare_profile(1, {1.0}, {0.5});
  PartSchedule s(p);
  InvariantReport rep;
  check_schedule(p, s, false, rep);
  EXPECT_EQ(rep.violations, 1u);
  EXPECT_FALSE(rep.first.empty());
}

// ---------------------------------------------------------------- engine fast path

TEST(FastPath, MatchesCoordinatedLpOnBundledCase) {
  const auto m = parse_case(bundled_case());
  const auto series = build_series(m.series);
  const CyberRoutes routes(m);
  std::vector<char> up(m.components.size(), 1);
  up[m.find("tr7")] = 0;
  up[m.find("lc12")] = 0;
  const auto frame = availability_frame(m, routes, up);
  const auto fam = operation_zones(m, frame);
  ASSERT_EQ(fam.zones.size(), 1u);
  const auto& zone = fam.zones[0];
  for (std::size_t start : {0u, 2000u, 5000u}) {
    std::vector<PartProfile> profiles;
    std::vector<double> soc;
    for (const auto& part : zone.parts) {
      profiles.push_back(make_profile(m, part, frame.microgrids[part.microgrid], series, start, 24));
      soc.push_back(reference_soc(m, part.microgrid));
    }
    const auto net = zone_network(m, zone);
    ASSERT_TRUE(no_zone_fast_path(profiles, net));
    const auto lp = dms_coordinate(profiles, net, soc);
    for (std::size_t p = 0; p < profiles.size(); ++p)
      for (std::size_t r = 0; r < profiles[p].segments(); ++r)
        for (std::size_t t = 0; t < 24; ++t) EXPECT_NEAR(lp.parts[p].shed[r][t], profiles[p].forced(r, t), 1e-7);
  }
}

TEST(FastPath, RejectsTightLines) {
  auto a = bare_profile(2, {1.0}, {0.5});
  auto b = bare_profile(2, {1.0}, {0.5});
  ZoneNetwork net = two_part_network(0.2);
  net.has_supply = true;
  net.supply_capacity = 10.0;
  EXPECT_FALSE(no_zone_fast_path({a, b}, net));
  net.edges[0].capacity = 5.0;
  EXPECT_TRUE(no_zone_fast_path({a, b}, net));
  a.price = {2.0, 2.0};  // buying dearer than shedding
  EXPECT_FALSE(no_zone_fast_path({a, b}, net));
}
