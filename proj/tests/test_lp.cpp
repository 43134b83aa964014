#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "cpmmg/lp.hpp"
#include "support.hpp"

using namespace cpmmg;
using namespace cpmmg::testing;

TEST(Lp, LowerBoundActive) {
  LpProblem p;
  const auto x = p.add_variable(-kInf, kInf, 1.0);
  p.add_row({{x, 1.0}}, RowSense::ge, 3.0);
  const auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.x[0], 3.0, 1e-12);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
}

TEST(Lp, ContradictoryBoundsAreInfeasible) {
  LpProblem p;
  const auto x = p.add_variable(0.0, 1.0, 1.0);
  p.add_row({{x, 1.0}}, RowSense::ge, 2.0);
  EXPECT_EQ(solve_lp(p).status, LpStatus::infeasible);
}

TEST(Lp, Unbounded) {
  LpProblem p;
  const auto x = p.add_variable(0.0, kInf, -1.0);
  const auto y = p.add_variable(0.0, kInf, 0.0);
  p.add_row({{x, 1.0}, {y, -1.0}}, RowSense::le, 1.0);
  EXPECT_EQ(solve_lp(p).status, LpStatus::unbounded);
}

TEST(Lp, ClassicTwoVariable) {
  // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
  LpProblem p;
  const auto x = p.add_variable(0.0, kInf, -3.0);
  const auto y = p.add_variable(0.0, kInf, -5.0);
  p.add_row({{x, 1.0}}, RowSense::le, 4.0);
  p.add_row({{y, 2.0}}, RowSense::le, 12.0);
  p.add_row({{x, 3.0}, {y, 2.0}}, RowSense::le, 18.0);
  const auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, -36.0, 1e-9);
  EXPECT_NEAR(s.x[0], 2.0, 1e-9);
  EXPECT_NEAR(s.x[1], 6.0, 1e-9);
}

TEST(Lp, EqualityAndOffset) {
  LpProblem p;
  const auto a = p.add_variable(0.0, 5.0, 2.0);
  const auto b = p.add_variable(1.0, 5.0, 1.0);
  p.add_row({{a, 1.0}, {b, 1.0}}, RowSense::eq, 4.0);
  p.offset = 10.0;
  const auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, 14.0, 1e-9);  // b = 4
}

TEST(Lp, HighlyDegenerateTerminates) {
  // many redundant constraints through one vertex
  LpProblem p;
  const auto x = p.add_variable(0.0, kInf, -1.0);
  const auto y = p.add_variable(0.0, kInf, -1.0);
  for (int k = 1; k <= 40; ++k) p.add_row({{x, 1.0 * k}, {y, 1.0}}, RowSense::le, 1.0 * k);
  const auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, -1.0, 1e-9);
}

TEST(Lp, Deterministic) {
  std::mt19937_64 rng(3);
  const auto in = random_joint_instance(rng);
  ZoneLpOptions opt;
  opt.form = Formulation::p3b;
  opt.joint = in.config;
  const auto a = solve_zone_lp(in.parts, in.net, in.soc_start, opt);
  const auto b = solve_zone_lp(in.parts, in.net, in.soc_start, opt);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.line_flow, b.line_flow);
}

TEST(Lp, WriteLpFormat) {
  LpProblem p;
  const auto x = p.add_variable(0.0, 2.0, 1.5);
  p.name_variable(x, "gen");
  const auto r = p.add_row({{x, 1.0}}, RowSense::ge, 1.0);
  p.name_row(r, "need");
  std::ostringstream s;
  write_lp(p, s);
  const auto text = s.str();
  EXPECT_NE(text.find("Minimize"), std::string::npos);
  EXPECT_NE(text.find("need:"), std::string::npos);
  EXPECT_NE(text.find("gen"), std::string::npos);
  EXPECT_NE(text.find("Bounds"), std::string::npos);
  EXPECT_NE(text.find("End"), std::string::npos);
}

TEST(LpOracle, JointHorizonMatchesGridSearch) {
  std::mt19937_64 rng(1234);
  int with_flow = 0, with_shed = 0;
  for (int k = 0; k < 20; ++k) {
    const auto in = random_joint_instance(rng);
    ZoneLpOptions opt;
    opt.form = Formulation::p3b;
    opt.joint = in.config;
    const auto res = solve_zone_lp(in.parts, in.net, in.soc_start, opt);
    const double grid = grid_oracle(in);
    EXPECT_LE(res.objective, grid + 1e-9);
    EXPECT_NEAR(res.objective, grid, 1e-3 * std::max(1.0, grid));
    for (double f : res.line_flow[0]) with_flow += std::abs(f) > 1e-9;
    for (const auto& p : res.parts)
      for (std::size_t t = 0; t < p.hours; ++t) with_shed += p.total_shed(t) > 1e-9;
  }
  // the random instances actually exercise exchange and shedding
  EXPECT_GT(with_flow, 0);
  EXPECT_GT(with_shed, 0);
}
