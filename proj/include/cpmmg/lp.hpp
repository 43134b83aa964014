#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace cpmmg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class RowSense : std::uint8_t { le, eq, ge };

struct LpTerm {
  std::size_t var = 0;
  double coef = 0.0;
};

struct LpRow {
  std::vector<LpTerm> terms;
  RowSense sense = RowSense::eq;
  double rhs = 0.0;
};

/// min cost·x + offset  s.t.  rows, lower <= x <= upper.
/// Names are optional and only used by write_lp.
struct LpProblem {
  std::vector<double> cost;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;
  double offset = 0.0;
  std::vector<std::string> var_names;
  std::vector<std::string> row_names;

  std::size_t add_variable(double lo, double hi, double c) {
    cost.push_back(c);
    lower.push_back(lo);
    upper.push_back(hi);
    return cost.size() - 1;
  }
  std::size_t add_row(std::vector<LpTerm> terms, RowSense sense, double rhs) {
    rows.push_back({std::move(terms), sense, rhs});
    return rows.size() - 1;
  }
  void name_variable(std::size_t var, std::string name);
  void name_row(std::size_t row, std::string name);
  std::size_t variables() const { return cost.size(); }
};

enum class LpStatus : std::uint8_t { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(LpStatus status);

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  std::vector<double> x;  // empty unless optimal
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Two-phase bounded-variable primal simplex on a dense tableau. Pricing is
/// Dantzig's rule; a long run of degenerate pivots switches to Bland's rule
/// until the objective moves again, so the pivot sequence is deterministic
/// and cannot cycle.
LpSolution solve_lp(const LpProblem& problem);

/// CPLEX LP text format.
void write_lp(const LpProblem& problem, std::ostream& out);

}  // namespace cpmmg
