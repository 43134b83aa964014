#include "cpmmg/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>

namespace cpmmg {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kOptTol = 1e-9;
constexpr double kFeasTol = 1e-9;
constexpr std::size_t kDegenerateRunBeforeBland = 50;

enum class VarState : std::uint8_t { basic, at_lower, at_upper, free_zero };

/// Dense simplex tableau over structural, slack and artificial columns.
class Simplex {
 public:
  explicit Simplex(const LpProblem& p) : p_(p), m_(p.rows.size()), n_(p.variables()) { build(); }

  LpSolution run() {
    LpSolution out;
    // phase 1: minimise the sum of artificials
    if (!artificials_.empty()) {
      std::vector<double> c1(cols_, 0.0);
      for (std::size_t a : artificials_) c1[a] = 1.0;
      price_from(c1);
      const LpStatus s = iterate(out.iterations);
      if (s == LpStatus::iteration_limit) {
        out.status = s;
        return out;
      }
      double infeas = 0.0;
      for (std::size_t a : artificials_) infeas += value(a);
      if (infeas > kFeasTol * std::max(1.0, rhs_scale_) * 10.0) {
        out.status = LpStatus::infeasible;
        return out;
      }
      for (std::size_t a : artificials_) {
        lo_[a] = 0.0;
        hi_[a] = 0.0;
        if (state_[a] != VarState::basic) {
          state_[a] = VarState::at_lower;
          x_[a] = 0.0;
        }
      }
    }
    std::vector<double> c2(cols_, 0.0);
    std::copy(p_.cost.begin(), p_.cost.end(), c2.begin());
    price_from(c2);
    const LpStatus s = iterate(out.iterations);
    if (s != LpStatus::optimal) {
      out.status = s;
      return out;
    }
    refine();
    out.status = LpStatus::optimal;
    out.x.resize(n_);
    double obj = p_.offset;
    for (std::size_t j = 0; j < n_; ++j) {
      double v = value(j);
      v = std::clamp(v, p_.lower[j], p_.upper[j]);
      out.x[j] = v;
      obj += p_.cost[j] * v;
    }
    out.objective = obj;
    return out;
  }

 private:
  double value(std::size_t j) const { return state_[j] == VarState::basic ? xb_[row_of_[j]] : x_[j]; }

  void build() {
    // count columns
    std::size_t slacks = 0;
    for (const auto& r : p_.rows) slacks += r.sense != RowSense::eq;
    const std::size_t max_cols = n_ + slacks + m_;
    full_ = Matrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(max_cols));
    lo_.assign(p_.lower.begin(), p_.lower.end());
    hi_.assign(p_.upper.begin(), p_.upper.end());
    b_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (const auto& t : p_.rows[i].terms) full_(i, t.var) += t.coef;
      b_[i] = p_.rows[i].rhs;
      rhs_scale_ = std::max(rhs_scale_, std::abs(b_[i]));
    }
    // initial nonbasic point
    x_.assign(max_cols, 0.0);
    state_.assign(max_cols, VarState::at_lower);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
        state_[j] = VarState::at_lower;
      } else if (std::isfinite(hi_[j])) {
        x_[j] = hi_[j];
        state_[j] = VarState::at_upper;
      } else {
        x_[j] = 0.0;
        state_[j] = VarState::free_zero;
      }
    }
    std::vector<double> residual(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      double r = b_[i];
      for (const auto& t : p_.rows[i].terms) r -= t.coef * x_[t.var];
      residual[i] = r;
    }
    cols_ = n_;
    basis_.assign(m_, 0);
    xb_.assign(m_, 0.0);
    std::vector<double> basic_coef(m_, 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const RowSense sense = p_.rows[i].sense;
      std::size_t col = cols_;
      double coef = 0.0;
      bool slack_basic = false;
      if (sense != RowSense::eq) {
        coef = sense == RowSense::le ? 1.0 : -1.0;
        full_(i, col) = coef;
        lo_.push_back(0.0);
        hi_.push_back(kInf);
        ++cols_;
        slack_basic = residual[i] * coef >= 0.0;
        if (slack_basic) {
          basis_[i] = col;
          xb_[i] = residual[i] / coef;
          basic_coef[i] = coef;
        } else {
          x_[col] = 0.0;
          state_[col] = VarState::at_lower;
        }
      }
      if (!slack_basic) {
        const std::size_t a = cols_++;
        const double s = residual[i] >= 0.0 ? 1.0 : -1.0;
        full_(i, a) = s;
        lo_.push_back(0.0);
        hi_.push_back(kInf);
        artificials_.push_back(a);
        basis_[i] = a;
        xb_[i] = std::abs(residual[i]);
        basic_coef[i] = s;
      }
    }
    full_.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(cols_));
    x_.resize(cols_);
    state_.resize(cols_);
    row_of_.assign(cols_, 0);
    for (std::size_t i = 0; i < m_; ++i) {
      state_[basis_[i]] = VarState::basic;
      row_of_[basis_[i]] = i;
    }
    // basis is a signed identity, so the tableau is the scaled constraint matrix
    tab_ = full_;
    for (std::size_t i = 0; i < m_; ++i) {
      if (basic_coef[i] != 1.0) tab_.row(static_cast<Eigen::Index>(i)) /= basic_coef[i];
    }
  }

  void price_from(const std::vector<double>& c) {
    d_.assign(c.begin(), c.end());
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      const auto row = tab_.row(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < cols_; ++j) d_[j] -= cb * row(static_cast<Eigen::Index>(j));
    }
    for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  /// Chooses the entering column; returns cols_ when optimal.
  std::size_t choose_entering(bool bland, int& dir) const {
    std::size_t best = cols_;
    double best_score = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) {
      const VarState s = state_[j];
      if (s == VarState::basic || lo_[j] == hi_[j]) continue;
      const double dj = d_[j];
      int candidate = 0;
      if ((s == VarState::at_lower || s == VarState::free_zero) && dj < -kOptTol) candidate = 1;
      else if ((s == VarState::at_upper || s == VarState::free_zero) && dj > kOptTol) candidate = -1;
      if (candidate == 0) continue;
      if (bland) {
        dir = candidate;
        return j;
      }
      const double score = std::abs(dj);
      if (score > best_score) {
        best_score = score;
        best = j;
        dir = candidate;
      }
    }
    return best;
  }

  LpStatus iterate(std::size_t& iterations) {
    const std::size_t limit = 20000 + 50 * (m_ + cols_);
    bool bland = false;
    std::size_t degenerate_run = 0;
    for (;;) {
      if (++iterations > limit) return LpStatus::iteration_limit;
      int dir = 0;
      const std::size_t q = choose_entering(bland, dir);
      if (q == cols_) return LpStatus::optimal;

      // ratio test
      double theta = hi_[q] - lo_[q];  // bound flip
      std::size_t leave_row = m_;
      double best_alpha = 0.0;
      std::size_t best_index = cols_;
      bool leave_to_upper = false;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = tab_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
        if (std::abs(alpha) <= kPivotTol) continue;
        const std::size_t k = basis_[i];
        const double rate = -dir * alpha;  // d x_k / d theta
        double limit_i;
        if (rate < 0.0) {
          if (!std::isfinite(lo_[k])) continue;
          limit_i = (xb_[i] - lo_[k]) / -rate;
        } else {
          if (!std::isfinite(hi_[k])) continue;
          limit_i = (hi_[k] - xb_[i]) / rate;
        }
        limit_i = std::max(limit_i, 0.0);
        bool take = limit_i < theta - 1e-12;
        if (!take && leave_row != m_ && limit_i <= theta + 1e-12) {
          take = bland ? k < best_index : std::abs(alpha) > best_alpha;
        }
        if (take) {
          theta = limit_i;
          leave_row = i;
          best_alpha = std::abs(alpha);
          best_index = k;
          leave_to_upper = rate > 0.0;
        }
      }
      if (!std::isfinite(theta)) return LpStatus::unbounded;

      if (theta < 1e-12) {
        if (++degenerate_run > kDegenerateRunBeforeBland) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }

      // move along the edge
      const double step = dir * theta;
      if (step != 0.0) {
        for (std::size_t i = 0; i < m_; ++i) {
          xb_[i] -= step * tab_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(q));
        }
      }
      if (leave_row == m_) {
        // bound flip
        if (dir > 0) {
          x_[q] = hi_[q];
          state_[q] = VarState::at_upper;
        } else {
          x_[q] = lo_[q];
          state_[q] = VarState::at_lower;
        }
        continue;
      }
      const double entering_value = x_[q] + step;
      pivot(leave_row, q, entering_value, leave_to_upper);
    }
  }

  void pivot(std::size_t r, std::size_t q, double entering_value, bool leave_to_upper) {
    const auto R = static_cast<Eigen::Index>(r);
    const std::size_t k = basis_[r];
    const double alpha_rq = tab_(R, static_cast<Eigen::Index>(q));
    if (leave_to_upper) {
      x_[k] = hi_[k];
      state_[k] = VarState::at_upper;
    } else {
      x_[k] = lo_[k];
      state_[k] = VarState::at_lower;
    }

    // the pivot row is usually sparse, so only its nonzeros are propagated
    double* prow = tab_.row(R).data();
    nz_.clear();
    const double inv = 1.0 / alpha_rq;
    for (std::size_t j = 0; j < cols_; ++j) {
      if (prow[j] == 0.0) continue;
      prow[j] *= inv;
      nz_.push_back(j);
    }
    prow[q] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = tab_.row(static_cast<Eigen::Index>(i)).data();
      const double f = row[q];
      if (f == 0.0) continue;
      for (std::size_t j : nz_) row[j] -= f * prow[j];
      row[q] = 0.0;
    }
    const double dq = d_[q];
    if (dq != 0.0) {
      for (std::size_t j : nz_) d_[j] -= dq * prow[j];
      d_[q] = 0.0;
    }
    basis_[r] = q;
    row_of_[q] = r;
    state_[q] = VarState::basic;
    xb_[r] = entering_value;
  }

  /// Recomputes basic values from the original columns with an LU solve.
  void refine() {
    if (m_ == 0) return;
    Eigen::MatrixXd B(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(m_));
    for (std::size_t i = 0; i < m_; ++i) rhs(static_cast<Eigen::Index>(i)) = b_[i];
    for (std::size_t j = 0; j < cols_; ++j) {
      if (state_[j] == VarState::basic || x_[j] == 0.0) continue;
      rhs -= full_.col(static_cast<Eigen::Index>(j)) * x_[j];
    }
    for (std::size_t i = 0; i < m_; ++i) B.col(static_cast<Eigen::Index>(i)) = full_.col(static_cast<Eigen::Index>(basis_[i]));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    const Eigen::VectorXd xb = lu.solve(rhs);
    if (!xb.allFinite()) return;
    // keep the tableau values if the factorisation is poor
    if ((B * xb - rhs).cwiseAbs().maxCoeff() > 1e-7 * std::max(1.0, rhs_scale_)) return;
    for (std::size_t i = 0; i < m_; ++i) xb_[i] = xb(static_cast<Eigen::Index>(i));
  }

  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  const LpProblem& p_;
  std::vector<std::size_t> nz_;
  std::size_t m_;
  std::size_t n_;
  std::size_t cols_ = 0;
  Matrix full_;
  Matrix tab_;
  std::vector<double> lo_, hi_, b_, x_, xb_, d_;
  std::vector<VarState> state_;
  std::vector<std::size_t> basis_, row_of_, artificials_;
  double rhs_scale_ = 0.0;
};

std::string var_name(const LpProblem& p, std::size_t j) {
  if (j < p.var_names.size() && !p.var_names[j].empty()) return p.var_names[j];
  return "x" + std::to_string(j);
}

void write_number(std::ostream& out, double v) {
  if (v == kInf) out << "+inf";
  else if (v == -kInf) out << "-inf";
  else out << v;
}

}  // namespace

void LpProblem::name_variable(std::size_t var, std::string name) {
  if (var_names.size() <= var) var_names.resize(var + 1);
  var_names[var] = std::move(name);
}

void LpProblem::name_row(std::size_t row, std::string name) {
  if (row_names.size() <= row) row_names.resize(row + 1);
  row_names[row] = std::move(name);
}

std::string_view to_string(LpStatus status) {
  switch (status) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::iteration_limit: return "iteration_limit";
  }
  return "?";
}

LpSolution solve_lp(const LpProblem& problem) {
  Simplex simplex(problem);
  return simplex.run();
}

void write_lp(const LpProblem& p, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "\\ constant term " << p.offset << "\nMinimize\n obj:";
  bool any = false;
  for (std::size_t j = 0; j < p.variables(); ++j) {
    if (p.cost[j] == 0.0) continue;
    out << (p.cost[j] < 0 ? " - " : " + ") << std::abs(p.cost[j]) << ' ' << var_name(p, j);
    any = true;
  }
  if (!any) out << " 0 " << var_name(p, 0);
  out << "\nSubject To\n";
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    const auto& r = p.rows[i];
    const std::string name = i < p.row_names.size() && !p.row_names[i].empty() ? p.row_names[i] : "c" + std::to_string(i);
    out << ' ' << name << ':';
    if (r.terms.empty()) out << " 0 " << var_name(p, 0);
    for (const auto& t : r.terms) out << (t.coef < 0 ? " - " : " + ") << std::abs(t.coef) << ' ' << var_name(p, t.var);
    out << (r.sense == RowSense::le ? " <= " : r.sense == RowSense::ge ? " >= " : " = ") << r.rhs << '\n';
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < p.variables(); ++j) {
    const double lo = p.lower[j];
    const double hi = p.upper[j];
    if (lo == -kInf && hi == kInf) {
      out << ' ' << var_name(p, j) << " free\n";
    } else if (lo == hi) {
      out << ' ' << var_name(p, j) << " = " << lo << '\n';
    } else {
      out << ' ';
      write_number(out, lo);
      out << " <= " << var_name(p, j) << " <= ";
      write_number(out, hi);
      out << '\n';
    }
  }
  out << "End\n";
  out.precision(old_precision);
}

}  // namespace cpmmg
