#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "af/core.hpp"

namespace af {

enum class Relation { le, eq, ge };

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

/// Dense LP in the form  min c.x  s.t.  A x (rel) b,  lower <= x <= upper.
/// Lower bounds must be finite; upper bounds may be +inf.
struct DenseLp {
  Matrix<double> a;
  std::vector<Relation> rel;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t rows() const { return a.rows(); }
  std::size_t cols() const { return a.cols(); }
};

/// Bounded-variable simplex on an explicit dense tableau. Two-phase primal
/// with Dantzig pricing (Bland's rule after a run of degenerate steps), and a
/// dual simplex for re-optimising after bound changes, which is what branch
/// and bound needs. Copyable so a child node can start from its parent.
class LpTableau {
 public:
  static constexpr double kPrimalTol = 1e-9;
  static constexpr double kDualTol = 1e-9;
  static constexpr double kPivotTol = 1e-9;

  explicit LpTableau(const DenseLp& lp) : m_(lp.rows()), n_(lp.cols()) {
    if (lp.rel.size() != m_ || lp.b.size() != m_ || lp.c.size() != n_ || lp.lower.size() != n_ ||
        lp.upper.size() != n_)
      throw std::invalid_argument("LpTableau: inconsistent dimensions");
    for (std::size_t j = 0; j < n_; ++j)
      if (!std::isfinite(lp.lower[j])) throw std::invalid_argument("LpTableau: lower bounds must be finite");

    // Column layout: structural | one slack per inequality row | artificials.
    std::vector<std::size_t> slack_of(m_, npos);
    std::size_t total = n_;
    for (std::size_t r = 0; r < m_; ++r)
      if (lp.rel[r] != Relation::eq) slack_of[r] = total++;
    std::vector<double> residual(lp.b);
    for (std::size_t r = 0; r < m_; ++r)
      for (std::size_t j = 0; j < n_; ++j) residual[r] -= lp.a(r, j) * lp.lower[j];
    std::vector<std::size_t> art_of(m_, npos);
    std::vector<double> basic_sign(m_, 1.0);
    for (std::size_t r = 0; r < m_; ++r) {
      const double sigma = lp.rel[r] == Relation::le ? 1.0 : -1.0;
      if (slack_of[r] != npos && residual[r] * sigma >= 0.0) {
        basic_sign[r] = sigma;
      } else {
        art_of[r] = total++;
        basic_sign[r] = residual[r] >= 0.0 ? 1.0 : -1.0;
      }
    }
    width_ = total;
    first_artificial_ = total;
    for (std::size_t r = 0; r < m_; ++r)
      if (art_of[r] != npos) first_artificial_ = std::min(first_artificial_, art_of[r]);

    t_.assign(m_ * width_, 0.0);
    lower_.assign(width_, 0.0);
    upper_.assign(width_, kInf);
    cost_.assign(width_, 0.0);
    status_.assign(width_, Status::at_lower);
    basis_.assign(m_, 0);
    beta_.assign(m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
      lower_[j] = lp.lower[j];
      upper_[j] = lp.upper[j];
      cost_[j] = lp.c[j];
      if (lower_[j] == upper_[j]) status_[j] = Status::at_lower;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      double* row = &t_[r * width_];
      // Dividing by the sign of the basic column gives B^{-1} A directly.
      const double s = basic_sign[r];
      for (std::size_t j = 0; j < n_; ++j) row[j] = lp.a(r, j) / s;
      if (slack_of[r] != npos) row[slack_of[r]] = (lp.rel[r] == Relation::le ? 1.0 : -1.0) / s;
      if (art_of[r] != npos) row[art_of[r]] = 1.0;  // sign already folded in
      const std::size_t basic = art_of[r] != npos ? art_of[r] : slack_of[r];
      basis_[r] = basic;
      status_[basic] = Status::basic;
      beta_[r] = residual[r] / s;
    }
  }

  /// Two-phase primal simplex from the initial slack/artificial basis.
  LpStatus solve_primal() {
    if (first_artificial_ < width_) {
      std::vector<double> phase1(width_, 0.0);
      for (std::size_t j = first_artificial_; j < width_; ++j) phase1[j] = 1.0;
      compute_reduced_costs(phase1);
      const LpStatus s = primal_loop();
      if (s == LpStatus::iteration_limit) return s;
      double infeasibility = 0.0;
      for (std::size_t r = 0; r < m_; ++r)
        if (basis_[r] >= first_artificial_) infeasibility += std::max(beta_[r], 0.0);
      if (infeasibility > 1e-7 * (1.0 + rhs_scale())) return LpStatus::infeasible;
      retire_artificials();
    }
    compute_reduced_costs(cost_);
    return primal_loop();
  }

  /// Changes the bounds of structural column j, keeping the basis. The
  /// tableau stays dual feasible, so `reoptimize` can restore primal
  /// feasibility.
  void set_bounds(std::size_t j, double lo, double hi) {
    if (!std::isfinite(lo)) throw std::invalid_argument("LpTableau: lower bounds must be finite");
    if (status_[j] == Status::basic) {
      lower_[j] = lo;
      upper_[j] = hi;
      return;
    }
    const double old_value = nonbasic_value(j);
    lower_[j] = lo;
    upper_[j] = hi;
    if (status_[j] == Status::at_upper && !std::isfinite(hi)) status_[j] = Status::at_lower;
    const double delta = nonbasic_value(j) - old_value;
    if (delta != 0.0)
      for (std::size_t r = 0; r < m_; ++r) beta_[r] -= t_[r * width_ + j] * delta;
  }

  /// Dual simplex followed by a primal clean-up pass.
  LpStatus reoptimize() {
    const std::size_t limit = iteration_cap();
    for (std::size_t it = 0; it < limit; ++it) {
      std::size_t leave = npos;
      double worst = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        const std::size_t k = basis_[r];
        const double tol = kPrimalTol * (1.0 + std::abs(beta_[r]));
        double v = 0.0;
        if (beta_[r] < lower_[k] - tol) v = lower_[k] - beta_[r];
        else if (beta_[r] > upper_[k] + tol) v = beta_[r] - upper_[k];
        if (v > worst) {
          worst = v;
          leave = r;
        }
      }
      if (leave == npos) return primal_loop();
      const std::size_t k = basis_[leave];
      const bool to_lower = beta_[leave] < lower_[k];
      const double target = to_lower ? lower_[k] : upper_[k];
      const double* row = &t_[leave * width_];
      std::size_t enter = npos;
      double best_ratio = kInf;
      double best_alpha = 0.0;
      for (std::size_t j = 0; j < width_; ++j) {
        if (status_[j] == Status::basic || lower_[j] == upper_[j]) continue;
        const double alpha = row[j];
        if (std::abs(alpha) <= kPivotTol) continue;
        const bool up = status_[j] == Status::at_lower;
        // Moving x_j in its feasible direction must push x_k toward target.
        const bool ok = to_lower ? (up ? alpha < 0.0 : alpha > 0.0) : (up ? alpha > 0.0 : alpha < 0.0);
        if (!ok) continue;
        const double ratio = std::abs(d_[j]) / std::abs(alpha);
        if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && std::abs(alpha) > std::abs(best_alpha))) {
          best_ratio = ratio;
          best_alpha = alpha;
          enter = j;
        }
      }
      if (enter == npos) return LpStatus::infeasible;
      const double step = (beta_[leave] - target) / row[enter];
      const double entering_value = nonbasic_value(enter) + step;
      for (std::size_t r = 0; r < m_; ++r) beta_[r] -= t_[r * width_ + enter] * step;
      beta_[leave] = entering_value;
      status_[k] = to_lower ? Status::at_lower : Status::at_upper;
      pivot(leave, enter);
    }
    return LpStatus::iteration_limit;
  }

  /// Values of the structural columns.
  std::vector<double> values() const {
    std::vector<double> x(n_);
    for (std::size_t j = 0; j < n_; ++j) x[j] = status_[j] == Status::basic ? 0.0 : nonbasic_value(j);
    for (std::size_t r = 0; r < m_; ++r)
      if (basis_[r] < n_) x[basis_[r]] = beta_[r];
    return x;
  }

  double objective() const {
    const auto x = values();
    double z = 0.0;
    for (std::size_t j = 0; j < n_; ++j) z += cost_[j] * x[j];
    return z;
  }

  std::size_t structural_count() const { return n_; }

 private:
  enum class Status : std::uint8_t { basic, at_lower, at_upper };
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  double nonbasic_value(std::size_t j) const { return status_[j] == Status::at_upper ? upper_[j] : lower_[j]; }

  std::size_t iteration_cap() const { return 50 * (m_ + width_) + 1000; }

  double rhs_scale() const {
    double s = 0.0;
    for (double v : beta_) s = std::max(s, std::abs(v));
    return s;
  }

  void compute_reduced_costs(const std::vector<double>& c) {
    d_ = c;
    for (std::size_t r = 0; r < m_; ++r) {
      const double cb = c[basis_[r]];
      if (cb == 0.0) continue;
      const double* row = &t_[r * width_];
      for (std::size_t j = 0; j < width_; ++j) d_[j] -= cb * row[j];
    }
    for (std::size_t r = 0; r < m_; ++r) d_[basis_[r]] = 0.0;
  }

  void pivot(std::size_t r, std::size_t j) {
    double* prow = &t_[r * width_];
    const double inv = 1.0 / prow[j];
    for (std::size_t c = 0; c < width_; ++c) prow[c] *= inv;
    prow[j] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &t_[i * width_];
      const double factor = row[j];
      if (factor == 0.0) continue;
      for (std::size_t c = 0; c < width_; ++c) row[c] -= factor * prow[c];
      row[j] = 0.0;
    }
    const double dj = d_[j];
    if (dj != 0.0) {
      for (std::size_t c = 0; c < width_; ++c) d_[c] -= dj * prow[c];
      d_[j] = 0.0;
    }
    status_[basis_[r]] = status_[basis_[r]] == Status::basic ? Status::at_lower : status_[basis_[r]];
    basis_[r] = j;
    status_[j] = Status::basic;
  }

  LpStatus primal_loop() {
    const std::size_t limit = iteration_cap();
    std::size_t degenerate_run = 0;
    for (std::size_t it = 0; it < limit; ++it) {
      const bool bland = degenerate_run > 50;
      std::size_t enter = npos;
      double best = 0.0;
      double dir = 0.0;
      for (std::size_t j = 0; j < width_; ++j) {
        if (status_[j] == Status::basic || lower_[j] == upper_[j]) continue;
        double gain = 0.0;
        double s = 0.0;
        if (status_[j] == Status::at_lower && d_[j] < -kDualTol) {
          gain = -d_[j];
          s = 1.0;
        } else if (status_[j] == Status::at_upper && d_[j] > kDualTol) {
          gain = d_[j];
          s = -1.0;
        }
        if (s == 0.0) continue;
        if (bland) {
          enter = j;
          dir = s;
          break;
        }
        if (gain > best) {
          best = gain;
          enter = j;
          dir = s;
        }
      }
      if (enter == npos) return LpStatus::optimal;

      double step = upper_[enter] - lower_[enter];  // bound flip distance
      std::size_t leave = npos;
      double leave_alpha = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        const double alpha = t_[r * width_ + enter] * dir;
        if (std::abs(alpha) <= kPivotTol) continue;
        const std::size_t k = basis_[r];
        double limit_r;
        if (alpha > 0.0) limit_r = (beta_[r] - lower_[k]) / alpha;
        else if (std::isfinite(upper_[k])) limit_r = (upper_[k] - beta_[r]) / -alpha;
        else continue;
        limit_r = std::max(limit_r, 0.0);
        const bool better = limit_r < step - 1e-12 ||
                            (leave != npos && limit_r <= step + 1e-12 &&
                             (bland ? basis_[r] < basis_[leave] : std::abs(alpha) > std::abs(leave_alpha)));
        if (better) {
          step = limit_r;
          leave = r;
          leave_alpha = alpha;
        }
      }
      if (!std::isfinite(step)) return LpStatus::unbounded;
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;

      for (std::size_t r = 0; r < m_; ++r) beta_[r] -= t_[r * width_ + enter] * dir * step;
      if (leave == npos) {
        status_[enter] = status_[enter] == Status::at_lower ? Status::at_upper : Status::at_lower;
        continue;
      }
      const std::size_t k = basis_[leave];
      const double entering_value = nonbasic_value(enter) + dir * step;
      beta_[leave] = entering_value;
      status_[k] = leave_alpha > 0.0 ? Status::at_lower : Status::at_upper;
      pivot(leave, enter);
    }
    return LpStatus::iteration_limit;
  }

  // After phase 1: fix artificials at zero and pivot basic ones out where a
  // structural or slack column allows it.
  void retire_artificials() {
    for (std::size_t j = first_artificial_; j < width_; ++j) {
      upper_[j] = 0.0;
      if (status_[j] != Status::basic) status_[j] = Status::at_lower;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < first_artificial_) continue;
      const double* row = &t_[r * width_];
      std::size_t enter = npos;
      double best = 1e-7;
      for (std::size_t j = 0; j < first_artificial_; ++j) {
        if (status_[j] == Status::basic) continue;
        if (std::abs(row[j]) > best) {
          best = std::abs(row[j]);
          enter = j;
        }
      }
      if (enter == npos) continue;  // redundant row; the artificial stays basic at zero
      const std::size_t k = basis_[r];
      const double entering_value = nonbasic_value(enter);
      const double step = (beta_[r] - 0.0) / row[enter];
      for (std::size_t i = 0; i < m_; ++i) beta_[i] -= t_[i * width_ + enter] * step;
      beta_[r] = entering_value + step;
      status_[k] = Status::at_lower;
      pivot(r, enter);
    }
  }

  std::size_t m_;
  std::size_t n_;
  std::size_t width_ = 0;
  std::size_t first_artificial_ = 0;
  std::vector<double> t_;
  std::vector<double> lower_, upper_, cost_, d_;
  std::vector<Status> status_;
  std::vector<std::size_t> basis_;
  std::vector<double> beta_;
};

}  // namespace af
