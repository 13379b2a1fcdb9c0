#pragma once

// Slow, independent reference implementations used by the unit tests and the
// acceptance binary. None of them calls into the solver code under test.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "af/cart.hpp"
#include "af/milp.hpp"

namespace af::oracle {

inline constexpr double kInfD = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Textbook two-phase simplex on  min c.x  s.t.  A x = b, x >= 0, b >= 0,
// Bland's rule for both entering and leaving variables.
// ---------------------------------------------------------------------------

struct StandardLp {
  std::vector<std::vector<double>> a;
  std::vector<double> b;
  std::vector<double> c;
};

enum class LpOutcome { optimal, infeasible, unbounded };

struct LpResult {
  LpOutcome outcome = LpOutcome::infeasible;
  double value = 0.0;
  std::vector<double> x;
};

inline LpResult bland_simplex(const StandardLp& lp) {
  constexpr double eps = 1e-10;
  const std::size_t rows = lp.a.size();
  const std::size_t n = lp.c.size();
  const std::size_t cols = n + rows;  // originals then one artificial per row
  std::vector<std::vector<double>> t(rows, std::vector<double>(cols + 1, 0.0));
  std::vector<std::size_t> basis(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) t[r][j] = lp.a[r][j];
    t[r][n + r] = 1.0;
    t[r][cols] = lp.b[r];
    basis[r] = n + r;
  }
  auto pivot = [&](std::size_t pr, std::size_t pc) {
    const double d = t[pr][pc];
    for (auto& v : t[pr]) v /= d;
    for (std::size_t r = 0; r < rows; ++r) {
      if (r == pr || t[r][pc] == 0.0) continue;
      const double f = t[r][pc];
      for (std::size_t j = 0; j <= cols; ++j) t[r][j] -= f * t[pr][j];
    }
    basis[pr] = pc;
  };
  // Runs Bland iterations for cost vector `cost` over columns < limit.
  auto run = [&](const std::vector<double>& cost, std::size_t limit) -> bool {
    while (true) {
      std::size_t enter = limit;
      for (std::size_t j = 0; j < limit; ++j) {
        double reduced = cost[j];
        for (std::size_t r = 0; r < rows; ++r) reduced -= cost[basis[r]] * t[r][j];
        if (reduced < -eps) {
          enter = j;
          break;
        }
      }
      if (enter == limit) return true;
      std::size_t leave = rows;
      double best = kInfD;
      for (std::size_t r = 0; r < rows; ++r) {
        if (t[r][enter] > eps) {
          const double ratio = t[r][cols] / t[r][enter];
          if (ratio < best - eps || (std::abs(ratio - best) <= eps && leave < rows && basis[r] < basis[leave])) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave == rows) return false;
      pivot(leave, enter);
    }
  };

  std::vector<double> phase1(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) phase1[n + r] = 1.0;
  run(phase1, cols);
  double infeasibility = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    if (basis[r] >= n) infeasibility += t[r][cols];
  if (infeasibility > 1e-7) return {};
  // Drive remaining (zero-valued) artificials out of the basis where possible.
  for (std::size_t r = 0; r < rows; ++r) {
    if (basis[r] < n) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (std::abs(t[r][j]) > 1e-9) {
        pivot(r, j);
        break;
      }
  }
  std::vector<double> phase2(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.c[j];
  // Artificials stuck in the basis sit on redundant rows at value 0; keep
  // them out of pricing by restricting columns to the originals.
  if (!run(phase2, n)) return {LpOutcome::unbounded, -kInfD, {}};
  LpResult res;
  res.outcome = LpOutcome::optimal;
  res.x.assign(n, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    if (basis[r] < n) res.x[basis[r]] = t[r][cols];
  res.value = 0.0;
  for (std::size_t j = 0; j < n; ++j) res.value += lp.c[j] * res.x[j];
  return res;
}

// Optimum of `p` with every binary fixed to `fixed` (size = number of
// variables; continuous entries are ignored). nullopt when infeasible.
inline std::optional<double> fixed_binary_value(const MilpProblem& p, const std::vector<double>& fixed) {
  std::vector<std::size_t> cont;
  for (std::size_t j = 0; j < p.variables.size(); ++j)
    if (p.variables[j].kind == VarKind::continuous) cont.push_back(j);
  const double sign = p.sense == Sense::minimize ? 1.0 : -1.0;

  // Continuous x_j = lower_j + z_j with z_j >= 0; finite upper bounds become rows.
  StandardLp lp;
  std::vector<std::size_t> slot(p.variables.size(), static_cast<std::size_t>(-1));
  std::size_t n = cont.size();
  for (std::size_t t = 0; t < cont.size(); ++t) slot[cont[t]] = t;
  struct Row {
    std::vector<double> coef;
    Relation rel;
    double rhs;
  };
  std::vector<Row> rows;
  double constant_obj = p.objective_offset;
  for (std::size_t j = 0; j < p.variables.size(); ++j)
    constant_obj += p.objective[j] * (p.variables[j].kind == VarKind::binary ? fixed[j] : p.variables[j].lower);
  for (const auto& c : p.constraints) {
    Row r{std::vector<double>(n, 0.0), c.rel, c.rhs};
    for (const auto& [j, a] : c.terms) {
      if (p.variables[j].kind == VarKind::binary) r.rhs -= a * fixed[j];
      else {
        r.coef[slot[j]] += a;
        r.rhs -= a * p.variables[j].lower;
      }
    }
    rows.push_back(std::move(r));
  }
  for (std::size_t t = 0; t < cont.size(); ++t) {
    const auto& v = p.variables[cont[t]];
    if (std::isfinite(v.upper)) {
      Row r{std::vector<double>(n, 0.0), Relation::le, v.upper - v.lower};
      r.coef[t] = 1.0;
      rows.push_back(std::move(r));
    }
  }
  // Slack / surplus columns.
  std::size_t extra = 0;
  for (const auto& r : rows) extra += r.rel != Relation::eq;
  lp.c.assign(n + extra, 0.0);
  for (std::size_t t = 0; t < cont.size(); ++t) lp.c[t] = sign * p.objective[cont[t]];
  std::size_t s = n;
  for (const auto& r : rows) {
    std::vector<double> full(n + extra, 0.0);
    std::copy(r.coef.begin(), r.coef.end(), full.begin());
    if (r.rel == Relation::le) full[s++] = 1.0;
    if (r.rel == Relation::ge) full[s++] = -1.0;
    double rhs = r.rhs;
    if (rhs < 0) {
      for (auto& v : full) v = -v;
      rhs = -rhs;
    }
    lp.a.push_back(std::move(full));
    lp.b.push_back(rhs);
  }
  if (lp.a.empty()) {
    // No rows: every z_j sits at zero unless its cost is negative.
    for (double c : lp.c)
      if (c < 0) return std::nullopt;
    return constant_obj;
  }
  const LpResult res = bland_simplex(lp);
  if (res.outcome != LpOutcome::optimal) return std::nullopt;
  return constant_obj + sign * res.value;
}

// Exhaustive optimum over all 2^b binary assignments. nullopt when infeasible.
inline std::optional<double> enumerate_milp(const MilpProblem& p) {
  std::vector<std::size_t> bins;
  for (std::size_t j = 0; j < p.variables.size(); ++j)
    if (p.variables[j].kind == VarKind::binary) bins.push_back(j);
  std::optional<double> best;
  std::vector<double> fixed(p.variables.size(), 0.0);
  for (std::size_t mask = 0; mask < (std::size_t{1} << bins.size()); ++mask) {
    for (std::size_t t = 0; t < bins.size(); ++t) fixed[bins[t]] = (mask >> t) & 1;
    const auto v = fixed_binary_value(p, fixed);
    if (!v) continue;
    if (!best || (p.sense == Sense::minimize ? *v < *best : *v > *best)) best = v;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Feasibility of { w on the simplex : g_r . w >= h_r for all r } for m <= 3,
// by enumerating the vertices of the region in (m-1)-dimensional coordinates.
// ---------------------------------------------------------------------------

struct HalfSpace {
  std::vector<double> g;  // m coefficients
  double h;
};

inline bool simplex_region_nonempty(const std::vector<HalfSpace>& cons, std::size_t m, double tol = 1e-9) {
  // w = (u, v, 1 - u - v) for m = 3; (u, 1 - u) for m = 2; (1) for m = 1.
  // Each constraint becomes a.u + b.v >= c in the reduced coordinates.
  struct Reduced {
    double a, b, c;
  };
  std::vector<Reduced> all;
  for (const auto& hs : cons) {
    if (m == 1) all.push_back({0, 0, hs.h - hs.g[0]});
    if (m == 2) all.push_back({hs.g[0] - hs.g[1], 0, hs.h - hs.g[1]});
    if (m == 3) all.push_back({hs.g[0] - hs.g[2], hs.g[1] - hs.g[2], hs.h - hs.g[2]});
  }
  if (m >= 2) {
    all.push_back({1, 0, 0});  // u >= 0
    if (m == 3) {
      all.push_back({0, 1, 0});    // v >= 0
      all.push_back({-1, -1, -1});  // u + v <= 1
    } else {
      all.push_back({-1, 0, -1});  // u <= 1
    }
  }
  auto feasible = [&](double u, double v) {
    for (const auto& r : all)
      if (r.a * u + r.b * v < r.c - tol) return false;
    return true;
  };
  if (m == 1) return feasible(0, 0);
  if (m == 2) {
    for (const auto& r : all)
      if (std::abs(r.a) > 1e-15 && feasible(r.c / r.a, 0)) return true;
    return false;
  }
  for (std::size_t x = 0; x < all.size(); ++x)
    for (std::size_t y = x + 1; y < all.size(); ++y) {
      const double det = all[x].a * all[y].b - all[x].b * all[y].a;
      if (std::abs(det) < 1e-15) continue;
      const double u = (all[x].c * all[y].b - all[x].b * all[y].c) / det;
      const double v = (all[x].a * all[y].c - all[x].c * all[y].a) / det;
      if (feasible(u, v)) return true;
    }
  return false;
}

// Minimum error count of the binary weight program: every instance must sit
// on a definite side (p1 >= 0.5 predicts class 1, p1 <= 0.5 - eps predicts
// class 0); enumerate side patterns and keep the feasible ones.
inline std::size_t binary_weight_oracle(const ProbaTensor& f, const std::vector<std::size_t>& labels, double eps) {
  const std::size_t n = f.instances(), m = f.models();
  std::size_t best = n + 1;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::size_t errors = 0;
    std::vector<HalfSpace> cons;
    for (std::size_t i = 0; i < n; ++i) {
      const bool side1 = (mask >> i) & 1;
      errors += side1 != (labels[i] == 1);
      HalfSpace hs{std::vector<double>(m), 0.0};
      for (std::size_t j = 0; j < m; ++j) hs.g[j] = side1 ? f(i, j, 1) : -f(i, j, 1);
      hs.h = side1 ? 0.5 : -(0.5 - eps);
      cons.push_back(std::move(hs));
    }
    if (errors < best && simplex_region_nonempty(cons, m)) best = errors;
  }
  return best;
}

// Maximum correct count of the multiclass weight program. Every pairwise
// margin d(i, q) = (f_y - f_q).w must be decided: d >= 0 or d <= -eps.
// Instance i is correct iff all its margins are on the d >= 0 side. Depth-
// first search over the side of each margin, pruning empty regions and
// branches that cannot beat the best count found so far.
inline std::size_t multiclass_weight_oracle(const ProbaTensor& f, const std::vector<std::size_t>& labels, double eps) {
  const std::size_t n = f.instances(), m = f.models(), k = f.classes();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < k; ++q)
      if (q != labels[i]) pairs.emplace_back(i, q);
  auto margin = [&](std::size_t i, std::size_t q, bool at_least_zero) {
    HalfSpace hs{std::vector<double>(m), at_least_zero ? 0.0 : eps};
    for (std::size_t j = 0; j < m; ++j) {
      const double d = f(i, j, labels[i]) - f(i, j, q);
      hs.g[j] = at_least_zero ? d : -d;
    }
    return hs;
  };
  std::size_t best = 0;
  std::vector<HalfSpace> cons;
  std::vector<bool> wrong(n, false);
  std::size_t num_wrong = 0;
  auto dfs = [&](auto&& self, std::size_t t) -> void {
    if (n - num_wrong <= best) return;
    if (!simplex_region_nonempty(cons, m)) return;
    if (t == pairs.size()) {
      best = n - num_wrong;
      return;
    }
    const auto [i, q] = pairs[t];
    for (bool ge : {true, false}) {
      cons.push_back(margin(i, q, ge));
      const bool newly_wrong = !ge && !wrong[i];
      if (newly_wrong) {
        wrong[i] = true;
        ++num_wrong;
      }
      self(self, t + 1);
      if (newly_wrong) {
        wrong[i] = false;
        --num_wrong;
      }
      cons.pop_back();
    }
  };
  dfs(dfs, 0);
  return best;
}

// Best MIO-admissible correct count over the step-0.01 simplex grid (m <= 3).
// A grid point counts only if no pairwise margin lies in (-eps, 0).
inline std::size_t multiclass_grid_oracle(const ProbaTensor& f, const std::vector<std::size_t>& labels, double eps) {
  const std::size_t n = f.instances(), m = f.models(), k = f.classes();
  std::size_t best = 0;
  auto evaluate = [&](const std::vector<double>& w) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool ok = true;
      for (std::size_t q = 0; q < k; ++q) {
        double d = 0.0;
        for (std::size_t j = 0; j < m; ++j) d += w[j] * (f(i, j, labels[i]) - f(i, j, q));
        if (d < 0.0 && d > -eps) return;  // inadmissible point
        ok = ok && d >= 0.0;
      }
      count += ok;
    }
    best = std::max(best, count);
  };
  for (int a = 0; a <= 100; ++a) {
    if (m == 1) {
      evaluate({1.0});
      break;
    }
    if (m == 2) {
      evaluate({a / 100.0, 1.0 - a / 100.0});
      continue;
    }
    for (int b = 0; a + b <= 100; ++b) evaluate({a / 100.0, b / 100.0, (100 - a - b) / 100.0});
  }
  return best;
}

// ---------------------------------------------------------------------------
// Policy trees of depth <= 1.
// ---------------------------------------------------------------------------

inline double best_column_sum(const Matrix<double>& r, const std::vector<std::size_t>& rows) {
  double best = -kInfD;
  for (std::size_t t = 0; t < r.cols(); ++t) {
    double s = 0.0;
    for (auto i : rows) s += r(i, t);
    best = std::max(best, s);
  }
  return best;
}

inline double depth1_policy_optimum(const Matrix<double>& x, const Matrix<double>& r, std::size_t min_leaf,
                                    double penalty) {
  std::vector<std::size_t> all(x.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  double best = best_column_sum(r, all);
  for (std::size_t f = 0; f < x.cols(); ++f) {
    std::set<double> values;
    for (std::size_t i = 0; i < x.rows(); ++i) values.insert(x(i, f));
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double thr = (*it + *std::next(it)) / 2.0;
      std::vector<std::size_t> left, right;
      for (std::size_t i = 0; i < x.rows(); ++i) (x(i, f) < thr ? left : right).push_back(i);
      if (left.size() < min_leaf || right.size() < min_leaf) continue;
      best = std::max(best, best_column_sum(r, left) + best_column_sum(r, right) + penalty);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Pairwise AUC.
// ---------------------------------------------------------------------------

inline double pairwise_auc(const std::vector<double>& s, const std::vector<std::size_t>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b)
      if (y[a] == 1 && y[b] == 0) {
        pairs += 1.0;
        wins += s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

inline double pairwise_ovr_auc(const Matrix<double>& scores, const std::vector<std::size_t>& y) {
  double total = 0.0;
  for (std::size_t c = 0; c < scores.cols(); ++c) {
    std::vector<double> s(y.size());
    std::vector<std::size_t> is(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      s[i] = scores(i, c);
      is[i] = y[i] == c;
    }
    total += pairwise_auc(s, is);
  }
  return total / static_cast<double>(scores.cols());
}

}  // namespace af::oracle
