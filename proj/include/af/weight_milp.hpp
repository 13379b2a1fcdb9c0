#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "af/cart.hpp"
#include "af/core.hpp"
#include "af/log.hpp"
#include "af/milp.hpp"
#include "af/policy_tree.hpp"
#include "af/rewards.hpp"
#include "af/weights.hpp"

namespace af {

/// A weight-generation MILP. Variables [0, num_weights) are the simplex
/// weights; `instances` lists the tensor rows that kept their binaries after
/// presolve.
struct WeightProblem {
  MilpProblem problem;
  std::size_t num_weights = 0;
  std::vector<std::size_t> instances;
  MilpHeuristic complete;  // fills every binary from the weights of an LP point
};

namespace detail {

inline std::vector<double> weights_from(const std::vector<double>& x, std::size_t m) {
  std::vector<double> w(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m));
  double sum = 0.0;
  for (auto& v : w) {
    if (!(v > 0.0)) v = 0.0;
    sum += v;
  }
  if (sum > 0.0)
    for (auto& v : w) v /= sum;
  return w;
}

inline double aggregated(const ProbaTensor& f, std::size_t i, std::size_t k, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * f(i, j, k);
  return s;
}

inline void add_simplex(MilpProblem& p, std::size_t m) {
  std::vector<std::pair<std::size_t, double>> sum;
  for (std::size_t j = 0; j < m; ++j) {
    p.add_variable(VarKind::continuous, 0.0, 1.0, "w" + std::to_string(j));
    sum.emplace_back(j, 1.0);
  }
  p.add_constraint(std::move(sum), Relation::eq, 1.0, "simplex");
}

constexpr double kSideTol = 1e-9;

// LP points often leave an instance inside the (threshold - epsilon,
// threshold) gap, where no binary value is consistent. Nudging w toward the
// uniform vector or a vertex usually moves every instance out of it.
template <class Fill>
std::optional<std::vector<double>> fill_with_repair(const std::vector<double>& w, Fill fill) {
  if (auto out = fill(w)) return out;
  const std::size_t m = w.size();
  std::vector<double> v(m);
  for (double t : {1e-3, 1e-2, 1e-1}) {
    for (std::size_t target = 0; target <= m; ++target) {
      for (std::size_t j = 0; j < m; ++j) {
        const double goal = target == m ? 1.0 / static_cast<double>(m) : (j == target ? 1.0 : 0.0);
        v[j] = (1.0 - t) * w[j] + t * goal;
      }
      if (auto out = fill(v)) return out;
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Minimum-misclassification weights for a binary task. k_i = 1 iff the
/// aggregated class-1 probability is >= 0.5, with an epsilon dead zone below
/// 0.5. The objective sum (k_i - y_i)^2 is written as sum (1 - 2 y_i) k_i + sum y_i.
/// With `presolve`, instances whose side is the same for every w are dropped
/// and their fixed error moves into the objective offset.
inline WeightProblem build_binary_weight_problem(const ProbaTensor& f, std::span<const std::size_t> rows,
                                                 std::span<const std::size_t> labels, double big_m = 2.0,
                                                 double epsilon = 1e-4, bool presolve = false) {
  if (f.classes() != 2) throw std::invalid_argument("build_binary_weight_problem: needs exactly two classes");
  if (rows.empty()) throw std::invalid_argument("build_binary_weight_problem: empty instance set");
  const std::size_t m = f.models();
  WeightProblem wp;
  wp.num_weights = m;
  auto& p = wp.problem;
  p.sense = Sense::minimize;
  detail::add_simplex(p, m);
  for (auto i : rows) {
    const std::size_t y = labels[i];
    if (presolve) {
      double lo = kInf, hi = -kInf;
      for (std::size_t j = 0; j < m; ++j) {
        lo = std::min(lo, f(i, j, 1));
        hi = std::max(hi, f(i, j, 1));
      }
      if (lo >= 0.5) {
        p.objective_offset += y == 1 ? 0.0 : 1.0;
        continue;
      }
      if (hi <= 0.5 - epsilon) {
        p.objective_offset += y == 1 ? 1.0 : 0.0;
        continue;
      }
    }
    const std::size_t k = p.add_variable(VarKind::binary, 0.0, 1.0, "k" + std::to_string(i));
    p.objective[k] = y == 1 ? -1.0 : 1.0;
    p.objective_offset += y == 1 ? 1.0 : 0.0;
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t j = 0; j < m; ++j) terms.emplace_back(j, f(i, j, 1));
    terms.emplace_back(k, -big_m);
    p.add_constraint(terms, Relation::ge, 0.5 - big_m, "hi" + std::to_string(i));
    p.add_constraint(std::move(terms), Relation::le, 0.5 - epsilon, "lo" + std::to_string(i));
    wp.instances.push_back(i);
  }
  wp.complete = [&f, m, epsilon, instances = wp.instances, width = p.variables.size()](
                    const std::vector<double>& x) -> std::optional<std::vector<double>> {
    return detail::fill_with_repair(detail::weights_from(x, m), [&](const std::vector<double>& w)
                                        -> std::optional<std::vector<double>> {
      std::vector<double> out(width, 0.0);
      std::copy(w.begin(), w.end(), out.begin());
      for (std::size_t r = 0; r < instances.size(); ++r) {
        const double p1 = detail::aggregated(f, instances[r], 1, w);
        if (p1 >= 0.5 - detail::kSideTol) out[m + r] = 1.0;
        else if (p1 <= 0.5 - epsilon + detail::kSideTol) out[m + r] = 0.0;
        else return std::nullopt;
      }
      return out;
    });
  };
  return wp;
}

/// Maximum-correct-count weights for K >= 2 classes. b(i,q) = 1 iff the true
/// class scores at least as high as class q; B(i) is the AND over q.
inline WeightProblem build_multiclass_weight_problem(const ProbaTensor& f, std::span<const std::size_t> rows,
                                                     std::span<const std::size_t> labels, double big_m = 2.0,
                                                     double epsilon = 1e-4, bool presolve = false) {
  const std::size_t k_classes = f.classes();
  if (k_classes < 2) throw std::invalid_argument("build_multiclass_weight_problem: needs at least two classes");
  if (rows.empty()) throw std::invalid_argument("build_multiclass_weight_problem: empty instance set");
  const std::size_t m = f.models();
  WeightProblem wp;
  wp.num_weights = m;
  auto& p = wp.problem;
  p.sense = Sense::maximize;
  detail::add_simplex(p, m);
  std::vector<std::size_t> first_var;  // per kept instance: index of b(i,0); B(i) follows the K b's
  for (auto i : rows) {
    const std::size_t y = labels[i];
    if (y >= k_classes) throw std::invalid_argument("build_multiclass_weight_problem: label out of range");
    if (presolve) {
      bool always = true, never = false;
      for (std::size_t q = 0; q < k_classes; ++q) {
        if (q == y) continue;
        double lo = kInf, hi = -kInf;
        for (std::size_t j = 0; j < m; ++j) {
          const double d = f(i, j, y) - f(i, j, q);
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
        if (lo < 0.0) always = false;
        if (hi <= -epsilon) never = true;
      }
      if (always) {
        p.objective_offset += 1.0;
        continue;
      }
      if (never) continue;
    }
    const std::size_t base = p.variables.size();
    std::vector<std::pair<std::size_t, double>> link;
    for (std::size_t q = 0; q < k_classes; ++q) {
      const std::size_t b = p.add_variable(VarKind::binary, 0.0, 1.0, "b" + std::to_string(i) + "_" + std::to_string(q));
      std::vector<std::pair<std::size_t, double>> terms;
      for (std::size_t j = 0; j < m; ++j) terms.emplace_back(j, f(i, j, y) - f(i, j, q));
      terms.emplace_back(b, -big_m);
      p.add_constraint(terms, Relation::ge, -big_m);
      p.add_constraint(std::move(terms), Relation::le, -epsilon);
      link.emplace_back(b, -1.0);
    }
    const std::size_t big_b = p.add_variable(VarKind::binary, 0.0, 1.0, "B" + std::to_string(i));
    p.objective[big_b] = 1.0;
    for (std::size_t q = 0; q < k_classes; ++q)
      p.add_constraint({{big_b, 1.0}, {base + q, -1.0}}, Relation::le, 0.0);
    link.emplace_back(big_b, 1.0);
    p.add_constraint(std::move(link), Relation::ge, -static_cast<double>(k_classes - 1));
    wp.instances.push_back(i);
    first_var.push_back(base);
  }
  wp.complete = [&f, labels, m, k_classes, epsilon, instances = wp.instances, first_var, width = p.variables.size()](
                    const std::vector<double>& x) -> std::optional<std::vector<double>> {
    return detail::fill_with_repair(detail::weights_from(x, m), [&](const std::vector<double>& w)
                                        -> std::optional<std::vector<double>> {
      std::vector<double> out(width, 0.0);
      std::copy(w.begin(), w.end(), out.begin());
      for (std::size_t r = 0; r < instances.size(); ++r) {
        const std::size_t i = instances[r];
        const double py = detail::aggregated(f, i, labels[i], w);
        bool all = true;
        for (std::size_t q = 0; q < k_classes; ++q) {
          const double d = py - detail::aggregated(f, i, q, w);
          double b;
          if (d >= -detail::kSideTol) b = 1.0;
          else if (d <= -epsilon + detail::kSideTol) b = 0.0;
          else return std::nullopt;
          out[first_var[r] + q] = b;
          all = all && b == 1.0;
        }
        out[first_var[r] + k_classes] = all ? 1.0 : 0.0;
      }
      return out;
    });
  };
  return wp;
}

/// Binary formulation for K = 2, the multiclass one otherwise.
inline WeightProblem build_weight_problem(const ProbaTensor& f, std::span<const std::size_t> rows,
                                          std::span<const std::size_t> labels, double big_m, double epsilon,
                                          bool presolve) {
  return f.classes() == 2 ? build_binary_weight_problem(f, rows, labels, big_m, epsilon, presolve)
                          : build_multiclass_weight_problem(f, rows, labels, big_m, epsilon, presolve);
}

/// Misclassified instances among `rows` for weights w (argmax, ties to the
/// lowest class).
inline std::size_t count_errors(const ProbaTensor& f, std::span<const std::size_t> rows,
                                std::span<const std::size_t> labels, std::span<const double> w) {
  std::size_t errors = 0;
  std::vector<double> p(f.classes());
  for (auto i : rows) {
    aggregate(f.instance(i), w, p);
    errors += argmax(p) != labels[i];
  }
  return errors;
}

enum class GenerationMode { plain, explore, exploit };
enum class GenerationScope { global, per_leaf };

struct GenerationParams {
  double big_m = 2.0;
  double epsilon = 1e-4;
  double min_gap = 0.1;
  double max_gap = 0.3;
  double time_limit = 30.0;  // per solve, seconds
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  int max_rounds = 5;

  friend bool operator==(const GenerationParams&, const GenerationParams&) = default;
};

namespace detail {

struct CutRow {
  std::vector<double> normal;
  double rhs;
};

// Solve one unit and return the projected weight vector, if any.
inline std::optional<WeightVector> solve_unit(const ProbaTensor& f, std::span<const std::size_t> rows,
                                              std::span<const std::size_t> labels, const WeightSet& ws,
                                              GenerationMode mode, const GenerationParams& params) {
  WeightProblem wp = build_weight_problem(f, rows, labels, params.big_m, params.epsilon, true);
  const std::size_t m = wp.num_weights;
  MilpOptions options;
  options.time_limit = params.time_limit;
  options.node_limit = params.node_limit;

  // Exploitation: s_h = 1 releases the proximity requirement to history h.
  const auto& hist = ws.history;
  std::vector<std::size_t> slack_var;
  std::vector<std::vector<CutRow>> hist_cuts(hist.size());
  if (mode == GenerationMode::exploit) {
    std::vector<std::pair<std::size_t, double>> total;
    for (std::size_t h = 0; h < hist.size(); ++h) {
      const std::size_t s = wp.problem.add_variable(VarKind::binary, 0.0, 1.0, "s" + std::to_string(h));
      slack_var.push_back(s);
      total.emplace_back(s, 1.0);
      for (std::size_t j = 0; j < m; ++j)
        for (double sign : {1.0, -1.0}) {
          // The simplex bounds 0 <= w_j <= 1 already imply this side.
          if (sign > 0.0 ? hist[h][j] + params.max_gap >= 1.0 : hist[h][j] - params.max_gap <= 0.0) continue;
          std::vector<double> u(m, 0.0);
          u[j] = sign;
          hist_cuts[h].push_back({u, params.max_gap});
        }
    }
    wp.problem.add_constraint(std::move(total), Relation::le, static_cast<double>(hist.size()) - 1.0, "keep_one");
  }
  auto add_hist_cut = [&](std::size_t h, const CutRow& cut) {
    // u.(w - h) <= max_gap + 10 s_h
    std::vector<std::pair<std::size_t, double>> terms;
    double rhs = cut.rhs;
    for (std::size_t j = 0; j < m; ++j) {
      if (cut.normal[j] == 0.0) continue;
      terms.emplace_back(j, cut.normal[j]);
      rhs += cut.normal[j] * hist[h][j];
    }
    terms.emplace_back(slack_var[h], -10.0);
    wp.problem.add_constraint(std::move(terms), Relation::le, rhs);
  };
  for (std::size_t h = 0; h < hist_cuts.size(); ++h)
    for (const auto& cut : hist_cuts[h]) add_hist_cut(h, cut);

  options.heuristic = [&](const std::vector<double>& x) -> std::optional<std::vector<double>> {
    auto full = wp.complete(x);
    if (!full) return std::nullopt;
    full->resize(wp.problem.variables.size(), 0.0);
    const std::span<const double> w(full->data(), m);
    for (std::size_t h = 0; h < slack_var.size(); ++h) {
      bool close = true;
      for (const auto& cut : hist_cuts[h]) {
        double lhs = 0.0;
        for (std::size_t j = 0; j < m; ++j) lhs += cut.normal[j] * (w[j] - hist[h][j]);
        if (lhs > cut.rhs + kSideTol) close = false;
      }
      (*full)[slack_var[h]] = close ? 0.0 : 1.0;
    }
    return full;
  };

  for (int round = 0; round < std::max(1, params.max_rounds); ++round) {
    const MilpSolution sol = solve(wp.problem, options);
    if (!sol.has_solution()) {
      logger().debug("weight generation: solver returned {} for a unit of {} rows", to_string(sol.status), rows.size());
      return std::nullopt;
    }
    WeightVector w = project_to_simplex(std::span<const double>(sol.values.data(), m));
    if (mode == GenerationMode::plain) return w;

    if (mode == GenerationMode::explore) {
      std::size_t nearest = ws.candidates.size();
      double best = kInf;
      for (std::size_t t = 0; t < ws.candidates.size(); ++t) {
        const double d = distance(w, ws.candidates[t]);
        if (d < best) {
          best = d;
          nearest = t;
        }
      }
      if (nearest == ws.candidates.size() || best >= params.min_gap) return w;
      // Tangent cut d.(x - w') >= min_gap |d| with d = w - w': removes the
      // ball around w' in the direction of w, including w itself.
      const auto& wp_near = ws.candidates[nearest].w;
      std::vector<double> d(m);
      for (std::size_t j = 0; j < m; ++j) d[j] = w[j] - wp_near[j];
      double norm = std::sqrt(std::inner_product(d.begin(), d.end(), d.begin(), 0.0));
      if (norm < 1e-12) {
        // w sits on w': push toward the simplex vertex farthest from it.
        std::size_t far = 0;
        for (std::size_t j = 1; j < m; ++j)
          if (wp_near[j] < wp_near[far]) far = j;
        for (std::size_t j = 0; j < m; ++j) d[j] = (j == far ? 1.0 : 0.0) - wp_near[j];
        norm = std::sqrt(std::inner_product(d.begin(), d.end(), d.begin(), 0.0));
        if (norm < 1e-12) return std::nullopt;
      }
      std::vector<std::pair<std::size_t, double>> terms;
      double rhs = params.min_gap * norm;
      for (std::size_t j = 0; j < m; ++j) {
        terms.emplace_back(j, d[j]);
        rhs += d[j] * wp_near[j];
      }
      wp.problem.add_constraint(std::move(terms), Relation::ge, rhs, "explore" + std::to_string(round));
      continue;
    }

    // Exploit: exact check of the Euclidean proximity.
    std::size_t claimed = hist.size();
    for (std::size_t h = 0; h < hist.size(); ++h) {
      if (distance(w, hist[h]) <= params.max_gap + 1e-9) return w;
      if (claimed == hist.size() && sol.values[slack_var[h]] < 0.5) claimed = h;
    }
    if (claimed == hist.size()) return std::nullopt;
    CutRow cut{std::vector<double>(m), params.max_gap};
    const double norm = distance(w, hist[claimed]);
    for (std::size_t j = 0; j < m; ++j) cut.normal[j] = (w[j] - hist[claimed][j]) / norm;
    hist_cuts[claimed].push_back(cut);
    add_hist_cut(claimed, cut);
  }
  return std::nullopt;
}

}  // namespace detail

/// Row groups of the policy tree: one group with every row for `global`, or
/// one group per leaf holding at least c_min rows for `per_leaf`.
inline std::vector<std::vector<std::size_t>> scope_units(const Matrix<double>& policy_x, const PolicyTree& tree,
                                                         GenerationScope scope) {
  std::vector<std::vector<std::size_t>> units;
  if (scope == GenerationScope::global) {
    units.emplace_back(policy_x.rows());
    std::iota(units.back().begin(), units.back().end(), 0);
    return units;
  }
  std::map<std::size_t, std::vector<std::size_t>> by_leaf;
  for (std::size_t i = 0; i < policy_x.rows(); ++i) by_leaf[tree.leaf_of(policy_x.row(i))].push_back(i);
  for (auto& [leaf, rows] : by_leaf)
    if (rows.size() >= tree.options.min_leaf && !rows.empty()) units.push_back(std::move(rows));
  return units;
}

/// New weight candidates from the weight-generation MILPs, one solve per
/// scope unit. Rows of `f`, `labels` and `policy_x` are aligned. Returned
/// vectors lie on the simplex and are distinct from W and from each other.
inline std::vector<WeightVector> generate_candidates(const ProbaTensor& f, std::span<const std::size_t> labels,
                                                     const Matrix<double>& policy_x, const PolicyTree& tree,
                                                     const WeightSet& ws, GenerationMode mode, GenerationScope scope,
                                                     const GenerationParams& params = {}) {
  if (ws.empty()) throw std::invalid_argument("generate_candidates: W is empty");
  if (mode == GenerationMode::exploit && ws.history.empty())
    throw std::invalid_argument("generate_candidates: exploitation needs a nonempty history");
  if (f.instances() != labels.size() || f.instances() != policy_x.rows())
    throw std::invalid_argument("generate_candidates: misaligned inputs");
  std::vector<WeightVector> out;
  if (f.instances() == 0) return out;
  for (const auto& rows : scope_units(policy_x, tree, scope)) {
    auto w = detail::solve_unit(f, rows, labels, ws, mode, params);
    if (!w) continue;
    if (contains(ws.candidates, *w) || contains(out, *w)) continue;
    out.push_back(std::move(*w));
  }
  return out;
}

struct TopKResult {
  std::vector<std::size_t> selected;  // candidate indices, ascending
  double objective = 0.0;
};

/// Chooses at most k candidates (columns of `counts`, one row per leaf)
/// maximising the sum over leaves of the best selected candidate's correct
/// count. Exhaustive over k-subsets when there are at most 100,000 of them,
/// otherwise the selection MILP.
inline TopKResult select_top_k_counts(const Matrix<double>& counts, std::size_t k, const MilpOptions& options = {}) {
  if (k < 1) throw std::invalid_argument("select_top_k: k must be at least 1");
  const std::size_t leaves = counts.rows();
  const std::size_t n = counts.cols();
  TopKResult result;
  auto value_of = [&](const std::vector<std::size_t>& subset) {
    double total = 0.0;
    for (std::size_t l = 0; l < leaves; ++l) {
      double best = -kInf;
      for (auto c : subset) best = std::max(best, counts(l, c));
      total += subset.empty() ? 0.0 : best;
    }
    return total;
  };
  if (n == 0) return result;
  if (k >= n) {
    result.selected.resize(n);
    std::iota(result.selected.begin(), result.selected.end(), 0);
    result.objective = value_of(result.selected);
    return result;
  }
  if (binomial(n, k) <= 100000.0) {
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), 0);
    double best = -kInf;
    while (true) {
      const double v = value_of(pick);
      if (v > best) {
        best = v;
        result.selected = pick;
      }
      std::size_t pos = k;
      while (pos > 0 && pick[pos - 1] == n - k + pos - 1) --pos;
      if (pos == 0) break;
      ++pick[pos - 1];
      for (std::size_t t = pos; t < k; ++t) pick[t] = pick[t - 1] + 1;
    }
    result.objective = best;
    return result;
  }
  MilpProblem p;
  p.sense = Sense::maximize;
  std::vector<std::size_t> s(n);
  for (std::size_t c = 0; c < n; ++c) s[c] = p.add_variable(VarKind::binary, 0.0, 1.0, "s" + std::to_string(c));
  std::vector<std::pair<std::size_t, double>> budget;
  for (std::size_t c = 0; c < n; ++c) budget.emplace_back(s[c], 1.0);
  p.add_constraint(std::move(budget), Relation::le, static_cast<double>(k), "budget");
  std::vector<std::vector<std::size_t>> assign(leaves, std::vector<std::size_t>(n));
  for (std::size_t l = 0; l < leaves; ++l) {
    std::vector<std::pair<std::size_t, double>> one;
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t v = p.add_variable(VarKind::binary, 0.0, 1.0);
      assign[l][c] = v;
      p.objective[v] = counts(l, c);
      one.emplace_back(v, 1.0);
      p.add_constraint({{v, 1.0}, {s[c], -1.0}}, Relation::le, 0.0);
    }
    p.add_constraint(std::move(one), Relation::eq, 1.0);
  }
  const MilpSolution sol = solve(p, options);
  if (!sol.has_solution()) return result;
  for (std::size_t c = 0; c < n; ++c)
    if (sol.values[s[c]] > 0.5) result.selected.push_back(c);
  result.objective = value_of(result.selected);
  return result;
}

/// Correct counts per (leaf, candidate) over rows routed by `tree`; leaves
/// are the tree's leaves in node order.
inline Matrix<double> leaf_correct_counts(const std::vector<WeightVector>& candidates, const ProbaTensor& f,
                                          std::span<const std::size_t> labels, const Matrix<double>& policy_x,
                                          const PolicyTree& tree) {
  const auto leaves = tree.leaves();
  Matrix<double> counts(leaves.size(), candidates.size(), 0.0);
  std::vector<double> p(f.classes());
  for (std::size_t i = 0; i < f.instances(); ++i) {
    const std::size_t leaf = tree.leaf_of(policy_x.row(i));
    const std::size_t l = static_cast<std::size_t>(std::find(leaves.begin(), leaves.end(), leaf) - leaves.begin());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      aggregate(f.instance(i), candidates[c].w, p);
      if (argmax(p) == labels[i]) counts(l, c) += 1.0;
    }
  }
  return counts;
}

/// The most promising k of `candidates` for the current tree's leaves.
inline std::vector<WeightVector> select_top_k(const std::vector<WeightVector>& candidates, const ProbaTensor& f,
                                              std::span<const std::size_t> labels, const Matrix<double>& policy_x,
                                              const PolicyTree& tree, std::size_t k, const MilpOptions& options = {}) {
  const auto result = select_top_k_counts(leaf_correct_counts(candidates, f, labels, policy_x, tree), k, options);
  std::vector<WeightVector> out;
  for (auto c : result.selected) out.push_back(candidates[c]);
  return out;
}

/// Debug dump in the common LP text format.
inline void write_lp_format(const MilpProblem& p, std::ostream& out) {
  auto name = [&](std::size_t j) {
    return p.variables[j].name.empty() ? "x" + std::to_string(j) : p.variables[j].name;
  };
  auto term = [&](double a, std::size_t j, bool first) {
    std::string s = a < 0 ? " - " : (first ? " " : " + ");
    s += std::to_string(std::abs(a)) + " " + name(j);
    return s;
  };
  out << (p.sense == Sense::minimize ? "Minimize" : "Maximize") << "\n obj:";
  bool first = true;
  for (std::size_t j = 0; j < p.variables.size(); ++j)
    if (p.objective[j] != 0.0) {
      out << term(p.objective[j], j, first);
      first = false;
    }
  if (first) out << " 0 " << name(0);
  out << "\nSubject To\n";
  for (std::size_t r = 0; r < p.constraints.size(); ++r) {
    const auto& c = p.constraints[r];
    out << ' ' << (c.name.empty() ? "c" + std::to_string(r) : c.name) << ':';
    bool f = true;
    for (const auto& [j, a] : c.terms) {
      out << term(a, j, f);
      f = false;
    }
    out << (c.rel == Relation::le ? " <= " : c.rel == Relation::ge ? " >= " : " = ") << c.rhs << '\n';
  }
  out << "Bounds\n";
  for (std::size_t j = 0; j < p.variables.size(); ++j) {
    const auto& v = p.variables[j];
    if (v.kind == VarKind::binary) continue;
    out << ' ' << v.lower << " <= " << name(j) << " <= " << (std::isfinite(v.upper) ? std::to_string(v.upper) : "+inf")
        << '\n';
  }
  out << "Binaries\n";
  for (std::size_t j = 0; j < p.variables.size(); ++j)
    if (p.variables[j].kind == VarKind::binary) out << ' ' << name(j) << '\n';
  out << "End\n";
}

}  // namespace af
