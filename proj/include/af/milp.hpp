#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "af/core.hpp"
#include "af/log.hpp"
#include "af/lp.hpp"

namespace af {

enum class VarKind { continuous, binary };
enum class Sense { minimize, maximize };

struct Variable {
  VarKind kind = VarKind::continuous;
  double lower = 0.0;
  double upper = kInf;
  std::string name;
};

struct Constraint {
  std::vector<std::pair<std::size_t, double>> terms;
  Relation rel = Relation::le;
  double rhs = 0.0;
  std::string name;
};

struct MilpProblem {
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  std::vector<double> objective;  // one coefficient per variable
  Sense sense = Sense::minimize;
  double objective_offset = 0.0;

  std::size_t add_variable(VarKind kind, double lower, double upper, std::string name = {}) {
    if (kind == VarKind::binary) {
      lower = 0.0;
      upper = 1.0;
    }
    variables.push_back({kind, lower, upper, std::move(name)});
    objective.push_back(0.0);
    return variables.size() - 1;
  }

  void add_constraint(std::vector<std::pair<std::size_t, double>> terms, Relation rel, double rhs,
                      std::string name = {}) {
    constraints.push_back({std::move(terms), rel, rhs, std::move(name)});
  }

  std::size_t num_binaries() const {
    std::size_t n = 0;
    for (const auto& v : variables) n += v.kind == VarKind::binary;
    return n;
  }

  void validate() const {
    if (objective.size() != variables.size()) throw std::invalid_argument("MilpProblem: objective size mismatch");
    for (double c : objective)
      if (!std::isfinite(c)) throw std::invalid_argument("MilpProblem: non-finite objective coefficient");
    if (!std::isfinite(objective_offset)) throw std::invalid_argument("MilpProblem: non-finite objective offset");
    for (const auto& v : variables) {
      if (!std::isfinite(v.lower)) throw std::invalid_argument("MilpProblem: variable lower bounds must be finite");
      if (v.upper < v.lower) throw std::invalid_argument("MilpProblem: empty variable bounds");
      if (v.kind == VarKind::binary && (v.lower != 0.0 || v.upper != 1.0))
        throw std::invalid_argument("MilpProblem: binary variables must have bounds [0, 1]");
    }
    for (const auto& c : constraints) {
      if (!std::isfinite(c.rhs)) throw std::invalid_argument("MilpProblem: non-finite right-hand side");
      for (const auto& [j, a] : c.terms) {
        if (j >= variables.size()) throw std::invalid_argument("MilpProblem: constraint references unknown variable");
        if (!std::isfinite(a)) throw std::invalid_argument("MilpProblem: non-finite constraint coefficient");
      }
    }
  }

  /// Objective value (including the offset) of a full assignment.
  double evaluate(std::span<const double> x) const {
    double z = objective_offset;
    for (std::size_t j = 0; j < variables.size(); ++j) z += objective[j] * x[j];
    return z;
  }

  /// Bounds, integrality and every constraint within `tol`.
  bool is_feasible(std::span<const double> x, double tol = 1e-7) const {
    if (x.size() != variables.size()) return false;
    for (std::size_t j = 0; j < variables.size(); ++j) {
      const auto& v = variables[j];
      if (!(x[j] >= v.lower - tol) || !(x[j] <= v.upper + tol)) return false;
      if (v.kind == VarKind::binary && std::abs(x[j] - std::round(x[j])) > tol) return false;
    }
    for (const auto& c : constraints) {
      double lhs = 0.0;
      double scale = std::abs(c.rhs);
      for (const auto& [j, a] : c.terms) {
        lhs += a * x[j];
        scale += std::abs(a * x[j]);
      }
      const double t = tol * (1.0 + scale);
      if (c.rel == Relation::le && lhs > c.rhs + t) return false;
      if (c.rel == Relation::ge && lhs < c.rhs - t) return false;
      if (c.rel == Relation::eq && std::abs(lhs - c.rhs) > t) return false;
    }
    return true;
  }
};

enum class MilpStatus { optimal, feasible, infeasible, timeout, unbounded };

inline std::string_view to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::optimal: return "optimal";
    case MilpStatus::feasible: return "feasible";
    case MilpStatus::infeasible: return "infeasible";
    case MilpStatus::timeout: return "timeout";
    case MilpStatus::unbounded: return "unbounded";
  }
  return "?";
}

struct MilpSolution {
  MilpStatus status = MilpStatus::infeasible;
  std::vector<double> values;
  double objective_value = 0.0;  // in the problem's own sense, offset included
  double gap = kInf;             // |incumbent - bound| / max(1, |incumbent|)
  std::size_t nodes = 0;

  bool has_solution() const { return status == MilpStatus::optimal || status == MilpStatus::feasible; }
};

/// Maps an LP relaxation point to a full feasible assignment, or nothing.
using MilpHeuristic = std::function<std::optional<std::vector<double>>(const std::vector<double>&)>;

struct MilpOptions {
  double time_limit = 30.0;  // seconds
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  MilpHeuristic heuristic;
};

namespace detail {

// A >= row and a <= row with identical terms become one ranged row
// a.x - s = 0 with lo <= s <= hi, s appended after the problem's variables.
// Halving the row count matters: the big-M weight programs are all pairs.
inline DenseLp to_dense_lp(const MilpProblem& p) {
  using Terms = std::vector<std::pair<std::size_t, double>>;
  const std::size_t n = p.variables.size();
  std::vector<Terms> rows(p.constraints.size());
  for (std::size_t r = 0; r < p.constraints.size(); ++r) {
    std::map<std::size_t, double> merged;
    for (const auto& [j, a] : p.constraints[r].terms) merged[j] += a;
    rows[r].assign(merged.begin(), merged.end());
  }
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> partner(p.constraints.size(), kNone);
  std::map<Terms, std::size_t> open_ge, open_le;
  for (std::size_t r = 0; r < p.constraints.size(); ++r) {
    const Relation rel = p.constraints[r].rel;
    if (rel == Relation::eq) continue;
    auto& mine = rel == Relation::ge ? open_ge : open_le;
    auto& other = rel == Relation::ge ? open_le : open_ge;
    const auto hit = other.find(rows[r]);
    if (hit != other.end()) {
      const std::size_t q = hit->second;
      other.erase(hit);
      const std::size_t ge = rel == Relation::ge ? r : q, le = rel == Relation::ge ? q : r;
      if (p.constraints[ge].rhs <= p.constraints[le].rhs) {
        partner[r] = q;
        partner[q] = r;
        continue;
      }
    }
    mine.emplace(rows[r], r);
  }
  std::size_t extra = 0;
  for (std::size_t r = 0; r < partner.size(); ++r) extra += partner[r] != kNone && partner[r] > r;

  DenseLp lp;
  lp.a = Matrix<double>(p.constraints.size() - extra, n + extra, 0.0);
  const double sign = p.sense == Sense::maximize ? -1.0 : 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    lp.c.push_back(sign * p.objective[j]);
    lp.lower.push_back(p.variables[j].lower);
    lp.upper.push_back(p.variables[j].upper);
  }
  std::size_t out = 0;
  for (std::size_t r = 0; r < p.constraints.size(); ++r) {
    if (partner[r] != kNone && partner[r] < r) continue;
    for (const auto& [j, a] : rows[r]) lp.a(out, j) = a;
    if (partner[r] == kNone) {
      lp.rel.push_back(p.constraints[r].rel);
      lp.b.push_back(p.constraints[r].rhs);
    } else {
      const std::size_t q = partner[r];
      const bool r_is_ge = p.constraints[r].rel == Relation::ge;
      const std::size_t s = lp.c.size();
      lp.a(out, s) = -1.0;
      lp.c.push_back(0.0);
      lp.lower.push_back(p.constraints[r_is_ge ? r : q].rhs);
      lp.upper.push_back(p.constraints[r_is_ge ? q : r].rhs);
      lp.rel.push_back(Relation::eq);
      lp.b.push_back(0.0);
    }
    ++out;
  }
  return lp;
}

class BranchAndBound {
 public:
  BranchAndBound(const MilpProblem& p, const MilpOptions& options)
      : p_(p), opt_(options), sign_(p.sense == Sense::maximize ? -1.0 : 1.0), start_(std::chrono::steady_clock::now()) {
    integral_objective_ = true;
    for (std::size_t j = 0; j < p.variables.size(); ++j) {
      const double c = p.objective[j];
      if (c == 0.0) continue;
      if (p.variables[j].kind != VarKind::binary || c != std::round(c)) integral_objective_ = false;
    }
    for (std::size_t j = 0; j < p.variables.size(); ++j)
      if (p.variables[j].kind == VarKind::binary) binaries_.push_back(j);
  }

  MilpSolution run() {
    MilpSolution out;
    auto root = std::make_shared<LpTableau>(to_dense_lp(p_));
    const LpStatus rs = root->solve_primal();
    out.nodes = 1;
    if (rs == LpStatus::infeasible) return finish(out, MilpStatus::infeasible, kInf);
    if (rs == LpStatus::unbounded) {
      out.status = MilpStatus::unbounded;
      return out;
    }
    if (rs == LpStatus::iteration_limit) return finish(out, MilpStatus::timeout, -kInf);

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    process(root, root->objective(), {}, open);
    round_and_fix(*root);
    bool exhausted = true;
    while (!open.empty()) {
      if (out.nodes >= opt_.node_limit || elapsed() > opt_.time_limit) {
        exhausted = false;
        break;
      }
      Node node = open.top();
      open.pop();
      if (!worth_exploring(node.bound)) continue;
      auto lp = std::make_shared<LpTableau>(*node.parent);
      lp->set_bounds(node.var, node.value, node.value);
      ++out.nodes;
      LpStatus s = lp->reoptimize();
      if (s == LpStatus::iteration_limit) {
        // Numerical trouble in the warm start: rebuild this node from scratch.
        lp = rebuild(node);
        s = lp->solve_primal();
      }
      if (s == LpStatus::iteration_limit) {
        unresolved_bound_ = std::min(unresolved_bound_, node.bound);
        continue;
      }
      if (s != LpStatus::optimal) continue;
      process(lp, lp->objective(), node.fixed, open);
    }
    double bound = unresolved_bound_;
    if (!exhausted)
      while (!open.empty()) {
        if (worth_exploring(open.top().bound)) bound = std::min(bound, open.top().bound);
        open.pop();
      }
    const bool proven = exhausted && !std::isfinite(unresolved_bound_);
    if (!incumbent_) return finish(out, proven ? MilpStatus::infeasible : MilpStatus::timeout, bound);
    return finish(out, proven ? MilpStatus::optimal : MilpStatus::feasible, bound);
  }

 private:
  struct Node {
    std::shared_ptr<const LpTableau> parent;
    std::vector<std::pair<std::size_t, double>> fixed;  // every branching fix from the root
    std::size_t var;
    double value;
    double bound;  // parent's LP objective (minimisation form)
    std::uint64_t order;
  };
  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.order > b.order;
    }
  };

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  bool worth_exploring(double bound) const {
    if (!incumbent_) return true;
    if (integral_objective_) return bound < incumbent_value_ - 1.0 + 1e-6;
    return bound < incumbent_value_ - 1e-9 * (1.0 + std::abs(incumbent_value_));
  }

  void offer(std::vector<double> x) {
    for (auto j : binaries_) x[j] = std::round(x[j]);
    if (!p_.is_feasible(x)) return;
    const double z = sign_ * (p_.evaluate(x) - p_.objective_offset);
    if (!incumbent_ || z < incumbent_value_ - 1e-12) {
      incumbent_value_ = z;
      incumbent_ = std::move(x);
    }
  }

  using Fixes = std::vector<std::pair<std::size_t, double>>;

  template <class Queue>
  void process(const std::shared_ptr<LpTableau>& lp, double bound, const Fixes& fixed, Queue& open) {
    if (!worth_exploring(bound)) return;
    std::vector<double> x = lp->values();
    x.resize(p_.variables.size());
    std::size_t branch = static_cast<std::size_t>(-1);
    double best = 1e-6;
    for (auto j : binaries_) {
      const double frac = std::abs(x[j] - std::round(x[j]));
      if (frac > best + 1e-12) {
        best = frac;
        branch = j;
      }
    }
    if (opt_.heuristic)
      if (auto h = opt_.heuristic(x)) offer(std::move(*h));
    if (branch == static_cast<std::size_t>(-1)) {
      offer(x);
      return;
    }
    std::shared_ptr<const LpTableau> parent = lp;
    for (double v : {0.0, 1.0}) {
      Node child{parent, fixed, branch, v, bound, counter_++};
      child.fixed.emplace_back(branch, v);
      open.push(std::move(child));
    }
  }

  // Plain rounding of the root relaxation, completed by an LP over the
  // continuous variables.
  void round_and_fix(const LpTableau& root) {
    if (binaries_.empty()) return;
    LpTableau lp(root);
    const auto x = root.values();
    for (auto j : binaries_) {
      const double v = std::round(x[j]);
      lp.set_bounds(j, v, v);
    }
    if (lp.reoptimize() == LpStatus::optimal) {
      auto y = lp.values();
      y.resize(p_.variables.size());
      offer(std::move(y));
    }
  }

  std::shared_ptr<LpTableau> rebuild(const Node& node) {
    DenseLp lp = to_dense_lp(p_);
    for (const auto& [j, v] : node.fixed) {
      lp.lower[j] = v;
      lp.upper[j] = v;
    }
    return std::make_shared<LpTableau>(lp);
  }

  MilpSolution finish(MilpSolution& out, MilpStatus status, double bound) {
    out.status = status;
    if (incumbent_) {
      out.values = *incumbent_;
      out.objective_value = p_.evaluate(out.values);
      if (status == MilpStatus::optimal) {
        out.gap = 0.0;
      } else {
        const double b = std::isfinite(bound) ? bound : incumbent_value_;
        out.gap = std::max(0.0, incumbent_value_ - b) / std::max(1.0, std::abs(incumbent_value_));
      }
    }
    return out;
  }

  const MilpProblem& p_;
  MilpOptions opt_;
  double sign_;
  std::chrono::steady_clock::time_point start_;
  bool integral_objective_ = false;
  std::vector<std::size_t> binaries_;
  std::optional<std::vector<double>> incumbent_;
  double incumbent_value_ = kInf;  // minimisation form, offset excluded
  double unresolved_bound_ = kInf;
  std::uint64_t counter_ = 0;
};

}  // namespace detail

/// Best-first branch and bound over the binary variables with an LP
/// relaxation at every node; branches on the most fractional binary.
inline MilpSolution solve(const MilpProblem& p, const MilpOptions& options) {
  p.validate();
  return detail::BranchAndBound(p, options).run();
}

inline MilpSolution solve(const MilpProblem& p, double time_limit = 30.0) {
  MilpOptions options;
  options.time_limit = time_limit;
  return solve(p, options);
}

}  // namespace af
