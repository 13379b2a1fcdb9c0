#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "af/cart.hpp"
#include "af/core.hpp"
#include "af/dataset.hpp"
#include "af/log.hpp"
#include "af/metrics.hpp"
#include "af/policy_tree.hpp"
#include "af/rewards.hpp"
#include "af/weight_milp.hpp"
#include "af/weights.hpp"

namespace af {

enum class DataFilter { all, nondeterministic_only, drop_det_correct, drop_det_incorrect };

inline constexpr DataFilter kAllDataFilters[] = {DataFilter::all, DataFilter::nondeterministic_only,
                                                 DataFilter::drop_det_correct, DataFilter::drop_det_incorrect};
inline constexpr FeatureMode kAllFeatureModes[] = {FeatureMode::x_only, FeatureMode::x_plus_preds};

inline std::string_view to_string(DataFilter f) {
  switch (f) {
    case DataFilter::all: return "all";
    case DataFilter::nondeterministic_only: return "nondeterministic_only";
    case DataFilter::drop_det_correct: return "drop_det_correct";
    case DataFilter::drop_det_incorrect: return "drop_det_incorrect";
  }
  return "?";
}

inline std::string_view to_string(FeatureMode m) { return m == FeatureMode::x_only ? "x_only" : "x_plus_preds"; }

inline DataFilter data_filter_from_string(std::string_view s) {
  for (auto f : kAllDataFilters)
    if (to_string(f) == s) return f;
  throw Error("unknown data filter '" + std::string(s) + "'");
}

inline FeatureMode feature_mode_from_string(std::string_view s) {
  for (auto m : kAllFeatureModes)
    if (to_string(m) == s) return m;
  throw Error("unknown feature mode '" + std::string(s) + "'");
}

struct AfConfig {
  RewardVariant reward = RewardVariant::hard;
  RewardParams reward_params;
  FeatureMode feature_mode = FeatureMode::x_only;
  DataFilter data_filter = DataFilter::all;
  std::size_t num_trees = 0;  // 0: 50 for binary tasks, 100 otherwise
  std::size_t cart_depth = 10;
  PolicyTreeOptions policy;
  GenerationParams generation{.node_limit = 200};
  std::size_t top_k = 5;
  std::size_t max_iterations = 10;
  std::uint64_t seed = 0;
  bool search_configurations = true;  // grid over reward x feature mode x filter
  bool generate_candidates = true;    // false freezes W (test hook)
  std::optional<std::vector<WeightVector>> initial_weights;  // replaces the default W (test hook)

  friend bool operator==(const AfConfig&, const AfConfig&) = default;
};

inline std::size_t tree_cap(std::size_t num_classes) { return num_classes == 2 ? 50 : 100; }

inline std::size_t resolved_num_trees(const AfConfig& cfg, std::size_t num_classes) {
  return cfg.num_trees == 0 ? tree_cap(num_classes) : cfg.num_trees;
}

/// One point of the configuration search and its validation score.
struct ConfigScore {
  RewardVariant reward;
  FeatureMode feature_mode;
  DataFilter data_filter;
  double val_score;
};

struct IterationRecord {
  std::size_t iteration;  // 1-based
  std::size_t pool_size;
  std::size_t new_candidates;
  std::size_t leaves;
  double objective;
  double val_score;
};

struct TrainingReport {
  std::vector<ConfigScore> grid;
  std::vector<IterationRecord> iterations;
  std::size_t retained_iteration = 1;
  bool stabilised = false;
};

struct AfModel {
  BaggedEnsemble ensemble;
  PolicyTree tree;
  WeightSet weights;  // tree treatments index weights.candidates
  AfConfig config;    // with the selected reward, feature mode and filter
  FeatureSchema schema;
  std::size_t num_classes = 0;
  std::size_t num_features = 0;
  TrainingReport report;
};

/// Deterministic-instance filter on a binary task. An instance is
/// deterministic when every model puts class 1 strictly on the same side of
/// 0.5; it is deterministic-correct when that side matches the label.
inline std::vector<std::size_t> filter_deterministic(const ProbaTensor& f, std::span<const std::size_t> labels,
                                                     DataFilter filter) {
  std::vector<std::size_t> keep;
  if (filter == DataFilter::all) {
    keep.resize(f.instances());
    std::iota(keep.begin(), keep.end(), 0);
    return keep;
  }
  if (f.classes() != 2) throw Error("data filter '" + std::string(to_string(filter)) + "' needs a binary task");
  for (std::size_t i = 0; i < f.instances(); ++i) {
    bool all_above = true, all_below = true;
    for (std::size_t j = 0; j < f.models(); ++j) {
      const double p = f(i, j, 1);
      all_above = all_above && p > 0.5;
      all_below = all_below && p < 0.5;
    }
    const bool det = all_above || all_below;
    const bool det_correct = (all_above && labels[i] == 1) || (all_below && labels[i] == 0);
    const bool det_incorrect = det && !det_correct;
    bool retained = true;
    switch (filter) {
      case DataFilter::all: break;
      case DataFilter::nondeterministic_only: retained = !det; break;
      case DataFilter::drop_det_correct: retained = !det_correct; break;
      case DataFilter::drop_det_incorrect: retained = !det_incorrect; break;
    }
    if (retained) keep.push_back(i);
  }
  return keep;
}

/// Every reward x feature mode x filter combination; filters other than
/// `all` only for binary tasks.
inline std::vector<AfConfig> default_grid(const AfConfig& base, std::size_t num_classes) {
  std::vector<AfConfig> grid;
  for (auto reward : kAllRewardVariants)
    for (auto mode : kAllFeatureModes)
      for (auto filter : kAllDataFilters) {
        if (num_classes != 2 && filter != DataFilter::all) continue;
        AfConfig c = base;
        c.reward = reward;
        c.feature_mode = mode;
        c.data_filter = filter;
        grid.push_back(c);
      }
  return grid;
}

namespace detail {

inline std::vector<std::size_t> pick(std::span<const std::size_t> v, std::span<const std::size_t> positions) {
  std::vector<std::size_t> out;
  out.reserve(positions.size());
  for (auto p : positions) out.push_back(v[p]);
  return out;
}

// Policy-tree training material for one configuration.
struct OptView {
  std::vector<std::size_t> rows;    // dataset row ids
  std::vector<std::size_t> labels;  // aligned with rows
  ProbaTensor f;
  Matrix<double> x;  // policy features
};

inline OptView make_view(const Dataset& ds, std::span<const std::size_t> opt_rows, const ProbaTensor& f_opt,
                         const std::vector<std::size_t>& opt_labels, const AfConfig& cfg) {
  OptView v;
  const auto keep = filter_deterministic(f_opt, opt_labels, cfg.data_filter);
  v.rows = pick(opt_rows, keep);
  v.labels = pick(opt_labels, keep);
  v.f = f_opt.select(keep);
  v.x = build_policy_features(ds.features, v.rows, v.f, cfg.feature_mode);
  return v;
}

inline PolicyTreeOptions clamp_policy(PolicyTreeOptions p, std::size_t rows) {
  p.min_leaf = std::clamp<std::size_t>(p.min_leaf, 1, std::max<std::size_t>(rows, 1));
  return p;
}

// Aggregated distributions for validation rows under (tree, W).
inline Matrix<double> route_and_aggregate(const Matrix<double>& policy_x, const ProbaTensor& f, const PolicyTree& tree,
                                          const std::vector<WeightVector>& pool) {
  Matrix<double> out(f.instances(), f.classes());
  for (std::size_t i = 0; i < f.instances(); ++i) {
    const auto& w = pool[tree.route(policy_x.row(i))];
    aggregate(f.instance(i), w.w, out.row(i));
  }
  return out;
}

// Leaf treatments resolved to vectors, in node order.
inline std::vector<std::pair<PolicyNode, std::vector<double>>> resolved(const PolicyTree& tree,
                                                                        const std::vector<WeightVector>& pool) {
  std::vector<std::pair<PolicyNode, std::vector<double>>> out;
  for (auto node : tree.nodes) {
    std::vector<double> w;
    if (node.is_leaf()) {
      w = pool[node.treatment].w;
      node.treatment = 0;
    }
    out.emplace_back(node, std::move(w));
  }
  return out;
}

}  // namespace detail

/// Scores every grid point by data_val AUC of a policy tree fitted on the
/// filtered data_opt; returns the best (ties to the earliest) and fills
/// `scores` when given.
inline AfConfig select_configuration(const Dataset& ds, const DataSplit& split, const BaggedEnsemble& ens,
                                     const WeightSet& ws, const std::vector<AfConfig>& grid,
                                     std::vector<ConfigScore>* scores = nullptr) {
  if (grid.empty()) throw std::invalid_argument("select_configuration: empty grid");
  const ProbaTensor f_opt = proba_tensor(ens, ds.features, split.opt);
  const ProbaTensor f_val = proba_tensor(ens, ds.features, split.val);
  const auto opt_labels = detail::pick(ds.labels, split.opt);
  const auto val_labels = detail::pick(ds.labels, split.val);
  std::size_t best = 0;
  double best_score = -kInf;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const AfConfig& cfg = grid[g];
    double score = -kInf;
    const auto view = detail::make_view(ds, split.opt, f_opt, opt_labels, cfg);
    if (!view.rows.empty() && !split.val.empty()) {
      const auto r = compute_reward_matrix(view.f, view.labels, ws.candidates, cfg.reward, cfg.reward_params);
      const auto tree = fit_policy_tree(view.x, r.values, detail::clamp_policy(cfg.policy, view.rows.size()));
      const auto val_x = build_policy_features(ds.features, split.val, f_val, cfg.feature_mode);
      score = classification_score(detail::route_and_aggregate(val_x, f_val, tree, ws.candidates), val_labels);
    }
    logger().debug("config {}/{}/{}: val {:.6f}", to_string(cfg.reward), to_string(cfg.feature_mode),
                   to_string(cfg.data_filter), score);
    if (scores) scores->push_back({cfg.reward, cfg.feature_mode, cfg.data_filter, score});
    if (score > best_score) {
      best_score = score;
      best = g;
    }
  }
  return grid[best];
}

/// The full training loop: partition, bagging, weight initialisation,
/// configuration search, then MILP-driven refinement of W and the policy
/// tree. The iteration with the best data_val score is kept.
inline AfModel train_af(const Dataset& ds, const AfConfig& cfg_in) {
  if (ds.num_classes < 2) throw Error("training needs at least two classes");
  AfConfig cfg = cfg_in;
  const std::size_t m = resolved_num_trees(cfg, ds.num_classes);
  if (m > tree_cap(ds.num_classes))
    throw Error("the number of base learners is capped at " + std::to_string(tree_cap(ds.num_classes)) +
                " for this task, got " + std::to_string(m));
  if (ds.num_classes != 2 && cfg.data_filter != DataFilter::all)
    throw Error("data filters other than 'all' need a binary task");
  if (cfg.max_iterations < 1) throw Error("max_iterations must be at least 1");
  cfg.num_trees = m;

  const DataSplit split = partition(ds, cfg.seed);
  BaggingOptions bagging;
  bagging.num_trees = m;
  bagging.cart.max_depth = cfg.cart_depth;
  AfModel model;
  model.ensemble = fit_bagged(ds, split.single, bagging, derive_seed(cfg.seed, 1));
  model.schema = ds.schema;
  model.num_classes = ds.num_classes;
  model.num_features = ds.p();

  WeightSet ws;
  if (cfg.initial_weights) {
    for (const auto& w : *cfg.initial_weights)
      if (w.size() != m || !on_simplex(w.w)) throw Error("initial weight vectors must lie on the " + std::to_string(m) + "-simplex");
    ws.candidates = *cfg.initial_weights;
  } else {
    ws = init_default(m, derive_seed(cfg.seed, 2));
  }
  if (ws.empty()) throw Error("the initial weight pool is empty");

  if (cfg.search_configurations) {
    const AfConfig chosen = select_configuration(ds, split, model.ensemble, ws, default_grid(cfg, ds.num_classes),
                                                 &model.report.grid);
    cfg.reward = chosen.reward;
    cfg.feature_mode = chosen.feature_mode;
    cfg.data_filter = chosen.data_filter;
  }
  logger().info("configuration: reward {}, features {}, filter {}", to_string(cfg.reward),
                to_string(cfg.feature_mode), to_string(cfg.data_filter));

  const ProbaTensor f_opt = proba_tensor(model.ensemble, ds.features, split.opt);
  const ProbaTensor f_val = proba_tensor(model.ensemble, ds.features, split.val);
  const auto opt_labels = detail::pick(ds.labels, split.opt);
  const auto val_labels = detail::pick(ds.labels, split.val);
  auto view = detail::make_view(ds, split.opt, f_opt, opt_labels, cfg);
  if (view.rows.empty()) {
    logger().info("filter '{}' leaves no policy rows; using every data_opt row", to_string(cfg.data_filter));
    cfg.data_filter = DataFilter::all;
    view = detail::make_view(ds, split.opt, f_opt, opt_labels, cfg);
  }
  const PolicyTreeOptions policy = detail::clamp_policy(cfg.policy, view.rows.size());
  const Matrix<double> val_x = build_policy_features(ds.features, split.val, f_val, cfg.feature_mode);
  auto val_score = [&](const PolicyTree& tree, const WeightSet& pool) {
    if (split.val.empty()) return 0.0;
    return classification_score(detail::route_and_aggregate(val_x, f_val, tree, pool.candidates), val_labels);
  };

  auto fit = [&](const WeightSet& pool, double* objective_out) {
    const auto r = compute_reward_matrix(view.f, view.labels, pool.candidates, cfg.reward, cfg.reward_params);
    PolicyTree tree = fit_policy_tree(view.x, r.values, policy);
    *objective_out = objective(tree, view.x, r.values);
    return tree;
  };

  double obj = 0.0;
  PolicyTree tree = fit(ws, &obj);
  double score = val_score(tree, ws);
  model.report.iterations.push_back({1, ws.size(), 0, tree.leaves().size(), obj, score});
  model.tree = tree;
  model.weights = ws;
  double best_score = score;

  for (std::size_t it = 2; it <= cfg.max_iterations && cfg.generate_candidates; ++it) {
    std::vector<WeightVector> fresh;
    auto gather = [&](GenerationMode mode) {
      for (auto scope : {GenerationScope::global, GenerationScope::per_leaf}) {
        WeightSet seen = ws;
        seen.candidates.insert(seen.candidates.end(), fresh.begin(), fresh.end());
        auto found = generate_candidates(view.f, view.labels, view.x, tree, seen, mode, scope, cfg.generation);
        fresh.insert(fresh.end(), std::make_move_iterator(found.begin()), std::make_move_iterator(found.end()));
      }
    };
    gather(GenerationMode::plain);
    if (it % 2 == 0) gather(GenerationMode::explore);
    else if (!ws.history.empty()) gather(GenerationMode::exploit);

    const auto chosen = select_top_k(fresh, view.f, view.labels, view.x, tree, cfg.top_k);
    std::vector<WeightVector> used;
    for (auto t : tree.used_treatments()) used.push_back(ws.candidates[t]);
    WeightSet next = update_weight_set(ws, used, chosen);

    PolicyTree next_tree = fit(next, &obj);
    const bool stable = detail::resolved(next_tree, next.candidates) == detail::resolved(tree, ws.candidates);
    ws = std::move(next);
    tree = std::move(next_tree);
    score = val_score(tree, ws);
    model.report.iterations.push_back({it, ws.size(), chosen.size(), tree.leaves().size(), obj, score});
    logger().info("iteration {}: |W| = {}, {} new, {} leaves, val {:.6f}", it, ws.size(), chosen.size(),
                  tree.leaves().size(), score);
    if (score > best_score) {
      best_score = score;
      model.tree = tree;
      model.weights = ws;
      model.report.retained_iteration = it;
    }
    if (stable) {
      model.report.stabilised = true;
      break;
    }
  }
  model.config = cfg;
  return model;
}

/// Policy features for one raw feature row, computing tree outputs if needed.
inline std::vector<double> policy_row(const AfModel& model, std::span<const double> x) {
  std::vector<double> row(x.begin(), x.end());
  if (model.config.feature_mode == FeatureMode::x_plus_preds) {
    std::vector<double> preds(model.ensemble.size() * model.num_classes);
    predict_all(model.ensemble, x, preds);
    row.insert(row.end(), preds.begin(), preds.end());
  }
  return row;
}

struct AfPrediction {
  std::size_t label;
  std::vector<double> distribution;
};

/// Routes x to its leaf weight vector and aggregates the base learners.
inline AfPrediction predict_af(const AfModel& model, std::span<const double> x) {
  if (x.size() != model.num_features) throw std::invalid_argument("predict_af: feature count mismatch");
  const auto row = policy_row(model, x);
  const auto& w = model.weights.candidates[model.tree.route(row)];
  std::vector<double> all(model.ensemble.size() * model.num_classes);
  predict_all(model.ensemble, x, all);
  AfPrediction out;
  out.distribution.assign(model.num_classes, 0.0);
  aggregate(all, w.w, out.distribution);
  out.label = argmax(out.distribution);
  return out;
}

inline Matrix<double> predict_af_all(const AfModel& model, const Matrix<double>& x, std::span<const std::size_t> rows) {
  Matrix<double> out(rows.size(), model.num_classes);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto p = predict_af(model, x.row(rows[r]));
    std::copy(p.distribution.begin(), p.distribution.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace af
