#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "af/pipeline.hpp"

namespace af {

inline constexpr int kModelFormatVersion = 1;

using Json = nlohmann::json;

inline Json config_to_json(const AfConfig& c) {
  Json j;
  j["reward"] = std::string(to_string(c.reward));
  j["alpha"] = c.reward_params.alpha;
  j["prob_floor"] = c.reward_params.prob_floor;
  j["feature_mode"] = std::string(to_string(c.feature_mode));
  j["data_filter"] = std::string(to_string(c.data_filter));
  j["num_trees"] = c.num_trees;
  j["cart_depth"] = c.cart_depth;
  j["policy_depth"] = c.policy.depth_limit;
  j["min_leaf"] = c.policy.min_leaf;
  j["split_penalty"] = c.policy.split_penalty;
  j["big_m"] = c.generation.big_m;
  j["epsilon"] = c.generation.epsilon;
  j["min_gap"] = c.generation.min_gap;
  j["max_gap"] = c.generation.max_gap;
  j["time_limit"] = c.generation.time_limit;
  j["node_limit"] = c.generation.node_limit;
  j["max_rounds"] = c.generation.max_rounds;
  j["top_k"] = c.top_k;
  j["max_iterations"] = c.max_iterations;
  j["seed"] = c.seed;
  j["search_configurations"] = c.search_configurations;
  j["generate_candidates"] = c.generate_candidates;
  return j;
}

/// Overwrites the fields present in `j`; unknown keys are rejected.
inline void apply_config_json(const Json& j, AfConfig& c) {
  if (!j.is_object()) throw Error("configuration must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "reward") c.reward = reward_variant_from_string(v.get<std::string>());
      else if (key == "alpha") c.reward_params.alpha = v.get<double>();
      else if (key == "prob_floor") c.reward_params.prob_floor = v.get<double>();
      else if (key == "feature_mode") c.feature_mode = feature_mode_from_string(v.get<std::string>());
      else if (key == "data_filter") c.data_filter = data_filter_from_string(v.get<std::string>());
      else if (key == "num_trees") c.num_trees = v.get<std::size_t>();
      else if (key == "cart_depth") c.cart_depth = v.get<std::size_t>();
      else if (key == "policy_depth") c.policy.depth_limit = v.get<std::size_t>();
      else if (key == "min_leaf") c.policy.min_leaf = v.get<std::size_t>();
      else if (key == "split_penalty") c.policy.split_penalty = v.get<double>();
      else if (key == "big_m") c.generation.big_m = v.get<double>();
      else if (key == "epsilon") c.generation.epsilon = v.get<double>();
      else if (key == "min_gap") c.generation.min_gap = v.get<double>();
      else if (key == "max_gap") c.generation.max_gap = v.get<double>();
      else if (key == "time_limit") c.generation.time_limit = v.get<double>();
      else if (key == "node_limit") c.generation.node_limit = v.get<std::size_t>();
      else if (key == "max_rounds") c.generation.max_rounds = v.get<int>();
      else if (key == "top_k") c.top_k = v.get<std::size_t>();
      else if (key == "max_iterations") c.max_iterations = v.get<std::size_t>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "search_configurations") c.search_configurations = v.get<bool>();
      else if (key == "generate_candidates") c.generate_candidates = v.get<bool>();
      else throw Error("unknown configuration key '" + key + "'");
    }
  } catch (const Json::exception& e) {
    throw Error(std::string("bad configuration value: ") + e.what());
  }
}

inline AfConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open configuration file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("configuration file '" + path + "' is not valid JSON: " + e.what());
  }
  AfConfig c;
  apply_config_json(j, c);
  return c;
}

namespace detail {

inline Json schema_to_json(const FeatureSchema& s) {
  Json cols = Json::array();
  for (const auto& c : s.columns) {
    Json jc;
    jc["name"] = c.name;
    jc["kind"] = c.kind == ColumnKind::numeric ? "numeric" : "categorical";
    jc["categories"] = c.categories;
    jc["fill"] = c.fill ? Json(*c.fill) : Json(nullptr);
    jc["fill_category"] = c.fill_category ? Json(*c.fill_category) : Json(nullptr);
    cols.push_back(std::move(jc));
  }
  return {{"columns", cols}, {"feature_names", s.feature_names}, {"target", s.target}, {"class_labels", s.class_labels}};
}

inline FeatureSchema schema_from_json(const Json& j) {
  FeatureSchema s;
  for (const auto& jc : j.at("columns")) {
    SourceColumn c;
    c.name = jc.at("name").get<std::string>();
    const auto kind = jc.at("kind").get<std::string>();
    if (kind != "numeric" && kind != "categorical") throw Error("model file: unknown column kind '" + kind + "'");
    c.kind = kind == "numeric" ? ColumnKind::numeric : ColumnKind::categorical;
    c.categories = jc.at("categories").get<std::vector<std::string>>();
    if (!jc.at("fill").is_null()) c.fill = jc.at("fill").get<double>();
    if (!jc.at("fill_category").is_null()) c.fill_category = jc.at("fill_category").get<std::string>();
    s.columns.push_back(std::move(c));
  }
  s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  s.target = j.at("target").get<std::string>();
  s.class_labels = j.at("class_labels").get<std::vector<std::string>>();
  return s;
}

inline Json weights_to_json(const std::vector<WeightVector>& pool) {
  Json out = Json::array();
  for (const auto& w : pool) out.push_back(w.w);
  return out;
}

inline std::vector<WeightVector> weights_from_json(const Json& j) {
  std::vector<WeightVector> out;
  for (const auto& w : j) out.emplace_back(w.get<std::vector<double>>());
  return out;
}

}  // namespace detail

inline Json model_to_json(const AfModel& model) {
  Json j;
  j["format_version"] = kModelFormatVersion;
  j["config"] = config_to_json(model.config);
  j["schema"] = detail::schema_to_json(model.schema);
  j["num_classes"] = model.num_classes;
  j["num_features"] = model.num_features;

  Json trees = Json::array();
  for (std::size_t t = 0; t < model.ensemble.size(); ++t) {
    Json nodes = Json::array();
    for (const auto& n : model.ensemble.trees[t].nodes) {
      if (n.is_leaf()) nodes.push_back({{"distribution", n.distribution}});
      else nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    trees.push_back({{"nodes", nodes}, {"features", model.ensemble.feature_subsets[t]},
                     {"max_depth", model.ensemble.trees[t].max_depth}});
  }
  j["ensemble"] = trees;

  j["weights"] = {{"candidates", detail::weights_to_json(model.weights.candidates)},
                  {"history", detail::weights_to_json(model.weights.history)}};

  Json pnodes = Json::array();
  for (const auto& n : model.tree.nodes) {
    if (n.is_leaf()) pnodes.push_back({{"treatment", n.treatment}});
    else pnodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
  }
  j["policy_tree"] = {{"nodes", pnodes},
                      {"depth_limit", model.tree.options.depth_limit},
                      {"min_leaf", model.tree.options.min_leaf},
                      {"split_penalty", model.tree.options.split_penalty}};

  Json iters = Json::array();
  for (const auto& r : model.report.iterations)
    iters.push_back({{"iteration", r.iteration}, {"pool_size", r.pool_size}, {"new_candidates", r.new_candidates},
                     {"leaves", r.leaves}, {"objective", r.objective}, {"val_score", r.val_score}});
  j["training"] = {{"iterations", iters},
                   {"retained_iteration", model.report.retained_iteration},
                   {"stabilised", model.report.stabilised}};
  return j;
}

inline AfModel model_from_json(const Json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw Error("model file: unsupported format_version " + j.at("format_version").dump());
    AfModel m;
    apply_config_json(j.at("config"), m.config);
    m.schema = detail::schema_from_json(j.at("schema"));
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.num_features = j.at("num_features").get<std::size_t>();
    m.ensemble.num_classes = m.num_classes;
    m.ensemble.num_features = m.num_features;
    for (const auto& jt : j.at("ensemble")) {
      CartTree tree;
      tree.num_classes = m.num_classes;
      tree.max_depth = jt.at("max_depth").get<std::size_t>();
      for (const auto& jn : jt.at("nodes")) {
        CartNode n;
        if (jn.contains("distribution")) {
          n.distribution = jn.at("distribution").get<std::vector<double>>();
          if (n.distribution.size() != m.num_classes) throw Error("model file: leaf distribution has the wrong size");
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<std::size_t>();
          n.right = jn.at("right").get<std::size_t>();
        }
        tree.nodes.push_back(std::move(n));
      }
      for (const auto& n : tree.nodes)
        if (!n.is_leaf() && (n.left >= tree.nodes.size() || n.right >= tree.nodes.size() ||
                             static_cast<std::size_t>(n.feature) >= m.num_features))
          throw Error("model file: malformed tree");
      if (tree.nodes.empty()) throw Error("model file: empty tree");
      m.ensemble.trees.push_back(std::move(tree));
      m.ensemble.feature_subsets.push_back(jt.at("features").get<IndexList>());
    }
    m.weights.candidates = detail::weights_from_json(j.at("weights").at("candidates"));
    m.weights.history = detail::weights_from_json(j.at("weights").at("history"));
    const auto& jp = j.at("policy_tree");
    m.tree.options.depth_limit = jp.at("depth_limit").get<std::size_t>();
    m.tree.options.min_leaf = jp.at("min_leaf").get<std::size_t>();
    m.tree.options.split_penalty = jp.at("split_penalty").get<double>();
    const std::size_t policy_cols =
        m.num_features + (m.config.feature_mode == FeatureMode::x_plus_preds ? m.ensemble.size() * m.num_classes : 0);
    for (const auto& jn : jp.at("nodes")) {
      PolicyNode n;
      if (jn.contains("treatment")) {
        n.treatment = jn.at("treatment").get<std::size_t>();
        if (n.treatment >= m.weights.candidates.size()) throw Error("model file: leaf treatment outside W");
      } else {
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<std::size_t>();
        n.right = jn.at("right").get<std::size_t>();
        if (static_cast<std::size_t>(n.feature) >= policy_cols) throw Error("model file: policy split on unknown column");
      }
      m.tree.nodes.push_back(n);
    }
    if (m.tree.nodes.empty()) throw Error("model file: empty policy tree");
    for (const auto& n : m.tree.nodes)
      if (!n.is_leaf() && (n.left >= m.tree.nodes.size() || n.right >= m.tree.nodes.size()))
        throw Error("model file: malformed policy tree");
    for (const auto& w : m.weights.candidates)
      if (w.size() != m.ensemble.size()) throw Error("model file: weight vector length differs from the tree count");
    if (j.contains("training")) {
      const auto& jt = j.at("training");
      for (const auto& r : jt.at("iterations"))
        m.report.iterations.push_back({r.at("iteration").get<std::size_t>(), r.at("pool_size").get<std::size_t>(),
                                       r.at("new_candidates").get<std::size_t>(), r.at("leaves").get<std::size_t>(),
                                       r.at("objective").get<double>(), r.at("val_score").get<double>()});
      m.report.retained_iteration = jt.at("retained_iteration").get<std::size_t>();
      m.report.stabilised = jt.at("stabilised").get<bool>();
    }
    return m;
  } catch (const Json::exception& e) {
    throw Error(std::string("model file: ") + e.what());
  }
}

inline std::string serialize_model(const AfModel& model) { return model_to_json(model).dump(1) + "\n"; }

inline void save_model(const AfModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out << serialize_model(model);
  if (!out) throw Error("failed writing model file '" + path + "'");
}

inline AfModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace af
