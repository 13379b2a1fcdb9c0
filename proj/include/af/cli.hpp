#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "af/benchmark.hpp"
#include "af/dataset.hpp"
#include "af/model_io.hpp"
#include "af/pipeline.hpp"

namespace af {

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!trim(item).empty()) out.emplace_back(trim(item));
  return out;
}

struct CommonTrainFlags {
  std::uint64_t seed = 0;
  std::string config;
  std::size_t depth = 10;
  std::size_t trees = 0;
  bool impute = false;
};

inline void add_common_flags(CLI::App* cmd, CommonTrainFlags& f) {
  cmd->add_option("--seed", f.seed, "Partition, bagging and weight-initialisation seed")->capture_default_str();
  cmd->add_option("--config", f.config, "JSON configuration file; flags override its values");
  cmd->add_option("--depth", f.depth, "Maximum depth of each base-learner CART")
      ->check(CLI::IsMember({10, 100}))
      ->capture_default_str();
  cmd->add_option("--trees", f.trees, "Number of base learners m (0: 50 for binary, 100 for multiclass)")
      ->capture_default_str();
  cmd->add_flag("--impute", f.impute, "Fill missing cells (column mean or mode) instead of rejecting them");
}

inline AfConfig resolve_config(const CLI::App* cmd, const CommonTrainFlags& f) {
  AfConfig cfg = f.config.empty() ? AfConfig{} : load_config_file(f.config);
  if (f.config.empty() || cmd->count("--seed")) cfg.seed = f.seed;
  if (f.config.empty() || cmd->count("--depth")) cfg.cart_depth = f.depth;
  if (f.config.empty() || cmd->count("--trees")) cfg.num_trees = f.trees;
  return cfg;
}

inline std::string fmt_metric(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

}  // namespace detail

/// Entry point shared by the af executable and the tests. Returns the exit
/// code: 0 success, 1 user error, 2 internal error.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive Forests: per-instance ensemble weighting with a policy tree", "af"};
  app.require_subcommand(1);

  detail::CommonTrainFlags train_flags;
  std::string train_data, train_target, train_out = "model.json";
  auto* train = app.add_subcommand("train", "Train a model from a CSV file and write it as JSON");
  train->add_option("--data", train_data, "Training CSV file")->required();
  train->add_option("--target", train_target, "Name of the class column")->required();
  train->add_option("--out", train_out, "Model file to write")->capture_default_str();
  detail::add_common_flags(train, train_flags);

  std::string predict_model, predict_data, predict_out = "predictions.csv";
  auto* predict = app.add_subcommand("predict", "Score a CSV file with a trained model");
  predict->add_option("--model", predict_model, "Model file written by train")->required();
  predict->add_option("--data", predict_data, "CSV file containing every training feature column")->required();
  predict->add_option("--out", predict_out, "Prediction CSV to write")->capture_default_str();

  detail::CommonTrainFlags bench_flags;
  std::string bench_dir, bench_algorithms = "rf,twrf,wrf,crf,af", bench_out = ".", bench_grid = "100,300,1000";
  std::size_t bench_seeds = 5, bench_workers = 1;
  auto* bench = app.add_subcommand("benchmark", "Compare AF with the RF baselines on a directory of datasets");
  bench->add_option("--data-dir", bench_dir, "Directory of CSV files, each with a <name>.target sidecar")->required();
  bench->add_option("--algorithms", bench_algorithms, "Comma-separated subset of rf,twrf,wrf,crf,af")
      ->capture_default_str();
  bench->add_option("--seeds", bench_seeds, "Number of seeds (0..n-1)")->capture_default_str();
  bench->add_option("--out-dir", bench_out, "Directory for benchmark_rows.csv and benchmark_aggregate.csv")
      ->capture_default_str();
  bench->add_option("--tree-grid", bench_grid, "Baseline tree counts tried on data_val")->capture_default_str();
  bench->add_option("--workers", bench_workers, "Maximum parallel benchmark cells")->capture_default_str();
  detail::add_common_flags(bench, bench_flags);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*train) {
      const AfConfig cfg = detail::resolve_config(train, train_flags);
      IngestOptions ingest;
      ingest.impute_mean = train_flags.impute;
      const Dataset ds = load_csv(train_data, train_target, ingest);
      const AfModel model = train_af(ds, cfg);
      save_model(model, train_out);
      const DataSplit split = partition(ds, cfg.seed);
      const std::string metric = ds.num_classes == 2 ? "auc" : "ovr_auc";
      auto score = [&](const IndexList& rows) {
        return classification_score(predict_af_all(model, ds.features, rows), detail::pick(ds.labels, rows));
      };
      out << "config: reward=" << to_string(model.config.reward)
          << " features=" << to_string(model.config.feature_mode)
          << " filter=" << to_string(model.config.data_filter) << "\n";
      out << "iterations: " << model.report.iterations.size() << " (retained " << model.report.retained_iteration
          << ", |W| = " << model.weights.size() << ", leaves = " << model.tree.leaves().size() << ")\n";
      out << "data_val " << metric << ": " << detail::fmt_metric(score(split.val)) << "\n";
      out << "data_test " << metric << ": " << detail::fmt_metric(score(split.test)) << "\n";
      out << "model written to " << train_out << "\n";
      return 0;
    }
    if (*predict) {
      const AfModel model = load_model(predict_model);
      const EncodedRows rows = encode_csv(predict_data, model.schema);
      std::ofstream file(predict_out, std::ios::binary);
      if (!file) throw Error("cannot write '" + predict_out + "'");
      file << "row,predicted_class";
      for (std::size_t k = 0; k < model.num_classes; ++k) file << ",score_" << k;
      file << '\n';
      for (std::size_t i = 0; i < rows.features.rows(); ++i) {
        const auto p = predict_af(model, rows.features.row(i));
        file << i << ',' << model.schema.class_labels[p.label];
        for (double s : p.distribution) file << ',' << detail::format_number(s);
        file << '\n';
      }
      out << "wrote " << rows.features.rows() << " predictions to " << predict_out << "\n";
      return 0;
    }
    if (*bench) {
      std::vector<Algorithm> algorithms;
      for (const auto& a : detail::split_list(bench_algorithms)) algorithms.push_back(algorithm_from_string(a));
      if (algorithms.empty()) throw Error("--algorithms is empty");
      BenchmarkOptions options;
      options.af = detail::resolve_config(bench, bench_flags);
      options.workers = bench_workers;
      options.tree_grid.clear();
      for (const auto& t : detail::split_list(bench_grid)) {
        std::size_t v = 0;
        try {
          v = std::stoul(t);
        } catch (const std::exception&) {
          throw Error("--tree-grid entries must be positive integers, got '" + t + "'");
        }
        if (v == 0) throw Error("--tree-grid entries must be positive integers, got '" + t + "'");
        options.tree_grid.push_back(v);
      }
      namespace fs = std::filesystem;
      if (!fs::is_directory(bench_dir)) throw Error("--data-dir '" + bench_dir + "' is not a directory");
      std::vector<fs::path> csvs;
      for (const auto& entry : fs::directory_iterator(bench_dir))
        if (entry.path().extension() == ".csv") csvs.push_back(entry.path());
      std::sort(csvs.begin(), csvs.end());
      std::vector<BenchmarkDataset> datasets;
      IngestOptions ingest;
      ingest.impute_mean = bench_flags.impute;
      for (const auto& csv : csvs) {
        fs::path sidecar = csv;
        sidecar.replace_extension(".target");
        std::ifstream in(sidecar);
        if (!in) {
          logger().warn("skipping {}: no {} sidecar", csv.string(), sidecar.filename().string());
          continue;
        }
        std::string target;
        std::getline(in, target);
        datasets.push_back({csv.stem().string(), load_csv(csv.string(), std::string(detail::trim(target)), ingest)});
      }
      if (datasets.empty()) throw Error("no CSV file with a .target sidecar in '" + bench_dir + "'");
      std::vector<std::uint64_t> seeds(bench_seeds);
      std::iota(seeds.begin(), seeds.end(), 0);
      if (seeds.empty()) throw Error("--seeds must be at least 1");
      const BenchmarkReport report = benchmark(datasets, algorithms, seeds, options);
      fs::create_directories(bench_out);
      std::ofstream rows_csv(fs::path(bench_out) / "benchmark_rows.csv", std::ios::binary);
      std::ofstream agg_csv(fs::path(bench_out) / "benchmark_aggregate.csv", std::ios::binary);
      if (!rows_csv || !agg_csv) throw Error("cannot write reports into '" + bench_out + "'");
      write_rows_csv(report, rows_csv);
      write_aggregate_csv(report, agg_csv);
      out << std::left << std::setw(24) << "dataset" << std::setw(10) << "algorithm" << std::setw(12) << "mean"
          << std::setw(12) << "std" << "win\n";
      for (const auto& r : report.aggregates)
        out << std::setw(24) << r.dataset << std::setw(10) << r.algorithm << std::setw(12) << detail::fmt_metric(r.mean)
            << std::setw(12) << detail::fmt_metric(r.std) << r.wins << "\n";
      for (const auto& f : report.failures) err << "failed: " << f << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace af
