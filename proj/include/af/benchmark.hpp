#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "af/baselines.hpp"
#include "af/cart.hpp"
#include "af/dataset.hpp"
#include "af/log.hpp"
#include "af/metrics.hpp"
#include "af/pipeline.hpp"

namespace af {

enum class Algorithm { rf, twrf, wrf, crf, af };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::rf, Algorithm::twrf, Algorithm::wrf, Algorithm::crf,
                                               Algorithm::af};

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::rf: return "rf";
    case Algorithm::twrf: return "twrf";
    case Algorithm::wrf: return "wrf";
    case Algorithm::crf: return "crf";
    case Algorithm::af: return "af";
  }
  return "?";
}

inline Algorithm algorithm_from_string(std::string_view s) {
  for (auto a : kAllAlgorithms)
    if (to_string(a) == s) return a;
  throw Error("unknown algorithm '" + std::string(s) + "' (choose from rf, twrf, wrf, crf, af)");
}

struct BenchmarkDataset {
  std::string name;
  Dataset data;
};

struct BenchmarkRow {
  std::string dataset;
  std::string algorithm;
  std::uint64_t seed;
  std::string metric;
  double value;
};

struct AggregateRow {
  std::string dataset;  // "ALL" for the across-dataset summary
  std::string algorithm;
  double mean;
  double std;
  std::size_t wins;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  std::vector<AggregateRow> aggregates;
  std::vector<std::string> failures;
};

struct BenchmarkOptions {
  AfConfig af;                                       // seed is replaced per cell
  std::vector<std::size_t> tree_grid{100, 300, 1000};  // baseline tree counts tried on data_val
  std::size_t workers = 1;
};

/// Test-set score for one baseline algorithm, with the tree count (and the
/// wRF form) chosen on data_val. Base learners come from the same bagging
/// scheme as AF, trained on data_single and data_opt together.
class BaselineSuite {
 public:
  BaselineSuite(const Dataset& ds, const DataSplit& split, const AfConfig& af, const std::vector<std::size_t>& grid,
                std::uint64_t seed)
      : ds_(ds), grid_(grid) {
    if (grid_.empty()) throw std::invalid_argument("baseline tree grid is empty");
    IndexList train = split.single;
    train.insert(train.end(), split.opt.begin(), split.opt.end());
    std::sort(train.begin(), train.end());
    BaggingOptions bagging;
    bagging.num_trees = *std::max_element(grid_.begin(), grid_.end());
    bagging.cart.max_depth = af.cart_depth;
    ens_ = fit_bagged(ds, train, bagging, derive_seed(seed, 7));
    f_val_ = proba_tensor(ens_, ds.features, split.val);
    f_test_ = proba_tensor(ens_, ds.features, split.test);
    val_labels_ = detail::pick(ds.labels, split.val);
    test_labels_ = detail::pick(ds.labels, split.test);
  }

  double score(Algorithm a) {
    double best_val = -kInf;
    std::vector<double> best_w;
    for (auto t : grid_) {
      for (const auto& w : weights_for(a, t)) {
        const double v = eval(f_val_, val_labels_, w);
        if (v > best_val) {
          best_val = v;
          best_w = w;
        }
      }
    }
    return eval(f_test_, test_labels_, best_w);
  }

 private:
  // Candidate weight vectors over the first t trees.
  std::vector<std::vector<double>> weights_for(Algorithm a, std::size_t t) {
    switch (a) {
      case Algorithm::rf: return {equal_weights(t)};
      case Algorithm::twrf: return {twrf_weights_from(prefix(accuracy(), t))};
      case Algorithm::crf: {
        auto err = prefix(accuracy(), t);
        for (auto& e : err) e = 1.0 - e;
        return {crf_weights_from(err)};
      }
      case Algorithm::wrf: {
        std::vector<std::vector<double>> out;
        for (const auto& v : all_wrf_variants()) out.push_back(wrf_weights_from(prefix(tpe(), t), v));
        return out;
      }
      case Algorithm::af: break;
    }
    throw std::invalid_argument("BaselineSuite: not a baseline");
  }

  static std::vector<double> prefix(const std::vector<double>& v, std::size_t t) {
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(t)};
  }

  const std::vector<double>& accuracy() {
    if (acc_.empty()) acc_ = oob_accuracy(ens_, ds_);
    return acc_;
  }
  const std::vector<double>& tpe() {
    if (tpe_.empty()) tpe_ = oob_prediction_error(ens_, ds_);
    return tpe_;
  }

  static double eval(const ProbaTensor& f, const std::vector<std::size_t>& labels, const std::vector<double>& w) {
    Matrix<double> p(f.instances(), f.classes());
    for (std::size_t i = 0; i < f.instances(); ++i) {
      const auto all = f.instance(i);
      aggregate(all.first(w.size() * f.classes()), w, p.row(i));
    }
    return classification_score(p, labels);
  }

  const Dataset& ds_;
  std::vector<std::size_t> grid_;
  BaggedEnsemble ens_;
  ProbaTensor f_val_, f_test_;
  std::vector<std::size_t> val_labels_, test_labels_;
  std::vector<double> acc_, tpe_;
};

/// Test-set score of AF trained with `cfg` (whose seed picks the partition).
inline double af_test_score(const Dataset& ds, const AfConfig& cfg) {
  const AfModel model = train_af(ds, cfg);
  const DataSplit split = partition(ds, cfg.seed);
  return classification_score(predict_af_all(model, ds.features, split.test), detail::pick(ds.labels, split.test));
}

namespace detail {

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline void aggregate_report(BenchmarkReport& report, const std::vector<std::string>& datasets,
                             const std::vector<Algorithm>& algorithms) {
  std::map<std::string, double> overall_sum;
  std::map<std::string, std::size_t> overall_count, overall_wins;
  for (const auto& d : datasets) {
    std::vector<AggregateRow> rows;
    for (auto a : algorithms) {
      std::vector<double> values;
      for (const auto& r : report.rows)
        if (r.dataset == d && r.algorithm == to_string(a)) values.push_back(r.value);
      if (values.empty()) continue;
      double mean = 0.0;
      for (double v : values) mean += v;
      mean /= static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
      rows.push_back({d, std::string(to_string(a)), mean, sd, 0});
    }
    double top = -kInf;
    for (const auto& r : rows) top = std::max(top, r.mean);
    for (auto& r : rows) {
      r.wins = r.mean == top ? 1 : 0;
      overall_sum[r.algorithm] += r.mean;
      ++overall_count[r.algorithm];
      overall_wins[r.algorithm] += r.wins;
      report.aggregates.push_back(r);
    }
  }
  for (auto a : algorithms) {
    const std::string name(to_string(a));
    if (!overall_count[name]) continue;
    report.aggregates.push_back(
        {"ALL", name, overall_sum[name] / static_cast<double>(overall_count[name]), 0.0, overall_wins[name]});
  }
}

}  // namespace detail

/// Runs every (dataset, algorithm, seed) cell and aggregates mean, std and
/// wins per dataset (ties share the win) plus an "ALL" summary per algorithm.
/// Failed cells are logged and left out.
inline BenchmarkReport benchmark(const std::vector<BenchmarkDataset>& datasets, const std::vector<Algorithm>& algorithms,
                                 const std::vector<std::uint64_t>& seeds, const BenchmarkOptions& options = {}) {
  if (datasets.empty() || algorithms.empty()) throw Error("benchmark needs at least one dataset and one algorithm");
  struct Job {
    std::size_t d;
    std::size_t s;
  };
  std::vector<Job> jobs;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (std::size_t s = 0; s < seeds.size(); ++s) jobs.push_back({d, s});

  // results[d][a][s]
  std::vector<std::vector<std::vector<std::optional<double>>>> results(
      datasets.size(), std::vector<std::vector<std::optional<double>>>(algorithms.size(),
                                                                     std::vector<std::optional<double>>(seeds.size())));
  std::vector<std::string> failures(jobs.size() * algorithms.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job = next++; job < jobs.size(); job = next++) {
      const auto [d, s] = jobs[job];
      const Dataset& ds = datasets[d].data;
      const std::uint64_t seed = seeds[s];
      std::optional<BaselineSuite> suite;
      for (std::size_t a = 0; a < algorithms.size(); ++a) {
        try {
          if (algorithms[a] == Algorithm::af) {
            AfConfig cfg = options.af;
            cfg.seed = seed;
            results[d][a][s] = af_test_score(ds, cfg);
          } else {
            if (!suite) suite.emplace(ds, partition(ds, seed), options.af, options.tree_grid, seed);
            results[d][a][s] = suite->score(algorithms[a]);
          }
          logger().info("{} / {} / seed {}: {:.6f}", datasets[d].name, to_string(algorithms[a]), seed,
                        *results[d][a][s]);
        } catch (const std::exception& e) {
          failures[job * algorithms.size() + a] = datasets[d].name + " / " + std::string(to_string(algorithms[a])) +
                                                  " / seed " + std::to_string(seed) + ": " + e.what();
          logger().warn("benchmark cell failed: {}", failures[job * algorithms.size() + a]);
        }
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BenchmarkReport report;
  std::vector<std::string> names;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    names.push_back(datasets[d].name);
    const std::string metric = datasets[d].data.num_classes == 2 ? "auc" : "ovr_auc";
    for (std::size_t a = 0; a < algorithms.size(); ++a)
      for (std::size_t s = 0; s < seeds.size(); ++s)
        if (results[d][a][s])
          report.rows.push_back({datasets[d].name, std::string(to_string(algorithms[a])), seeds[s], metric,
                                 *results[d][a][s]});
  }
  for (auto& f : failures)
    if (!f.empty()) report.failures.push_back(std::move(f));
  detail::aggregate_report(report, names, algorithms);
  return report;
}

inline void write_rows_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "dataset,algorithm,seed,metric,value\n";
  for (const auto& r : report.rows)
    out << r.dataset << ',' << r.algorithm << ',' << r.seed << ',' << r.metric << ','
        << detail::format_number(r.value) << '\n';
}

inline void write_aggregate_csv(const BenchmarkReport& report, std::ostream& out) {
  out << "dataset,algorithm,mean,std,win\n";
  for (const auto& r : report.aggregates)
    out << r.dataset << ',' << r.algorithm << ',' << detail::format_number(r.mean) << ','
        << detail::format_number(r.std) << ',' << r.wins << '\n';
}

}  // namespace af
