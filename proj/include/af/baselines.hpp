#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "af/cart.hpp"
#include "af/core.hpp"
#include "af/dataset.hpp"
#include "af/rewards.hpp"

namespace af {

namespace detail {

inline void require_oob(const BaggedEnsemble& ens) {
  for (std::size_t j = 0; j < ens.size(); ++j)
    if (ens.oob[j].empty())
      throw Error("tree " + std::to_string(j) +
                  " has no out-of-bag rows; lower the instance sampling ratio or add training rows");
}

inline std::vector<double> normalise(std::vector<double> raw) {
  const double sum = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (!(sum > 0.0) || !std::isfinite(sum)) return std::vector<double>(raw.size(), 1.0 / static_cast<double>(raw.size()));
  for (auto& v : raw) v /= sum;
  return raw;
}

// exp(a_j) / sum_r exp(a_r) without overflow.
inline std::vector<double> softmax(const std::vector<double>& logs) {
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> w(logs.size());
  for (std::size_t j = 0; j < logs.size(); ++j) w[j] = std::exp(logs[j] - top);
  return normalise(std::move(w));
}

}  // namespace detail

/// Per-tree OOB accuracy (argmax of the tree's distribution, ties to the
/// lowest class).
inline std::vector<double> oob_accuracy(const BaggedEnsemble& ens, const Dataset& ds) {
  detail::require_oob(ens);
  std::vector<double> acc(ens.size());
  for (std::size_t j = 0; j < ens.size(); ++j) {
    std::size_t correct = 0;
    for (auto i : ens.oob[j]) correct += argmax(ens.trees[j].predict_proba(ds.features.row(i))) == ds.labels[i];
    acc[j] = static_cast<double>(correct) / static_cast<double>(ens.oob[j].size());
  }
  return acc;
}

/// Per-tree OOB prediction error: mean |f_j1(x) - y| on a binary task.
inline std::vector<double> oob_prediction_error(const BaggedEnsemble& ens, const Dataset& ds) {
  if (ens.num_classes != 2 || ds.num_classes != 2) throw Error("wRF weighting is defined for binary tasks only");
  detail::require_oob(ens);
  std::vector<double> tpe(ens.size());
  for (std::size_t j = 0; j < ens.size(); ++j) {
    double s = 0.0;
    for (auto i : ens.oob[j])
      s += std::abs(ens.trees[j].predict_proba(ds.features.row(i))[1] - static_cast<double>(ds.labels[i]));
    tpe[j] = s / static_cast<double>(ens.oob[j].size());
  }
  return tpe;
}

/// OOB accuracies normalised to sum to one.
inline std::vector<double> twrf_weights_from(const std::vector<double>& accuracy) {
  return detail::normalise(accuracy);
}

inline std::vector<double> twrf_weights(const BaggedEnsemble& ens, const Dataset& ds) {
  return twrf_weights_from(oob_accuracy(ens, ds));
}

enum class WrfForm { one_minus, exp_inv, pow };

struct WrfVariant {
  WrfForm form = WrfForm::one_minus;
  int power = 1;  // lambda for the pow form, 1..5

  std::string name() const {
    switch (form) {
      case WrfForm::one_minus: return "one_minus";
      case WrfForm::exp_inv: return "exp_inv";
      case WrfForm::pow: return "pow" + std::to_string(power);
    }
    return "?";
  }
};

inline std::vector<WrfVariant> all_wrf_variants() {
  std::vector<WrfVariant> out{{WrfForm::one_minus, 1}, {WrfForm::exp_inv, 1}};
  for (int l = 1; l <= 5; ++l) out.push_back({WrfForm::pow, l});
  return out;
}

inline constexpr double kTpeFloor = 1e-6;

/// Weights from tree prediction errors: 1 - tPE, exp(1/tPE) or (1/tPE)^lambda,
/// normalised. The last two are computed in the log domain.
inline std::vector<double> wrf_weights_from(const std::vector<double>& tpe, const WrfVariant& v) {
  if (tpe.empty()) throw std::invalid_argument("wrf weights: no trees");
  std::vector<double> logs(tpe.size());
  switch (v.form) {
    case WrfForm::one_minus: {
      std::vector<double> raw(tpe.size());
      for (std::size_t j = 0; j < tpe.size(); ++j) raw[j] = std::max(0.0, 1.0 - std::max(tpe[j], kTpeFloor));
      return detail::normalise(std::move(raw));
    }
    case WrfForm::exp_inv:
      for (std::size_t j = 0; j < tpe.size(); ++j) logs[j] = 1.0 / std::max(tpe[j], kTpeFloor);
      return detail::softmax(logs);
    case WrfForm::pow:
      if (v.power < 1 || v.power > 5) throw std::invalid_argument("wrf weights: power must lie in 1..5");
      for (std::size_t j = 0; j < tpe.size(); ++j) logs[j] = -v.power * std::log(std::max(tpe[j], kTpeFloor));
      return detail::softmax(logs);
  }
  throw std::invalid_argument("wrf weights: unknown form");
}

inline std::vector<double> wrf_tpe_weights(const BaggedEnsemble& ens, const Dataset& ds, const WrfVariant& v) {
  return wrf_weights_from(oob_prediction_error(ens, ds), v);
}

/// Cesaro weights: trees ranked by ascending OOB misclassification rate
/// (ties by index); rank r (0-based) gets sum_{q=r+1..m} 1/q, normalised by m.
inline std::vector<double> crf_weights_from(const std::vector<double>& oob_error) {
  const std::size_t m = oob_error.size();
  if (m == 0) throw std::invalid_argument("crf weights: no trees");
  std::vector<std::size_t> rank_order(m);
  std::iota(rank_order.begin(), rank_order.end(), 0);
  std::stable_sort(rank_order.begin(), rank_order.end(),
                   [&](std::size_t a, std::size_t b) { return oob_error[a] < oob_error[b]; });
  std::vector<double> w(m);
  // With L = lcm(1..m) the tail sums are integers, and one division of exact
  // integers gives the correctly rounded weight. Past 2^53 fall back to
  // floating-point tails.
  constexpr std::uint64_t kExact = std::uint64_t{1} << 53;
  std::uint64_t lcm = 1;
  bool exact = true;
  for (std::uint64_t q = 2; q <= m && exact; ++q) {
    const std::uint64_t step = q / std::gcd(lcm, q);
    exact = lcm <= kExact / step / m;
    lcm *= exact ? step : 1;
  }
  if (exact) {
    std::uint64_t tail = 0;
    for (std::size_t r = m; r-- > 0;) {
      tail += lcm / (r + 1);
      w[rank_order[r]] = static_cast<double>(tail) / static_cast<double>(lcm * m);
    }
    return w;
  }
  double tail = 0.0;
  for (std::size_t r = m; r-- > 0;) {
    tail += 1.0 / static_cast<double>(r + 1);
    w[rank_order[r]] = tail / static_cast<double>(m);
  }
  return w;
}

inline std::vector<double> crf_weights(const BaggedEnsemble& ens, const Dataset& ds) {
  auto acc = oob_accuracy(ens, ds);
  for (auto& a : acc) a = 1.0 - a;
  return crf_weights_from(acc);
}

inline std::vector<double> equal_weights(std::size_t m) { return std::vector<double>(m, 1.0 / static_cast<double>(m)); }

/// sum_j w_j f_j(x) over the first w.size() trees.
inline std::vector<double> static_predict(const BaggedEnsemble& ens, std::span<const double> w, std::span<const double> x) {
  if (w.size() > ens.size()) throw std::invalid_argument("static_predict: more weights than trees");
  std::vector<double> out(ens.num_classes, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (w[j] == 0.0) continue;
    const auto dist = ens.trees[j].predict_proba(x);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += w[j] * dist[k];
  }
  return out;
}

}  // namespace af
