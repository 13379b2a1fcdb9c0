#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "af/core.hpp"

namespace af {

/// Mann-Whitney AUC with midranks for tied scores. labels are 0/1 and both
/// classes must occur. The smaller of U+ and U- is divided out and the other
/// side taken as its complement, so auc(s, y) + auc(s, 1 - y) == 1 exactly.
inline double auc_binary(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_binary: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum keeps midranks integral.
  double twice_rank_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 1) throw std::invalid_argument("auc_binary: labels must be 0 or 1");
    n_pos += labels[i];
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("AUC needs both classes in the labels");
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double twice_mid = static_cast<double>(start + 1 + end);  // 2 * mean of ranks start+1..end
    for (std::size_t t = start; t < end; ++t)
      if (labels[order[t]] == 1) twice_rank_pos += twice_mid;
    start = end;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  const double pairs = np * nn;
  const double u_pos = (twice_rank_pos - np * (np + 1.0)) / 2.0;
  const double u_neg = pairs - u_pos;
  if (u_pos <= u_neg) return u_pos / pairs;
  return 1.0 - u_neg / pairs;
}

/// Mean one-vs-rest AUC over the K columns of `scores` (n x K).
inline double ovr_auc(const Matrix<double>& scores, std::span<const std::size_t> labels) {
  const std::size_t k = scores.cols();
  if (scores.rows() != labels.size()) throw std::invalid_argument("ovr_auc: size mismatch");
  std::vector<double> column(scores.rows());
  std::vector<std::size_t> is_class(scores.rows());
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    bool present = false;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      column[i] = scores(i, c);
      is_class[i] = labels[i] == c;
      present = present || labels[i] == c;
    }
    if (!present) throw Error("OvR AUC needs every class in the labels; class " + std::to_string(c) + " is absent");
    total += auc_binary(column, is_class);
  }
  return total / static_cast<double>(k);
}

inline double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size() || labels.empty()) throw std::invalid_argument("accuracy: bad sizes");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

/// AUC for K = 2 (column 1 as the score), OvR AUC otherwise. Falls back to
/// accuracy when some class is missing from `labels`.
inline double classification_score(const Matrix<double>& proba, std::span<const std::size_t> labels) {
  const std::size_t k = proba.cols();
  std::vector<bool> seen(k, false);
  for (auto y : labels) seen[y] = true;
  if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    if (k == 2) {
      std::vector<double> s(proba.rows());
      for (std::size_t i = 0; i < proba.rows(); ++i) s[i] = proba(i, 1);
      return auc_binary(s, labels);
    }
    return ovr_auc(proba, labels);
  }
  std::vector<std::size_t> pred(proba.rows());
  for (std::size_t i = 0; i < proba.rows(); ++i) pred[i] = argmax(proba.row(i));
  return accuracy(pred, labels);
}

}  // namespace af
