#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "af/cart.hpp"
#include "af/core.hpp"
#include "af/weights.hpp"

namespace af {

enum class RewardVariant { hard, soft, threshold_soft, euclidean, kl, nce };

inline constexpr RewardVariant kAllRewardVariants[] = {RewardVariant::hard,      RewardVariant::soft,
                                                       RewardVariant::threshold_soft, RewardVariant::euclidean,
                                                       RewardVariant::kl,        RewardVariant::nce};

inline std::string_view to_string(RewardVariant v) {
  switch (v) {
    case RewardVariant::hard: return "hard";
    case RewardVariant::soft: return "soft";
    case RewardVariant::threshold_soft: return "threshold_soft";
    case RewardVariant::euclidean: return "euclidean";
    case RewardVariant::kl: return "kl";
    case RewardVariant::nce: return "nce";
  }
  return "?";
}

inline RewardVariant reward_variant_from_string(std::string_view s) {
  for (auto v : kAllRewardVariants)
    if (to_string(v) == s) return v;
  throw Error("unknown reward variant '" + std::string(s) + "'");
}

struct RewardParams {
  double alpha = 0.5;         // threshold for threshold_soft
  double prob_floor = 1e-6;   // clamp for the log-based variants

  friend bool operator==(const RewardParams&, const RewardParams&) = default;
};

/// Rows = instances, columns = candidate weight vectors.
struct RewardMatrix {
  Matrix<double> values;
  RewardVariant variant = RewardVariant::hard;
};

/// P(x, w) = sum_j w_j f_j(x); `model_rows` holds m rows of K probabilities.
inline void aggregate(std::span<const double> model_rows, std::span<const double> w, std::span<double> out) {
  const std::size_t m = w.size();
  const std::size_t k = out.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const double wj = w[j];
    if (wj == 0.0) continue;
    for (std::size_t c = 0; c < k; ++c) out[c] += wj * model_rows[j * k + c];
  }
}

inline std::vector<double> aggregate(std::span<const double> model_rows, const WeightVector& w) {
  std::vector<double> out(model_rows.size() / w.size());
  aggregate(model_rows, w.w, out);
  return out;
}

/// Reward of aggregated distribution `p` for true class `y`.
inline double reward_value(std::span<const double> p, std::size_t y, RewardVariant variant, const RewardParams& params) {
  const std::size_t k = p.size();
  switch (variant) {
    case RewardVariant::hard: return argmax(p) == y ? 1.0 : 0.0;
    case RewardVariant::soft: return p[y];
    case RewardVariant::threshold_soft: return p[y] >= params.alpha ? p[y] : 0.0;
    case RewardVariant::euclidean: {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = p[c] - (c == y ? 1.0 : 0.0);
        s += d * d;
      }
      return 1.0 / (std::sqrt(s) + 1.0);
    }
    case RewardVariant::kl: {
      // Target e_y clamped to [floor, 1] and renormalised so the divergence stays finite.
      const double eps = params.prob_floor;
      const double norm = 1.0 + static_cast<double>(k - 1) * eps;
      double d = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        if (p[c] <= 0.0) continue;
        const double target = (c == y ? 1.0 : eps) / norm;
        d += p[c] * std::log(p[c] / target);
      }
      return 1.0 / (std::max(d, 0.0) + 1.0);
    }
    case RewardVariant::nce: return std::log(std::max(p[y], params.prob_floor));
  }
  throw std::invalid_argument("reward_value: unknown variant");
}

/// R[i][t] for every instance of `f` and every candidate in `candidates`.
inline RewardMatrix compute_reward_matrix(const ProbaTensor& f, std::span<const std::size_t> labels,
                                          const std::vector<WeightVector>& candidates, RewardVariant variant,
                                          const RewardParams& params = {}) {
  if (params.alpha < 0.0 || params.alpha > 1.0) throw std::invalid_argument("reward alpha must lie in [0, 1]");
  if (!(params.prob_floor > 0.0) || params.prob_floor > 0.01)
    throw std::invalid_argument("reward probability floor must lie in (0, 0.01]");
  if (labels.size() != f.instances()) throw std::invalid_argument("compute_reward_matrix: label count mismatch");
  RewardMatrix r;
  r.variant = variant;
  r.values = Matrix<double>(f.instances(), candidates.size());
  std::vector<double> p(f.classes());
  for (std::size_t i = 0; i < f.instances(); ++i) {
    const auto rows = f.instance(i);
    for (std::size_t t = 0; t < candidates.size(); ++t) {
      aggregate(rows, candidates[t].w, p);
      r.values(i, t) = reward_value(p, labels[i], variant, params);
    }
  }
  return r;
}

}  // namespace af
