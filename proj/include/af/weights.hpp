#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "af/core.hpp"

namespace af {

/// A point on the probability simplex over the m base learners.
struct WeightVector {
  std::vector<double> w;

  WeightVector() = default;
  explicit WeightVector(std::vector<double> values) : w(std::move(values)) {}

  std::size_t size() const { return w.size(); }
  double operator[](std::size_t j) const { return w[j]; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kDedupTolerance = 1e-9;

inline bool on_simplex(std::span<const double> w, double tol = kSimplexTolerance) {
  if (w.empty()) return false;
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= -tol)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

inline double distance(const WeightVector& a, const WeightVector& b) { return distance(a.w, b.w); }

/// Clips negatives to zero and renormalises. Throws if nothing positive remains.
inline WeightVector project_to_simplex(std::span<const double> raw) {
  std::vector<double> w(raw.begin(), raw.end());
  double sum = 0.0;
  for (auto& v : w) {
    if (!(v > 0.0)) v = 0.0;
    sum += v;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("project_to_simplex: no positive mass");
  for (auto& v : w) v /= sum;
  return WeightVector(std::move(w));
}

/// Candidate pool W plus the history of vectors that a policy tree has used.
struct WeightSet {
  std::vector<WeightVector> candidates;
  std::vector<WeightVector> history;

  std::size_t size() const { return candidates.size(); }
  bool empty() const { return candidates.empty(); }

  friend bool operator==(const WeightSet&, const WeightSet&) = default;
};

inline bool contains(const std::vector<WeightVector>& pool, const WeightVector& v, double tol = kDedupTolerance) {
  return std::any_of(pool.begin(), pool.end(), [&](const WeightVector& u) { return distance(u, v) <= tol; });
}

inline std::size_t index_of(const std::vector<WeightVector>& pool, const WeightVector& v,
                            double tol = kDedupTolerance) {
  for (std::size_t t = 0; t < pool.size(); ++t)
    if (distance(pool[t], v) <= tol) return t;
  return pool.size();
}

/// `size` i.i.d. uniform draws from the simplex (normalised exponentials).
/// Duplicates are redrawn a bounded number of times, then dropped, so the
/// degenerate m = 1 simplex yields a single vector.
inline WeightSet init_uniform(std::size_t m, std::size_t size, std::uint64_t seed) {
  if (m < 1 || size < 1) throw std::invalid_argument("init_uniform: m and size must be positive");
  Rng rng(derive_seed(seed, 0xa11ce));
  WeightSet ws;
  auto draw = [&] {
    std::vector<double> w(m);
    double sum = 0.0;
    for (auto& v : w) {
      v = -std::log1p(-rng.uniform());
      sum += v;
    }
    for (auto& v : w) v /= sum;
    return WeightVector(std::move(w));
  };
  constexpr int kRedraws = 100;
  for (std::size_t s = 0; s < size; ++s) {
    for (int attempt = 0; attempt < kRedraws; ++attempt) {
      auto v = draw();
      if (!contains(ws.candidates, v)) {
        ws.candidates.push_back(std::move(v));
        break;
      }
    }
  }
  return ws;
}

/// Uniform vector, then every uniform r-subset for r = 1..q in lexicographic
/// order, deduplicated.
inline WeightSet init_warm_start(std::size_t m, std::size_t q) {
  if (m < 1 || q < 1) throw std::invalid_argument("init_warm_start: m and q must be positive");
  if (q > m) throw std::invalid_argument("init_warm_start: q must not exceed m");
  WeightSet ws;
  auto push = [&](WeightVector v) {
    if (!contains(ws.candidates, v)) ws.candidates.push_back(std::move(v));
  };
  push(WeightVector(std::vector<double>(m, 1.0 / static_cast<double>(m))));
  for (std::size_t r = 1; r <= q; ++r) {
    std::vector<std::size_t> pick(r);
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
      std::vector<double> w(m, 0.0);
      for (auto j : pick) w[j] = 1.0 / static_cast<double>(r);
      push(WeightVector(std::move(w)));
      // next r-combination
      std::size_t pos = r;
      while (pos > 0 && pick[pos - 1] == m - r + pos - 1) --pos;
      if (pos == 0) break;
      ++pick[pos - 1];
      for (std::size_t t = pos; t < r; ++t) pick[t] = pick[t - 1] + 1;
    }
  }
  return ws;
}

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

/// Warm start with q = 2 while it stays within 200 vectors, otherwise 64
/// uniform draws.
inline WeightSet init_default(std::size_t m, std::uint64_t seed) {
  if (m >= 2 && 1.0 + binomial(m, 1) + binomial(m, 2) <= 200.0) return init_warm_start(m, 2);
  if (m == 1) return init_warm_start(1, 1);
  return init_uniform(m, 64, seed);
}

/// New pool = (current members that are used or historical, in current order)
/// + new vectors in the given order + historical vectors not yet present.
/// History gains the used vectors.
inline WeightSet update_weight_set(const WeightSet& ws, const std::vector<WeightVector>& used,
                                   const std::vector<WeightVector>& fresh) {
  for (const auto& u : used)
    if (!contains(ws.candidates, u)) throw std::invalid_argument("update_weight_set: used vector is not in W");
  for (const auto& v : fresh)
    if (!on_simplex(v.w)) throw std::invalid_argument("update_weight_set: new vector is not on the simplex");

  WeightSet out;
  out.history = ws.history;
  for (const auto& u : used)
    if (!contains(out.history, u)) out.history.push_back(u);

  auto push = [&](const WeightVector& v) {
    if (!contains(out.candidates, v)) out.candidates.push_back(v);
  };
  for (const auto& c : ws.candidates)
    if (contains(used, c) || contains(ws.history, c)) push(c);
  for (const auto& v : fresh) push(v);
  for (const auto& h : ws.history) push(h);
  return out;
}

}  // namespace af
