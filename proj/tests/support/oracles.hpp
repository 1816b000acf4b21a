#pragma once

// Slow reference implementations shared by unit and acceptance tests.

#include <cstdint>
#include <vector>

#include "wr/corpus.hpp"
#include "wr/descriptors.hpp"

namespace wr::oracle {

/// Exhaustive Otsu search with exact rational comparisons of the
/// between-class variance, scaled to (s0*n1 - s1*n0)^2 / (n0*n1).
/// Ties keep the smallest threshold.
inline int otsu(const Histogram& h) {
  using U = unsigned __int128;
  std::uint64_t total = 0;
  std::uint64_t total_sum = 0;
  for (int v = 0; v < 256; ++v) {
    total += h[v];
    total_sum += static_cast<std::uint64_t>(v) * h[v];
  }
  // 128x128 -> 256-bit product
  const auto mul = [](U x, U y, U& hi, U& lo) {
    const U mask = (static_cast<U>(1) << 64) - 1;
    const U x0 = x & mask, x1 = x >> 64, y0 = y & mask, y1 = y >> 64;
    const U p00 = x0 * y0, p01 = x0 * y1, p10 = x1 * y0, p11 = x1 * y1;
    const U mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
    lo = (p00 & mask) | (mid << 64);
    hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
  };
  bool have = false;
  U best_num = 0, best_den = 1;
  int best_t = -1;
  std::uint64_t n0 = 0, s0 = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += h[t];
    s0 += static_cast<std::uint64_t>(t) * h[t];
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::uint64_t s1 = total_sum - s0;
    const U a = static_cast<U>(s0) * n1;
    const U b = static_cast<U>(s1) * n0;
    const U diff = a > b ? a - b : b - a;
    const U num = diff * diff;
    const U den = static_cast<U>(n0) * n1;
    bool better = !have;
    if (have) {
      U lh, ll, rh, rl;
      mul(num, best_den, lh, ll);
      mul(best_num, den, rh, rl);
      better = lh > rh || (lh == rh && ll > rl);
    }
    if (better) {
      have = true;
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }
  return best_t;
}

/// Mean over relevant ranks k of (relevant items in the first k) / k,
/// accumulated in long double.
inline double average_precision(const std::vector<bool>& rel) {
  long double sum = 0;
  long long hits = 0;
  for (std::size_t k = 0; k < rel.size(); ++k) {
    if (!rel[k]) continue;
    ++hits;
    sum += static_cast<long double>(hits) / static_cast<long double>(k + 1);
  }
  return static_cast<double>(sum / hits);
}

/// Nearest center by plain loops (first minimum wins), then residual sums.
inline Eigen::VectorXd vlad(const RowMatrix& xs, const RowMatrix& centers) {
  const auto k = centers.rows(), d = centers.cols();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(k * d);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = 0;
    for (Eigen::Index c = 0; c < k; ++c) {
      double s = 0;
      for (Eigen::Index j = 0; j < d; ++j) s += (xs(i, j) - centers(c, j)) * (xs(i, j) - centers(c, j));
      if (c == 0 || s < best_d) best_d = s, best = c;
    }
    for (Eigen::Index j = 0; j < d; ++j) v[best * d + j] += xs(i, j) - centers(best, j);
  }
  return v;
}

}  // namespace wr::oracle
