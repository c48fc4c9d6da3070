#pragma once

// Small statistical toolkit shared by the modules: order statistics,
// Kolmogorov-Smirnov distances, Kendall's tau, interval helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "heavytail/error.hpp"

namespace heavytail::stats {

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool contains(double x) const { return low <= x && x <= high; }
  bool excludes_zero() const { return low > 0.0 || high < 0.0; }
  double half_width() const { return 0.5 * (high - low); }
};

inline bool disjoint(const Interval& a, const Interval& b) {
  return a.high < b.low || b.high < a.low;
}

/// Two-sided standard-normal critical value for confidence `level`.
inline double z_critical(double level) {
  return boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level);
}

inline double t_critical(double level, double dof) {
  return boost::math::quantile(boost::math::students_t(dof), 0.5 + 0.5 * level);
}

inline double mean(std::span<const double> x) {
  require(!x.empty(), ErrorKind::EmptyInput, "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation; divisor n - 1.
inline double stdev(std::span<const double> x) {
  require(x.size() >= 2, ErrorKind::EmptyInput, "stdev needs >= 2 values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

/// 1-based rank of the lower empirical quantile: ceil(level * m), clamped
/// to [1, m]. A small tolerance absorbs representation error in level * m.
inline std::size_t quantile_rank(double level, std::size_t m) {
  const double x = level * static_cast<double>(m);
  auto r = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::clamp<std::size_t>(r, 1, m);
}

/// Lower empirical quantile (order statistic, no interpolation). Reorders
/// `scratch` in place.
inline double order_statistic(std::vector<double>& scratch, std::size_t rank) {
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

/// Distribution-free CI for the level-quantile from the binomial law of the
/// order-statistic ranks (normal approximation).
inline Interval quantile_ci_from_sorted(std::span<const double> sorted, double level,
                                        double confidence) {
  const std::size_t m = sorted.size();
  const double z = z_critical(confidence);
  const double centre = level * static_cast<double>(m);
  const double spread = z * std::sqrt(static_cast<double>(m) * level * (1.0 - level));
  const auto lo = static_cast<std::ptrdiff_t>(std::floor(centre - spread));
  const auto hi = static_cast<std::ptrdiff_t>(std::ceil(centre + spread));
  const auto clamp = [&](std::ptrdiff_t r) {
    return std::clamp<std::ptrdiff_t>(r, 1, static_cast<std::ptrdiff_t>(m));
  };
  return {sorted[static_cast<std::size_t>(clamp(lo) - 1)],
          sorted[static_cast<std::size_t>(clamp(hi) - 1)]};
}

/// sup_x |F_a(x) - F_b(x)| between two empirical distributions.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorKind::EmptyInput, "KS needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic two-sample KS critical value: c(alpha) * sqrt((n+m)/(n m)).
inline double ks_two_sample_critical(std::size_t n, std::size_t m, double alpha = 0.01) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  const double dn = static_cast<double>(n), dm = static_cast<double>(m);
  return c * std::sqrt((dn + dm) / (dn * dm));
}

namespace detail {

// Merge sort counting inversions (swaps) of v.
inline std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                                 std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
            buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

inline std::uint64_t tied_pairs(const std::vector<double>& sorted) {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const std::uint64_t run = j - i;
    t += run * (run - 1) / 2;
    i = j;
  }
  return t;
}

}  // namespace detail

/// Kendall's tau-b in O(n log n) (Knight's algorithm).
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorKind::Shape, "kendall_tau needs equal-length inputs");
  const std::size_t n = x.size();
  require(n >= 2, ErrorKind::EmptyInput, "kendall_tau needs >= 2 pairs");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]); });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[idx[i]];
    ys[i] = y[idx[i]];
  }
  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t n1 = detail::tied_pairs(xs);
  std::uint64_t n3 = 0;  // pairs tied in both
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && xs[j] == xs[i]) ++j;
    for (std::size_t k = i; k < j;) {
      std::size_t l = k;
      while (l < j && ys[l] == ys[k]) ++l;
      const std::uint64_t run = l - k;
      n3 += run * (run - 1) / 2;
      k = l;
    }
    i = j;
  }
  std::vector<double> buf(n);
  const std::uint64_t swaps = detail::merge_count(ys, buf, 0, n);
  const std::uint64_t n2 = detail::tied_pairs(ys);
  const double num = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                     static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return den > 0.0 ? std::clamp(num / den, -1.0, 1.0) : 0.0;
}

/// Mean with a normal-theory interval at `confidence`.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  Interval ci;
};

inline MeanEstimate mean_with_ci(double sum, double sum_sq, std::size_t n, double confidence = 0.95) {
  const double dn = static_cast<double>(n);
  const double m = sum / dn;
  const double var = n > 1 ? std::max(0.0, (sum_sq - dn * m * m) / (dn - 1.0)) : 0.0;
  const double se = std::sqrt(var / dn);
  const double z = z_critical(confidence);
  return {m, se, {m - z * se, m + z * se}};
}

}  // namespace heavytail::stats
