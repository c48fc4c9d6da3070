#pragma once

// Limited-liability transform, power-utility expected utility, pooled EU
// sweeps and the U-shape detector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/rng.hpp"
#include "heavytail/stats.hpp"

namespace heavytail {

enum class UtilityConvention { RemainingCapital, LiteralLossNegated };

inline std::string to_string(UtilityConvention c) {
  return c == UtilityConvention::RemainingCapital ? "remaining-capital" : "literal-loss-negated";
}

struct LiabilitySpec {
  double cap = 70.0;  // k; kInfinity for unlimited liability
  double risk_aversion = 0.0315;
  UtilityConvention convention = UtilityConvention::RemainingCapital;
};

inline void validate(const LiabilitySpec& l) {
  require(l.cap > 0.0, ErrorKind::ParameterDomain, "cap: k must be > 0");
  require(l.risk_aversion > 0.0 && l.risk_aversion < 1.0, ErrorKind::ParameterDomain,
          "riskAversion: exponent must lie in (0, 1)");
  require(!(std::isinf(l.cap) && l.convention == UtilityConvention::RemainingCapital),
          ErrorKind::UnboundedBase, "remaining-capital utility needs a finite cap k");
}

/// V(x) = min(x, k)
inline double liability_transform(double x, double cap) {
  require(x >= 0.0, ErrorKind::Domain, "losses must be >= 0");
  require(cap > 0.0, ErrorKind::ParameterDomain, "cap: k must be > 0");
  return std::min(x, cap);
}

namespace detail {

inline double utility(double loss, const LiabilitySpec& l) {
  const double v = std::min(loss, l.cap);
  if (l.convention == UtilityConvention::RemainingCapital) return std::pow(l.cap - v, l.risk_aversion);
  return -std::pow(v, l.risk_aversion);
}

}  // namespace detail

inline stats::MeanEstimate expected_utility(std::span<const double> losses, const LiabilitySpec& l,
                                            double confidence = 0.95) {
  validate(l);
  require(!losses.empty(), ErrorKind::EmptyInput, "expected utility of an empty sample");
  double s = 0.0, s2 = 0.0;
  for (double x : losses) {
    require(x >= 0.0, ErrorKind::DataDomain, "losses must be >= 0");
    const double u = detail::utility(x, l);
    s += u;
    s2 += u * u;
  }
  return stats::mean_with_ci(s, s2, losses.size(), confidence);
}

/// EU estimates over aggregation counts n (rows) and pool sizes m (columns).
struct EUGrid {
  std::vector<std::size_t> aggregation_counts;
  std::vector<std::size_t> pool_sizes;
  std::vector<stats::MeanEstimate> cells;  // row-major, n by m
  Seed seed = 0;
  std::size_t mc_count = 0;

  const stats::MeanEstimate& at(std::size_t i, std::size_t j) const {
    return cells[i * pool_sizes.size() + j];
  }
};

/// Each manager's share is Z = (1/m) * sum_{i<=n} X_i. All cells reuse the
/// same base draws: row r's partial sums serve every n.
inline EUGrid pooled_eu_sweep(const DistributionSpec& spec, std::span<const std::size_t> n_list,
                              std::span<const std::size_t> m_list, const LiabilitySpec& l,
                              std::size_t mc_count, Seed seed, double confidence = 0.95) {
  validate(spec);
  validate(l);
  require(!n_list.empty() && !m_list.empty(), ErrorKind::Domain, "n and m lists must be nonempty");
  for (std::size_t n : n_list) require(n >= 1, ErrorKind::Domain, "aggregation count n must be >= 1");
  for (std::size_t m : m_list) require(m >= 1, ErrorKind::Domain, "pool size m must be >= 1");
  require(mc_count >= 2, ErrorKind::Domain, "mcCount must be >= 2");

  const std::size_t max_n = *std::max_element(n_list.begin(), n_list.end());
  const std::size_t ni = n_list.size(), mi = m_list.size();
  const std::size_t blocks = block_count(mc_count);
  std::vector<std::vector<double>> s1(blocks), s2(blocks);
  const Sampler sampler(spec);
  for_each_block(mc_count, [&](BlockRange b) {
    Rng rng(derive_seed(seed, {b.index}));
    std::vector<double> a(ni * mi, 0.0), a2(ni * mi, 0.0), prefix(max_n + 1);
    for (std::size_t r = b.begin; r < b.end; ++r) {
      prefix[0] = 0.0;
      for (std::size_t k = 1; k <= max_n; ++k) {
        const double x = sampler(rng);
        require(x >= 0.0, ErrorKind::DataDomain, "pooled risks must be nonnegative");
        prefix[k] = prefix[k - 1] + x;
      }
      for (std::size_t i = 0; i < ni; ++i)
        for (std::size_t j = 0; j < mi; ++j) {
          const double u = detail::utility(prefix[n_list[i]] / static_cast<double>(m_list[j]), l);
          a[i * mi + j] += u;
          a2[i * mi + j] += u * u;
        }
    }
    s1[b.index] = std::move(a);
    s2[b.index] = std::move(a2);
  });

  EUGrid g{{n_list.begin(), n_list.end()}, {m_list.begin(), m_list.end()}, {}, seed, mc_count};
  for (std::size_t c = 0; c < ni * mi; ++c) {
    double a = 0.0, a2 = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
      a += s1[b][c];
      a2 += s2[b][c];
    }
    g.cells.push_back(stats::mean_with_ci(a, a2, mc_count, confidence));
  }
  return g;
}

struct CurvePoint {
  double x = 0.0;
  double value = 0.0;
  double ci_half_width = 0.0;
};

/// EU over n at a fixed pool size m (column j of the grid).
inline std::vector<CurvePoint> eu_curve_fixed_pool(const EUGrid& g, std::size_t j) {
  std::vector<CurvePoint> c;
  for (std::size_t i = 0; i < g.aggregation_counts.size(); ++i)
    c.push_back({static_cast<double>(g.aggregation_counts[i]), g.at(i, j).mean,
                 g.at(i, j).ci.half_width()});
  return c;
}

/// EU over n along the cells with m = n (n managers sharing n risks).
inline std::vector<CurvePoint> eu_curve_equal_pool(const EUGrid& g) {
  std::vector<CurvePoint> c;
  for (std::size_t i = 0; i < g.aggregation_counts.size(); ++i)
    for (std::size_t j = 0; j < g.pool_sizes.size(); ++j)
      if (g.pool_sizes[j] == g.aggregation_counts[i])
        c.push_back({static_cast<double>(g.aggregation_counts[i]), g.at(i, j).mean,
                     g.at(i, j).ci.half_width()});
  return c;
}

enum class ShapeVerdict { UShaped, MonotoneDecreasing, MonotoneIncreasing, Flat, Inconclusive };

inline std::string to_string(ShapeVerdict v) {
  switch (v) {
    case ShapeVerdict::UShaped: return "u-shaped";
    case ShapeVerdict::MonotoneDecreasing: return "monotone-decreasing";
    case ShapeVerdict::MonotoneIncreasing: return "monotone-increasing";
    case ShapeVerdict::Flat: return "flat";
    case ShapeVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct ShapeReport {
  ShapeVerdict verdict = ShapeVerdict::Inconclusive;
  double argmin = 0.0;
  double sse_decreasing = 0.0;
  double sse_increasing = 0.0;
  double sse_two_piece = 0.0;
  double valley_depth = 0.0;
};

namespace detail {

// Pool-adjacent-violators least-squares nondecreasing fit.
inline std::vector<double> isotonic_increasing(std::span<const double> y) {
  std::vector<double> level;
  std::vector<std::size_t> width;
  for (double v : y) {
    level.push_back(v);
    width.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const std::size_t w = width.back() + width[width.size() - 2];
      const double m = (level.back() * static_cast<double>(width.back()) +
                        level[level.size() - 2] * static_cast<double>(width[width.size() - 2])) /
                       static_cast<double>(w);
      level.pop_back();
      width.pop_back();
      level.back() = m;
      width.back() = w;
    }
  }
  std::vector<double> fit;
  for (std::size_t k = 0; k < level.size(); ++k) fit.insert(fit.end(), width[k], level[k]);
  return fit;
}

inline std::vector<double> isotonic_decreasing(std::span<const double> y) {
  std::vector<double> neg(y.size());
  std::transform(y.begin(), y.end(), neg.begin(), [](double v) { return -v; });
  auto f = isotonic_increasing(neg);
  for (auto& v : f) v = -v;
  return f;
}

inline double sse(std::span<const double> y, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - f[i]) * (y[i] - f[i]);
  return s;
}

}  // namespace detail

/// Isotonic two-piece shape classification of a curve sorted by x.
inline ShapeReport ushape_detect(std::vector<CurvePoint> curve) {
  require(curve.size() >= 5, ErrorKind::Domain, "ushape_detect needs >= 5 points");
  std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
  const std::size_t n = curve.size();
  std::vector<double> y(n), hw(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = curve[i].value;
    hw[i] = curve[i].ci_half_width;
  }
  std::nth_element(hw.begin(), hw.begin() + static_cast<std::ptrdiff_t>(n / 2), hw.end());
  const double noise = 2.0 * hw[n / 2];

  ShapeReport r;
  const auto dec = detail::isotonic_decreasing(y), inc = detail::isotonic_increasing(y);
  r.sse_decreasing = detail::sse(y, dec);
  r.sse_increasing = detail::sse(y, inc);

  // Decreasing on [0, s), increasing on [s, n); both pieces nonempty.
  r.sse_two_piece = std::numeric_limits<double>::infinity();
  std::vector<double> best;
  for (std::size_t s = 1; s < n; ++s) {
    const std::span<const double> ys(y);
    auto left = detail::isotonic_decreasing(ys.subspan(0, s));
    const auto right = detail::isotonic_increasing(ys.subspan(s));
    const double e = detail::sse(ys.subspan(0, s), left) + detail::sse(ys.subspan(s), right);
    if (e < r.sse_two_piece) {
      r.sse_two_piece = e;
      left.insert(left.end(), right.begin(), right.end());
      best = std::move(left);
    }
  }
  const auto valley = std::min_element(best.begin(), best.end());
  r.valley_depth = std::min(best.front(), best.back()) - *valley;

  const double tol = 1e-12 * (1.0 + r.sse_decreasing + r.sse_increasing);
  const bool beats = r.sse_two_piece + tol < r.sse_decreasing && r.sse_two_piece + tol < r.sse_increasing;
  if (beats && r.valley_depth > noise) {
    r.verdict = ShapeVerdict::UShaped;
    r.argmin = curve[static_cast<std::size_t>(valley - best.begin())].x;
    return r;
  }
  r.argmin = curve[static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin())].x;
  const double drop = dec.front() - dec.back(), rise = inc.back() - inc.front();
  const double range = *std::max_element(y.begin(), y.end()) - *std::min_element(y.begin(), y.end());
  if (r.sse_decreasing <= r.sse_increasing && drop > noise)
    r.verdict = ShapeVerdict::MonotoneDecreasing;
  else if (r.sse_increasing < r.sse_decreasing && rise > noise)
    r.verdict = ShapeVerdict::MonotoneIncreasing;
  else if (range <= noise)
    r.verdict = ShapeVerdict::Flat;
  return r;
}

}  // namespace heavytail
