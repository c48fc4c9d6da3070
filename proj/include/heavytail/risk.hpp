#pragma once

// Empirical risk measures (VaR, CVaR) and the double-bootstrap VaR sweep.
//
// Convention: `level` is a confidence level c in (0, 1) and VaR_c is the
// lower empirical c-quantile, i.e. the ceil(c * m)-th order statistic. A
// theorem-side "loss probability q" corresponds to c = 1 - q.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "heavytail/error.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/rng.hpp"
#include "heavytail/stats.hpp"

namespace heavytail {

enum class RiskMeasure { VaR, CVaR, EU };

inline std::string to_string(RiskMeasure m) {
  switch (m) {
    case RiskMeasure::VaR: return "VaR";
    case RiskMeasure::CVaR: return "CVaR";
    case RiskMeasure::EU: return "EU";
  }
  return "unknown";
}

struct RiskMeasureReport {
  RiskMeasure measure = RiskMeasure::VaR;
  double confidence_level = 0.0;
  double point_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t sample_count = 0;
  Seed seed = 0;
  std::size_t aggregation_count = 1;
};

namespace detail {

inline void check_level(double level) {
  require(level > 0.0 && level < 1.0, ErrorKind::Domain, "confidence level must lie in (0, 1)");
}

}  // namespace detail

/// VaR on a scratch buffer that may be reordered.
inline double var_in_place(std::vector<double>& scratch, double level) {
  require(!scratch.empty(), ErrorKind::EmptyInput, "VaR of an empty sample");
  detail::check_level(level);
  return stats::order_statistic(scratch, stats::quantile_rank(level, scratch.size()));
}

inline double var(std::span<const double> samples, double level) {
  std::vector<double> scratch(samples.begin(), samples.end());
  return var_in_place(scratch, level);
}

/// Mean of the samples ranked strictly above the VaR order statistic.
inline double cvar(std::span<const double> samples, double level) {
  require(!samples.empty(), ErrorKind::EmptyInput, "CVaR of an empty sample");
  detail::check_level(level);
  const std::size_t m = samples.size();
  const std::size_t rank = stats::quantile_rank(level, m);
  require(m - rank >= 2, ErrorKind::InsufficientTail,
          "CVaR needs >= 2 samples beyond the VaR order statistic (have " +
              std::to_string(m - rank) + ")");
  std::vector<double> x(samples.begin(), samples.end());
  auto cut = x.begin() + static_cast<std::ptrdiff_t>(rank);
  std::nth_element(x.begin(), cut - 1, x.end());
  double s = 0.0;
  for (auto it = cut; it != x.end(); ++it) s += *it;
  return s / static_cast<double>(m - rank);
}

/// VaR with a distribution-free order-statistic interval.
inline RiskMeasureReport var_report(std::span<const double> samples, double level,
                                    double confidence = 0.95) {
  require(!samples.empty(), ErrorKind::EmptyInput, "VaR of an empty sample");
  detail::check_level(level);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto ci = stats::quantile_ci_from_sorted(sorted, level, confidence);
  RiskMeasureReport r;
  r.measure = RiskMeasure::VaR;
  r.confidence_level = level;
  r.point_estimate = sorted[stats::quantile_rank(level, sorted.size()) - 1];
  r.ci_low = std::min(ci.low, r.point_estimate);
  r.ci_high = std::max(ci.high, r.point_estimate);
  r.sample_count = samples.size();
  return r;
}

/// CVaR with a normal-theory interval on the tail mean.
inline RiskMeasureReport cvar_report(std::span<const double> samples, double level,
                                     double confidence = 0.95) {
  const double point = cvar(samples, level);
  const std::size_t rank = stats::quantile_rank(level, samples.size());
  std::vector<double> x(samples.begin(), samples.end());
  auto cut = x.begin() + static_cast<std::ptrdiff_t>(rank);
  std::nth_element(x.begin(), cut - 1, x.end());
  double ss = 0.0;
  for (auto it = cut; it != x.end(); ++it) ss += (*it - point) * (*it - point);
  const double k = static_cast<double>(samples.size() - rank);
  const double half = stats::z_critical(confidence) * std::sqrt(ss / (k - 1.0) / k);
  RiskMeasureReport r;
  r.measure = RiskMeasure::CVaR;
  r.confidence_level = level;
  r.point_estimate = point;
  r.ci_low = point - half;
  r.ci_high = point + half;
  r.sample_count = samples.size();
  return r;
}

struct BootstrapOptions {
  std::size_t inner_reps = 100'000;
  std::size_t outer_reps = 200;
  double ci_confidence = 0.95;
};

namespace detail {

// Empirical VaR of `reps` portfolios, each the mean of n draws with
// replacement from `data`.
inline double resampled_portfolio_var(std::span<const double> data, std::size_t n,
                                      std::size_t reps, double level, Seed seed) {
  std::vector<double> z(reps);
  const std::uint64_t m = data.size();
  for_each_block(reps, [&](BlockRange b) {
    Rng rng(derive_seed(seed, {b.index}));
    for (std::size_t i = b.begin; i < b.end; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += data[rng.index(m)];
      z[i] = s / static_cast<double>(n);
    }
  });
  return var_in_place(z, level);
}

}  // namespace detail

/// Double bootstrap of VaR for equal-weight portfolios of n resampled risks.
/// The point estimate resamples the original data; each outer replicate
/// first redraws a size-m dataset with replacement and repeats the inner
/// loop. Percentile intervals over the outer replicates give the CI.
inline std::vector<RiskMeasureReport> bootstrap_var_sweep(std::span<const double> data,
                                                          std::span<const std::size_t> aggregation_counts,
                                                          double level, const BootstrapOptions& opt,
                                                          Seed seed) {
  require(data.size() >= 30, ErrorKind::Domain, "bootstrap needs at least 30 observations");
  detail::check_level(level);
  require(opt.outer_reps >= 2, ErrorKind::Domain, "outerReps must be >= 2");
  require((1.0 - level) * static_cast<double>(opt.inner_reps) >= 10.0, ErrorKind::Resolution,
          "innerReps too small: fewer than 10 portfolio draws beyond the VaR level");
  for (std::size_t n : aggregation_counts)
    require(n >= 1, ErrorKind::Domain, "aggregation count must be >= 1");

  std::vector<RiskMeasureReport> out;
  const std::size_t m = data.size();
  for (std::size_t k = 0; k < aggregation_counts.size(); ++k) {
    const std::size_t n = aggregation_counts[k];
    RiskMeasureReport r;
    r.measure = RiskMeasure::VaR;
    r.confidence_level = level;
    r.sample_count = opt.inner_reps;
    r.seed = seed;
    r.aggregation_count = n;
    r.point_estimate =
        detail::resampled_portfolio_var(data, n, opt.inner_reps, level, derive_seed(seed, {0, k}));

    std::vector<double> outer(opt.outer_reps);
    std::vector<double> resampled(m);
    for (std::size_t b = 0; b < opt.outer_reps; ++b) {
      Rng rng(derive_seed(seed, {1, b}));
      for (auto& v : resampled) v = data[rng.index(m)];
      outer[b] = detail::resampled_portfolio_var(resampled, n, opt.inner_reps, level,
                                                 derive_seed(seed, {2, b, k}));
    }
    std::sort(outer.begin(), outer.end());
    const double tail = 0.5 * (1.0 - opt.ci_confidence);
    const auto pick = [&](double p) {
      const auto idx = static_cast<std::size_t>(
          std::clamp(std::round(p * static_cast<double>(outer.size() - 1)), 0.0,
                     static_cast<double>(outer.size() - 1)));
      return outer[idx];
    };
    r.ci_low = std::min(pick(tail), r.point_estimate);
    r.ci_high = std::max(pick(1.0 - tail), r.point_estimate);
    out.push_back(r);
  }
  return out;
}

}  // namespace heavytail
