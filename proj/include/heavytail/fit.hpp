#pragma once

// Maximum-likelihood fitting, goodness-of-fit statistics, tail-index
// estimation and model ranking for loss data.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"

namespace heavytail {

enum class FitFamily { Normal, LogNormal, Gpd, PowerLaw };

inline std::string to_string(FitFamily f) {
  switch (f) {
    case FitFamily::Normal: return "normal";
    case FitFamily::LogNormal: return "lognormal";
    case FitFamily::Gpd: return "gpd";
    case FitFamily::PowerLaw: return "powerlaw";
  }
  return "unknown";
}

inline FitFamily parse_fit_family(const std::string& name) {
  if (name == "normal") return FitFamily::Normal;
  if (name == "lognormal") return FitFamily::LogNormal;
  if (name == "gpd") return FitFamily::Gpd;
  if (name == "powerlaw") return FitFamily::PowerLaw;
  throw Error(ErrorKind::Validation, "unknown fit family '" + name + "'");
}

inline int param_count(FitFamily f) { return f == FitFamily::PowerLaw ? 1 : 2; }

struct GofStatistics {
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double ks = 0.0;
  double ad = 0.0;
};

struct FitReport {
  FitFamily family = FitFamily::Normal;
  DistributionSpec fitted;
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double ks_statistic = 0.0;
  double ad_statistic = 0.0;
  std::size_t sample_size = 0;
};

/// sup |ECDF - F| over the sample.
template <class Cdf>
double ks_statistic(std::span<const double> data, Cdf&& cdf_fn) {
  require(!data.empty(), ErrorKind::EmptyInput, "KS statistic of empty data");
  std::vector<double> x(data.begin(), data.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf_fn(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

/// Anderson-Darling A^2 for a fully specified cdf. Cdf values are clamped
/// away from {0, 1} so observations outside the fitted support give a large
/// finite statistic.
template <class Cdf>
double ad_statistic(std::span<const double> data, Cdf&& cdf_fn) {
  require(!data.empty(), ErrorKind::EmptyInput, "AD statistic of empty data");
  std::vector<double> x(data.begin(), data.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  constexpr double tiny = 1e-300;
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = std::clamp(cdf_fn(x[i]), tiny, 1.0 - 1e-16);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 2.0 * static_cast<double>(i + 1) - 1.0;
    s += w * (std::log(f[i]) + std::log1p(-f[n - 1 - i]));
  }
  const double dn = static_cast<double>(n);
  return std::max(0.0, -dn - s / dn);
}

inline GofStatistics gof(FitFamily family, const DistributionSpec& fitted,
                         std::span<const double> data) {
  require(!data.empty(), ErrorKind::EmptyInput, "goodness of fit on empty data");
  std::optional<DistributionSpec> storage;
  detail::evaluable(fitted, storage);  // rejects sampling-only families
  GofStatistics g;
  for (double x : data) {
    const double d = density(fitted, x);
    g.log_likelihood += d > 0.0 ? std::log(d) : -std::numeric_limits<double>::max() / 1e10;
  }
  const double k = param_count(family);
  g.aic = 2.0 * k - 2.0 * g.log_likelihood;
  g.bic = k * std::log(static_cast<double>(data.size())) - 2.0 * g.log_likelihood;
  const auto f = [&](double x) { return cdf(fitted, x); };
  g.ks = ks_statistic(data, f);
  g.ad = ad_statistic(data, f);
  return g;
}

inline GofStatistics gof(const FitReport& report, std::span<const double> data) {
  return gof(report.family, report.fitted, data);
}

namespace detail {

struct GpdProfile {
  std::span<const double> x;

  // Closed-form inner step: for theta = shape / scale, the shape maximising
  // the likelihood is the mean of log(1 + theta x).
  double shape(double theta) const {
    double s = 0.0;
    for (double v : x) s += std::log1p(theta * v);
    return s / static_cast<double>(x.size());
  }

  // Profile log-likelihood per observation.
  double loglik(double theta) const {
    if (theta == 0.0) return -std::numeric_limits<double>::infinity();
    const double xi = shape(theta);
    const double ratio = xi / theta;  // the scale
    if (!(ratio > 0.0) || !std::isfinite(ratio)) return -std::numeric_limits<double>::infinity();
    return -(std::log(ratio) + 1.0 + xi);
  }
};

inline Gpd fit_gpd(std::span<const double> data) {
  const double xmax = *std::max_element(data.begin(), data.end());
  const double mean = std::accumulate(data.begin(), data.end(), 0.0) / static_cast<double>(data.size());
  const GpdProfile profile{data};

  // Exponential limit (theta -> 0).
  double best_ll = -(std::log(mean) + 1.0);
  double best_theta = 0.0;

  std::vector<double> grid;
  for (double e = -8.0; e <= 8.0; e += 0.05) grid.push_back(std::pow(10.0, e) / mean);
  for (double e = 0.05; e <= 12.0; e += 0.05) {
    grid.push_back(-(1.0 - std::pow(10.0, -e)) / xmax);
    grid.push_back(-std::pow(10.0, -e) / xmax);
  }
  std::sort(grid.begin(), grid.end());
  std::size_t best_idx = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double th = grid[i];
    if (th <= -1.0 / xmax) continue;
    if (profile.shape(th) < -1.0) continue;  // likelihood unbounded for shape < -1
    const double ll = profile.loglik(th);
    if (ll > best_ll) {
      best_ll = ll;
      best_theta = th;
      best_idx = i;
    }
  }
  if (best_idx != grid.size()) {
    const double lo = best_idx > 0 ? std::max(grid[best_idx - 1], -1.0 / xmax * (1.0 - 1e-15))
                                   : best_theta * 0.5;
    const double hi = best_idx + 1 < grid.size() ? grid[best_idx + 1] : best_theta * 2.0;
    std::uintmax_t iters = 500;
    std::vector<double> trace;
    auto neg = [&](double th) {
      trace.push_back(th);
      const double v = profile.loglik(th);
      return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
    };
    const auto [th, negll] = boost::math::tools::brent_find_minima(neg, lo, hi, std::numeric_limits<double>::digits / 2, iters);
    if (iters >= 500) {
      std::ostringstream os;
      os << "GPD profile likelihood did not converge; theta iterates:";
      for (std::size_t i = trace.size() > 10 ? trace.size() - 10 : 0; i < trace.size(); ++i)
        os << ' ' << trace[i];
      throw Error(ErrorKind::NonConvergence, os.str());
    }
    if (-negll >= best_ll) best_theta = th;
  }
  if (best_theta == 0.0) return Gpd{0.0, mean, 0.0};
  const double xi = profile.shape(best_theta);
  return Gpd{xi, xi / best_theta, 0.0};
}

}  // namespace detail

/// Maximum-likelihood fit of `family` to `data`; GPD threshold fixed at 0 and
/// power-law lower bound fixed at 1.
inline FitReport fit_mle(FitFamily family, std::span<const double> data) {
  require(!data.empty(), ErrorKind::EmptyInput, "cannot fit an empty sample");
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(std::isfinite(data[i]), ErrorKind::DataDomain,
            "datum " + std::to_string(i) + " is not finite");
    if (family == FitFamily::LogNormal || family == FitFamily::Gpd)
      require(data[i] > 0.0, ErrorKind::DataDomain,
              "datum " + std::to_string(i) + " is not positive for " + to_string(family));
    if (family == FitFamily::PowerLaw)
      require(data[i] >= 1.0, ErrorKind::DataDomain,
              "datum " + std::to_string(i) + " lies below the power-law lower bound 1");
  }
  const double n = static_cast<double>(data.size());
  FitReport report;
  report.family = family;
  report.sample_size = data.size();
  switch (family) {
    case FitFamily::Normal:
    case FitFamily::LogNormal: {
      const bool logs = family == FitFamily::LogNormal;
      double s = 0.0;
      for (double x : data) s += logs ? std::log(x) : x;
      const double m = s / n;
      double ss = 0.0;
      for (double x : data) {
        const double d = (logs ? std::log(x) : x) - m;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / n);
      require(sd > 0.0, ErrorKind::DataDomain, "sample has zero spread");
      if (logs) report.fitted = LogNormal{m, sd};
      else report.fitted = Normal{m, sd};
      break;
    }
    case FitFamily::Gpd:
      report.fitted = detail::fit_gpd(data);
      break;
    case FitFamily::PowerLaw: {
      double s = 0.0;
      for (double x : data) s += std::log(x);
      require(s > 0.0, ErrorKind::DataDomain, "all data equal the lower bound");
      report.fitted = PowerLaw{n / s};
      break;
    }
  }
  const GofStatistics g = gof(family, report.fitted, data);
  report.log_likelihood = g.log_likelihood;
  report.aic = g.aic;
  report.bic = g.bic;
  report.ks_statistic = g.ks;
  report.ad_statistic = g.ad;
  return report;
}

struct TailIndexEstimate {
  double tail_index = 0.0;
  double std_error = 0.0;
  std::size_t order_statistics = 0;
  double threshold = 0.0;
};

/// Hill estimator on the top `top_fraction` order statistics:
/// k / sum_{i<=k} log(x_(n-i+1) / x_(n-k)).
inline TailIndexEstimate hill_tail_index(std::span<const double> data, double top_fraction = 0.1) {
  require(top_fraction > 0.0 && top_fraction < 1.0, ErrorKind::Domain,
          "topFraction must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto k = static_cast<std::size_t>(std::floor(top_fraction * static_cast<double>(n)));
  require(k >= 30, ErrorKind::InsufficientTail,
          "Hill estimator needs >= 30 order statistics in the top fraction (got " +
              std::to_string(k) + ")");
  std::vector<double> x(data.begin(), data.end());
  std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n - k - 1), x.end());
  const double threshold = x[n - k - 1];
  require(threshold > 0.0, ErrorKind::DataDomain, "Hill threshold must be positive");
  double s = 0.0;
  std::size_t at_threshold = 0;
  for (std::size_t i = n - k; i < n; ++i) {
    if (x[i] == threshold) ++at_threshold;
    s += std::log(x[i] / threshold);
  }
  require(at_threshold == 0, ErrorKind::ThresholdDegeneracy,
          "ties at the threshold order statistic x_(n-k) = " + std::to_string(threshold));
  const double alpha = static_cast<double>(k) / s;
  return {alpha, alpha / std::sqrt(static_cast<double>(k)), k, threshold};
}

/// Ranks reports ascending by AIC, then BIC, then KS; equal reports keep
/// their input order.
inline std::vector<FitReport> select_model(std::vector<FitReport> reports) {
  require(!reports.empty(), ErrorKind::EmptyInput, "no reports to rank");
  for (const auto& r : reports)
    require(r.sample_size == reports.front().sample_size, ErrorKind::Incomparable,
            "reports were computed over different sample sizes");
  std::stable_sort(reports.begin(), reports.end(), [](const FitReport& a, const FitReport& b) {
    if (a.aic != b.aic) return a.aic < b.aic;
    if (a.bic != b.bic) return a.bic < b.bic;
    return a.ks_statistic < b.ks_statistic;
  });
  return reports;
}

}  // namespace heavytail
