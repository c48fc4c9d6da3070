#pragma once

// Marginal loss laws: parameterization, validation, sampling and closed-form
// evaluation for the stable, Levy, Cauchy, normal, log-normal, generalized
// Pareto and power-law families.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "heavytail/error.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/rng.hpp"

namespace heavytail {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class StableParameterization { S0, S1 };
enum class LevyOrientation { RightTailed, PaperMirrored };

struct Stable {
  double stability_index = 2.0;  // alpha in (0, 2]
  double scale = 1.0;
  double skewness = 0.0;  // in [-1, 1]
  double location = 0.0;
  StableParameterization parameterization = StableParameterization::S0;
};

struct Normal {
  double mean = 0.0;
  double stdev = 1.0;
};

struct LogNormal {
  double log_mean = 0.0;
  double log_stdev = 1.0;
};

struct Levy {
  double location = 0.0;
  double scale = 1.0;
  LevyOrientation orientation = LevyOrientation::RightTailed;
};

struct Cauchy {
  double location = 0.0;
  double scale = 1.0;
};

struct Gpd {
  double shape = 0.0;
  double scale = 1.0;
  double threshold = 0.0;
};

/// Pareto law on [lower_bound, inf) with P(X > x) = x^-tail_index.
struct PowerLaw {
  double tail_index = 1.0;
  double lower_bound = 1.0;
};

using DistributionSpec = std::variant<Stable, Normal, LogNormal, Levy, Cauchy, Gpd, PowerLaw>;

inline std::string family_name(const DistributionSpec& spec) {
  static constexpr const char* names[] = {"stable", "normal", "lognormal", "levy",
                                          "cauchy", "gpd",    "powerlaw"};
  return names[spec.index()];
}

inline std::string describe(const DistributionSpec& spec) {
  std::ostringstream os;
  const auto f = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Stable>) {
          os << "stable(alpha=" << f(d.stability_index) << ",scale=" << f(d.scale)
             << ",skewness=" << f(d.skewness) << ",location=" << f(d.location) << ",param="
             << (d.parameterization == StableParameterization::S0 ? "S0" : "S1") << ")";
        } else if constexpr (std::is_same_v<T, Normal>) {
          os << "normal(mean=" << f(d.mean) << ",stdev=" << f(d.stdev) << ")";
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          os << "lognormal(log_mean=" << f(d.log_mean) << ",log_stdev=" << f(d.log_stdev) << ")";
        } else if constexpr (std::is_same_v<T, Levy>) {
          os << "levy(location=" << f(d.location) << ",scale=" << f(d.scale) << ",orientation="
             << (d.orientation == LevyOrientation::RightTailed ? "right-tailed" : "paper-mirrored")
             << ")";
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          os << "cauchy(location=" << f(d.location) << ",scale=" << f(d.scale) << ")";
        } else if constexpr (std::is_same_v<T, Gpd>) {
          os << "gpd(shape=" << f(d.shape) << ",scale=" << f(d.scale) << ",threshold=" << f(d.threshold)
             << ")";
        } else {
          os << "powerlaw(tail_index=" << f(d.tail_index) << ",lower_bound=" << f(d.lower_bound) << ")";
        }
      },
      spec);
  return os.str();
}

namespace detail {

inline void require_finite(double v, const char* field) {
  require(std::isfinite(v), ErrorKind::ParameterDomain, std::string(field) + " must be finite");
}

inline void require_positive(double v, const char* field) {
  require(std::isfinite(v) && v > 0.0, ErrorKind::ParameterDomain,
          std::string(field) + " must be > 0");
}

}  // namespace detail

/// Throws ErrorKind::ParameterDomain naming the first offending field.
inline void validate(const DistributionSpec& spec) {
  using namespace detail;
  std::visit(
      [](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Stable>) {
          require(d.stability_index > 0.0 && d.stability_index <= 2.0, ErrorKind::ParameterDomain,
                  "stabilityIndex must lie in (0, 2]");
          require_positive(d.scale, "scale");
          require(d.skewness >= -1.0 && d.skewness <= 1.0, ErrorKind::ParameterDomain,
                  "skewness must lie in [-1, 1]");
          require_finite(d.location, "location");
        } else if constexpr (std::is_same_v<T, Normal>) {
          require_finite(d.mean, "mean");
          require_positive(d.stdev, "stdev");
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          require_finite(d.log_mean, "logMean");
          require_positive(d.log_stdev, "logStdev");
        } else if constexpr (std::is_same_v<T, Levy> || std::is_same_v<T, Cauchy>) {
          require_finite(d.location, "location");
          require_positive(d.scale, "scale");
        } else if constexpr (std::is_same_v<T, Gpd>) {
          require_finite(d.shape, "shape");
          require_positive(d.scale, "scale");
          require(std::isfinite(d.threshold) && d.threshold >= 0.0, ErrorKind::ParameterDomain,
                  "threshold must be >= 0");
        } else {
          require_positive(d.tail_index, "tailIndex");
          require(d.lower_bound == 1.0, ErrorKind::ParameterDomain, "lowerBound must equal 1");
        }
      },
      spec);
}

/// The closed-form family a stable law reduces to, when one exists:
/// alpha = 2 (normal), alpha = 1 with zero skewness (Cauchy), alpha = 1/2 with
/// skewness +-1 (Levy).
inline std::optional<DistributionSpec> closed_form_equivalent(const Stable& s) {
  const double a = s.stability_index;
  if (a == 2.0) return Normal{s.location, s.scale * std::numbers::sqrt2};
  if (a == 1.0 && s.skewness == 0.0) return Cauchy{s.location, s.scale};
  if (a == 0.5 && std::abs(s.skewness) == 1.0) {
    // S0 location is shifted by skewness * scale * tan(pi/4) relative to S1.
    const double shift =
        s.parameterization == StableParameterization::S0 ? s.skewness * s.scale : 0.0;
    return Levy{s.location - shift, s.scale,
                s.skewness > 0 ? LevyOrientation::RightTailed : LevyOrientation::PaperMirrored};
  }
  return std::nullopt;
}

/// Per-spec variate generator with precomputed constants. Stable laws use the
/// Chambers-Mallows-Stuck transformation.
class Sampler {
 public:
  explicit Sampler(DistributionSpec spec) : spec_(std::move(spec)) {
    validate(spec_);
    if (const auto* s = std::get_if<Stable>(&spec_)) {
      const double a = s->stability_index;
      if (a != 1.0) {
        const double t = std::tan(std::numbers::pi * a / 2.0);
        zeta_ = s->skewness * t;
        b_ = std::atan(zeta_) / a;
        cms_scale_ = std::pow(1.0 + zeta_ * zeta_, 1.0 / (2.0 * a));
      }
    }
  }

  const DistributionSpec& spec() const noexcept { return spec_; }

  double operator()(Rng& rng) const {
    return std::visit([&](const auto& d) { return draw(d, rng); }, spec_);
  }

 private:
  double draw(const Stable& s, Rng& rng) const {
    constexpr double pi = std::numbers::pi;
    const double a = s.stability_index;
    const double v = pi * (rng.uniform_open() - 0.5);
    const double w = rng.exponential();
    if (a == 1.0) {
      const double beta = s.skewness;
      const double half_pi_bv = pi / 2.0 + beta * v;
      const double x1 =
          (2.0 / pi) *
          (half_pi_bv * std::tan(v) - beta * std::log((pi / 2.0) * w * std::cos(v) / half_pi_bv));
      if (s.parameterization == StableParameterization::S0) return s.scale * x1 + s.location;
      return s.scale * x1 + (2.0 / pi) * beta * s.scale * std::log(s.scale) + s.location;
    }
    const double avb = a * (v + b_);
    const double x1 = cms_scale_ * std::sin(avb) / std::pow(std::cos(v), 1.0 / a) *
                      std::pow(std::cos(v - avb) / w, (1.0 - a) / a);
    if (s.parameterization == StableParameterization::S0)
      return s.scale * (x1 - zeta_) + s.location;
    return s.scale * x1 + s.location;
  }
  static double draw(const Normal& d, Rng& rng) { return d.mean + d.stdev * rng.normal(); }
  static double draw(const LogNormal& d, Rng& rng) {
    return std::exp(d.log_mean + d.log_stdev * rng.normal());
  }
  static double draw(const Levy& d, Rng& rng) {
    const double z = rng.normal();
    const double l = d.scale / (z * z);
    return d.orientation == LevyOrientation::RightTailed ? d.location + l : d.location - l;
  }
  static double draw(const Cauchy& d, Rng& rng) {
    return d.location + d.scale * std::tan(std::numbers::pi * (rng.uniform_open() - 0.5));
  }
  static double draw(const Gpd& d, Rng& rng) {
    const double u = rng.uniform_open();
    if (d.shape == 0.0) return d.threshold - d.scale * std::log(u);
    return d.threshold + d.scale * std::expm1(-d.shape * std::log(u)) / d.shape;
  }
  static double draw(const PowerLaw& d, Rng& rng) {
    return std::pow(rng.uniform_open(), -1.0 / d.tail_index);
  }

  DistributionSpec spec_;
  double zeta_ = 0.0;
  double b_ = 0.0;
  double cms_scale_ = 1.0;
};

/// count i.i.d. draws, deterministic in (spec, count, seed); block b of the
/// output uses sub-stream derive_seed(seed, {b}).
inline std::vector<double> sample(const DistributionSpec& spec, std::size_t count, Seed seed) {
  require(count >= 1, ErrorKind::Domain, "count must be >= 1");
  const Sampler sampler(spec);
  std::vector<double> out(count);
  for_each_block(count, [&](BlockRange r) {
    Rng rng(derive_seed(seed, {r.index}));
    for (std::size_t i = r.begin; i < r.end; ++i) out[i] = sampler(rng);
  });
  return out;
}

namespace detail {

inline const DistributionSpec& evaluable(const DistributionSpec& spec,
                                         std::optional<DistributionSpec>& storage) {
  validate(spec);
  if (const auto* s = std::get_if<Stable>(&spec)) {
    storage = closed_form_equivalent(*s);
    require(storage.has_value(), ErrorKind::UnsupportedEvaluation,
            "general stable laws are sampling-only (no closed-form density/cdf)");
    return *storage;
  }
  return spec;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace detail

inline double density(const DistributionSpec& spec, double x) {
  std::optional<DistributionSpec> storage;
  const DistributionSpec& d = detail::evaluable(spec, storage);
  constexpr double pi = std::numbers::pi;
  return std::visit(
      [x](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Normal>) {
          const double z = (x - p.mean) / p.stdev;
          return std::exp(-0.5 * z * z) / (p.stdev * std::sqrt(2.0 * pi));
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          if (x <= 0.0) return 0.0;
          const double z = (std::log(x) - p.log_mean) / p.log_stdev;
          return std::exp(-0.5 * z * z) / (x * p.log_stdev * std::sqrt(2.0 * pi));
        } else if constexpr (std::is_same_v<T, Levy>) {
          const double gap =
              p.orientation == LevyOrientation::RightTailed ? x - p.location : p.location - x;
          if (gap <= 0.0) return 0.0;
          return std::sqrt(p.scale / (2.0 * pi)) * std::exp(-p.scale / (2.0 * gap)) *
                 std::pow(gap, -1.5);
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          const double z = (x - p.location) / p.scale;
          return 1.0 / (pi * p.scale * (1.0 + z * z));
        } else if constexpr (std::is_same_v<T, Gpd>) {
          const double y = (x - p.threshold) / p.scale;
          if (y < 0.0) return 0.0;
          if (p.shape == 0.0) return std::exp(-y) / p.scale;
          const double base = 1.0 + p.shape * y;
          if (base <= 0.0) return 0.0;
          return std::exp(-(1.0 / p.shape + 1.0) * std::log(base)) / p.scale;
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          if (x < p.lower_bound) return 0.0;
          return p.tail_index * std::pow(x, -p.tail_index - 1.0);
        } else {
          return 0.0;  // unreachable: stable resolved by evaluable()
        }
      },
      d);
}

inline double cdf(const DistributionSpec& spec, double x) {
  std::optional<DistributionSpec> storage;
  const DistributionSpec& d = detail::evaluable(spec, storage);
  return std::visit(
      [x](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return detail::normal_cdf((x - p.mean) / p.stdev);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          if (x <= 0.0) return 0.0;
          return detail::normal_cdf((std::log(x) - p.log_mean) / p.log_stdev);
        } else if constexpr (std::is_same_v<T, Levy>) {
          if (p.orientation == LevyOrientation::RightTailed) {
            if (x <= p.location) return 0.0;
            return std::erfc(std::sqrt(p.scale / (2.0 * (x - p.location))));
          }
          if (x >= p.location) return 1.0;
          return std::erf(std::sqrt(p.scale / (2.0 * (p.location - x))));
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          return 0.5 + std::atan((x - p.location) / p.scale) / std::numbers::pi;
        } else if constexpr (std::is_same_v<T, Gpd>) {
          const double y = (x - p.threshold) / p.scale;
          if (y <= 0.0) return 0.0;
          if (p.shape == 0.0) return -std::expm1(-y);
          const double base = 1.0 + p.shape * y;
          if (base <= 0.0) return 1.0;
          return -std::expm1(-std::log1p(p.shape * y) / p.shape);
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          if (x <= p.lower_bound) return 0.0;
          return -std::expm1(-p.tail_index * std::log(x));
        } else {
          return 0.0;
        }
      },
      d);
}

/// Bisection on a monotone cdf; used for families without analytic inverse.
template <class Cdf>
double quantile_by_bisection(Cdf&& cdf_fn, double p, double lo = -1.0, double hi = 1.0) {
  while (cdf_fn(lo) > p) lo = lo * 2.0 - 1.0;
  while (cdf_fn(hi) < p) hi = hi * 2.0 + 1.0;
  for (int i = 0; i < 2000 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf_fn(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double quantile(const DistributionSpec& spec, double p) {
  require(p > 0.0 && p < 1.0, ErrorKind::Domain, "quantile level p must lie in (0, 1)");
  std::optional<DistributionSpec> storage;
  const DistributionSpec& d = detail::evaluable(spec, storage);
  return std::visit(
      [p](const auto& q) -> double {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, Normal>) {
          return q.mean + q.stdev * detail::normal_quantile(p);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          return std::exp(q.log_mean + q.log_stdev * detail::normal_quantile(p));
        } else if constexpr (std::is_same_v<T, Levy>) {
          if (q.orientation == LevyOrientation::RightTailed) {
            const double e = boost::math::erfc_inv(p);
            return q.location + q.scale / (2.0 * e * e);
          }
          const double e = boost::math::erf_inv(p);
          return q.location - q.scale / (2.0 * e * e);
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          return q.location + q.scale * std::tan(std::numbers::pi * (p - 0.5));
        } else if constexpr (std::is_same_v<T, Gpd>) {
          const double log_tail = std::log1p(-p);
          if (q.shape == 0.0) return q.threshold - q.scale * log_tail;
          return q.threshold + q.scale * std::expm1(-q.shape * log_tail) / q.shape;
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          return std::exp(-std::log1p(-p) / q.tail_index);
        } else {
          return 0.0;
        }
      },
      d);
}

/// Largest r for which E|X|^r is finite (infinity when all moments exist).
inline double moment_limit(const DistributionSpec& spec) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Stable>) {
          return d.stability_index == 2.0 ? kInfinity : d.stability_index;
        } else if constexpr (std::is_same_v<T, Levy>) {
          return 0.5;
        } else if constexpr (std::is_same_v<T, Cauchy>) {
          return 1.0;
        } else if constexpr (std::is_same_v<T, Gpd>) {
          return d.shape > 0.0 ? 1.0 / d.shape : kInfinity;
        } else if constexpr (std::is_same_v<T, PowerLaw>) {
          return d.tail_index;
        } else {
          return kInfinity;
        }
      },
      spec);
}

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Monte Carlo estimate of E|X|^r with a CLT standard error. When 2r exceeds
/// the moment limit the error is nominal (infinite variance).
inline MomentEstimate fractional_moment(const DistributionSpec& spec, double r,
                                        std::size_t mc_count, Seed seed) {
  validate(spec);
  require(r > 0.0 && std::isfinite(r), ErrorKind::Domain, "moment order r must be > 0");
  require(r < moment_limit(spec), ErrorKind::InfiniteMoment,
          "E|X|^r is infinite for r >= tail index of " + describe(spec));
  require(mc_count >= 2, ErrorKind::Domain, "mcCount must be >= 2");
  const Sampler sampler(spec);
  const std::size_t blocks = block_count(mc_count);
  std::vector<double> sums(blocks), sq(blocks);
  for_each_block(mc_count, [&](BlockRange b) {
    Rng rng(derive_seed(seed, {b.index}));
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const double v = std::pow(std::abs(sampler(rng)), r);
      s += v;
      s2 += v * v;
    }
    sums[b.index] = s;
    sq[b.index] = s2;
  });
  double s = 0.0, s2 = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    s += sums[b];
    s2 += sq[b];
  }
  const double n = static_cast<double>(mc_count);
  const double mean = s / n;
  const double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), mc_count};
}

}  // namespace heavytail
