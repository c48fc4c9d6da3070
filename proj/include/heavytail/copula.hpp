#pragma once

// EFGM and polynomial (power-type) copulas over power-law marginals:
// evaluation, sampling, validity checks, tail equivalence and dependent VaR.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/portfolio.hpp"
#include "heavytail/risk.hpp"
#include "heavytail/rng.hpp"
#include "heavytail/stats.hpp"

namespace heavytail {

/// Multivariate polynomial sum_i gamma_i * prod_j u_j^{i_j}.
class Polynomial {
 public:
  using Exponents = std::vector<unsigned>;

  Polynomial() = default;
  explicit Polynomial(std::size_t dim) : dim_(dim) {}
  Polynomial(std::size_t dim, const std::vector<std::pair<Exponents, double>>& terms) : dim_(dim) {
    for (const auto& [e, c] : terms) add_term(e, c);
  }

  static Polynomial constant(std::size_t dim, double c) {
    Polynomial p(dim);
    p.add_term(Exponents(dim, 0), c);
    return p;
  }

  /// u_j^power
  static Polynomial variable(std::size_t dim, std::size_t j, unsigned power = 1) {
    Polynomial p(dim);
    Exponents e(dim, 0);
    e[j] = power;
    p.add_term(e, 1.0);
    return p;
  }

  std::size_t dim() const noexcept { return dim_; }
  const std::map<Exponents, double>& terms() const noexcept { return terms_; }

  void add_term(const Exponents& e, double c) {
    require(e.size() == dim_, ErrorKind::Shape, "monomial exponent count must equal the dimension");
    if (c == 0.0) return;
    const double v = (terms_[e] += c);
    if (v == 0.0) terms_.erase(e);
  }

  Polynomial& operator+=(const Polynomial& o) {
    require(o.dim_ == dim_, ErrorKind::Shape, "polynomial dimensions differ");
    for (const auto& [e, c] : o.terms_) add_term(e, c);
    return *this;
  }
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a += b * -1.0; }
  friend Polynomial operator*(Polynomial a, double s) {
    for (auto& [e, c] : a.terms_) c *= s;
    if (s == 0.0) a.terms_.clear();
    return a;
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    require(a.dim_ == b.dim_, ErrorKind::Shape, "polynomial dimensions differ");
    Polynomial p(a.dim_);
    for (const auto& [ea, ca] : a.terms_)
      for (const auto& [eb, cb] : b.terms_) {
        Exponents e(a.dim_);
        for (std::size_t j = 0; j < a.dim_; ++j) e[j] = ea[j] + eb[j];
        p.add_term(e, ca * cb);
      }
    return p;
  }

  double operator()(std::span<const double> u) const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) {
      double t = c;
      for (std::size_t j = 0; j < dim_; ++j)
        for (unsigned k = 0; k < e[j]; ++k) t *= u[j];
      s += t;
    }
    return s;
  }

  Polynomial derivative(std::size_t j) const {
    Polynomial p(dim_);
    for (const auto& [e, c] : terms_) {
      if (e[j] == 0) continue;
      Exponents d = e;
      d[j] -= 1;
      p.add_term(d, c * e[j]);
    }
    return p;
  }

  /// Mixed partial over every coordinate listed in `which`.
  Polynomial derivative(const std::vector<std::size_t>& which) const {
    Polynomial p = *this;
    for (std::size_t j : which) p = p.derivative(j);
    return p;
  }

 private:
  std::size_t dim_ = 0;
  std::map<Exponents, double> terms_;
};

struct Efgm {
  std::size_t dimension = 2;
  double dependence = 0.0;  // gamma
};

struct PowerCopula {
  Polynomial cdf;  // C(u_1, ..., u_n) in coefficient form
};

using CopulaSpec = std::variant<Efgm, PowerCopula>;

inline std::size_t dimension(const CopulaSpec& c) {
  return std::visit(
      [](const auto& s) -> std::size_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Efgm>) return s.dimension;
        else return s.cdf.dim();
      },
      c);
}

inline void validate(const Efgm& e) {
  require(e.dimension >= 2, ErrorKind::ParameterDomain, "dimension must be >= 2");
  require(std::isfinite(e.dependence) && std::abs(e.dependence) <= 1.0, ErrorKind::ParameterDomain,
          "dependence: EFGM requires |gamma| <= 1");
}

namespace detail {

inline void check_unit_cube(std::span<const double> u) {
  for (double x : u)
    require(x >= 0.0 && x <= 1.0, ErrorKind::Domain, "copula arguments must lie in [0, 1]");
}

}  // namespace detail

/// prod u_i * (1 + gamma * prod (1 - u_i))
inline double efgm_cdf(std::span<const double> u, double gamma) {
  validate(Efgm{std::max<std::size_t>(u.size(), 2), gamma});
  detail::check_unit_cube(u);
  double p = 1.0, q = 1.0;
  for (double x : u) {
    p *= x;
    q *= 1.0 - x;
  }
  return p * (1.0 + gamma * q);
}

/// 1 + gamma * prod (1 - 2 u_i)
inline double efgm_density(std::span<const double> u, double gamma) {
  validate(Efgm{std::max<std::size_t>(u.size(), 2), gamma});
  detail::check_unit_cube(u);
  double q = 1.0;
  for (double x : u) q *= 1.0 - 2.0 * x;
  return 1.0 + gamma * q;
}

/// EFGM copula expanded into coefficient form.
inline Polynomial efgm_polynomial(std::size_t n, double gamma) {
  Polynomial prod_u = Polynomial::constant(n, 1.0);
  Polynomial prod_uv = Polynomial::constant(n, 1.0);
  for (std::size_t j = 0; j < n; ++j) {
    const auto u = Polynomial::variable(n, j);
    prod_u = prod_u * u;
    prod_uv = prod_uv * (u - Polynomial::variable(n, j, 2));
  }
  return prod_u + prod_uv * gamma;
}

/// Bivariate copula with cubic sections:
/// uv + theta uv(1-u)(1-v) [1 + lambda (1-2u)(1-2v)].
inline Polynomial cubic_section_polynomial(double theta, double lambda) {
  const auto one = Polynomial::constant(2, 1.0);
  const auto u = Polynomial::variable(2, 0), v = Polynomial::variable(2, 1);
  const auto base = u * v * (one - u) * (one - v);
  const auto bracket = one + (one - u * 2.0) * (one - v * 2.0) * lambda;
  return u * v + base * bracket * theta;
}

struct ValidityReport {
  bool valid = true;
  std::string violation;  // empty when valid
  std::vector<double> witness_low;
  std::vector<double> witness_high;
  double min_volume = 0.0;
};

/// Grid check of the copula axioms: uniform margins, groundedness and
/// nonnegative rectangle volumes (n-increasing).
inline ValidityReport power_copula_validity_check(const Polynomial& c, std::size_t grid = 32) {
  require(!c.terms().empty(), ErrorKind::Domain, "coefficient list must be nonempty");
  require(grid >= 2, ErrorKind::Domain, "grid resolution must be >= 2");
  const std::size_t n = c.dim();
  require(n >= 2, ErrorKind::Domain, "copula dimension must be >= 2");
  ValidityReport rep;
  const auto node = [&](std::size_t k) { return static_cast<double>(k) / static_cast<double>(grid); };

  // Iterate over all grid points of {0..grid}^d via an odometer.
  const auto for_each_point = [&](std::size_t d, std::size_t hi, auto&& fn) {
    std::vector<std::size_t> idx(d, 0);
    while (true) {
      if (!fn(idx)) return;
      std::size_t j = 0;
      while (j < d && ++idx[j] > hi) idx[j++] = 0;
      if (j == d) return;
    }
  };

  std::vector<double> u(n);
  for (std::size_t j = 0; j < n && rep.valid; ++j) {
    for (std::size_t k = 0; k <= grid; ++k) {
      std::fill(u.begin(), u.end(), 1.0);
      u[j] = node(k);
      if (std::abs(c(u) - u[j]) > 1e-9) {
        rep.valid = false;
        rep.violation = "margin";
        rep.witness_low = rep.witness_high = u;
        break;
      }
    }
    if (!rep.valid) break;
    for_each_point(n - 1, grid, [&](const std::vector<std::size_t>& idx) {
      for (std::size_t l = 0, m = 0; l < n; ++l) u[l] = l == j ? 0.0 : node(idx[m++]);
      if (std::abs(c(u)) > 1e-12) {
        rep.valid = false;
        rep.violation = "groundedness";
        rep.witness_low = rep.witness_high = u;
        return false;
      }
      return true;
    });
  }
  if (!rep.valid) return rep;

  std::vector<double> corner(n);
  double min_vol = std::numeric_limits<double>::infinity();
  for_each_point(n, grid - 1, [&](const std::vector<std::size_t>& idx) {
    double vol = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      int lows = 0;
      for (std::size_t l = 0; l < n; ++l) {
        const bool up = (mask >> l) & 1u;
        corner[l] = node(idx[l] + (up ? 1 : 0));
        lows += up ? 0 : 1;
      }
      vol += (lows % 2 ? -1.0 : 1.0) * c(corner);
    }
    if (vol < min_vol) {
      min_vol = vol;
      if (vol < -1e-12 && rep.valid) {
        rep.valid = false;
        rep.violation = "n-increasing";
        rep.witness_low.resize(n);
        rep.witness_high.resize(n);
        for (std::size_t l = 0; l < n; ++l) {
          rep.witness_low[l] = node(idx[l]);
          rep.witness_high[l] = node(idx[l] + 1);
        }
      }
    }
    return true;
  });
  rep.min_volume = min_vol;
  return rep;
}

inline void validate(const CopulaSpec& c) {
  if (const auto* e = std::get_if<Efgm>(&c)) {
    validate(*e);
    return;
  }
  const auto& p = std::get<PowerCopula>(c).cdf;
  const std::size_t grid = p.dim() <= 2 ? 32 : p.dim() == 3 ? 12 : 6;
  const auto r = power_copula_validity_check(p, grid);
  require(r.valid, ErrorKind::ParameterDomain,
          "power-type coefficients do not define a copula (" + r.violation + " violated)");
}

enum class CopulaSampling { Auto, Rejection };

namespace detail {

// Density sup over a grid (with endpoints) times a small safety factor.
inline double density_envelope(const Polynomial& density, std::size_t n) {
  const std::size_t grid = n <= 2 ? 64 : n == 3 ? 16 : 6;
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> u(n);
  double sup = 0.0;
  while (true) {
    for (std::size_t l = 0; l < n; ++l) u[l] = static_cast<double>(idx[l]) / static_cast<double>(grid);
    sup = std::max(sup, density(u));
    std::size_t j = 0;
    while (j < n && ++idx[j] > grid) idx[j++] = 0;
    if (j == n) break;
  }
  return 1.05 * sup;
}

// Bivariate EFGM second coordinate from u1 and a uniform v by solving the
// conditional-cdf quadratic u + g u (1 - u) = v, g = gamma (1 - 2 u1).
inline double efgm_conditional_inverse(double u1, double v, double gamma) {
  const double g = gamma * (1.0 - 2.0 * u1);
  const double b = 1.0 + g;
  return 2.0 * v / (b + std::sqrt(std::max(0.0, b * b - 4.0 * g * v)));
}

}  // namespace detail

/// count x n matrix of copula uniforms.
inline DrawMatrix sample_copula_uniforms(const CopulaSpec& c, std::size_t count, Seed seed,
                                         CopulaSampling method = CopulaSampling::Auto) {
  validate(c);
  require(count >= 1, ErrorKind::Domain, "count must be >= 1");
  const std::size_t n = dimension(c);
  DrawMatrix m{count, n, std::vector<double>(count * n)};

  const auto* efgm = std::get_if<Efgm>(&c);
  if (efgm && n == 2 && method == CopulaSampling::Auto) {
    const double gamma = efgm->dependence;
    for_each_block(count, [&](BlockRange b) {
      Rng rng(derive_seed(seed, {b.index}));
      for (std::size_t i = b.begin; i < b.end; ++i) {
        const double u1 = rng.uniform_open();
        m.values[2 * i] = u1;
        m.values[2 * i + 1] = detail::efgm_conditional_inverse(u1, rng.uniform_open(), gamma);
      }
    });
    return m;
  }

  Polynomial density_poly;
  double envelope;
  if (efgm) {
    envelope = 1.0 + std::abs(efgm->dependence);
  } else {
    std::vector<std::size_t> all(n);
    for (std::size_t j = 0; j < n; ++j) all[j] = j;
    density_poly = std::get<PowerCopula>(c).cdf.derivative(all);
    envelope = detail::density_envelope(density_poly, n);
  }
  require(1.0 / envelope >= 0.01, ErrorKind::Envelope,
          "rejection acceptance rate below 1% (density envelope too large)");
  const auto density = [&](std::span<const double> u) {
    if (efgm) {
      double q = 1.0;
      for (double x : u) q *= 1.0 - 2.0 * x;
      return 1.0 + efgm->dependence * q;
    }
    return density_poly(u);
  };
  for_each_block(count, [&](BlockRange b) {
    Rng rng(derive_seed(seed, {b.index}));
    std::vector<double> u(n);
    for (std::size_t i = b.begin; i < b.end;) {
      for (auto& x : u) x = rng.uniform_open();
      if (rng.uniform() * envelope <= density(u)) {
        std::copy(u.begin(), u.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * n));
        ++i;
      }
    }
  });
  return m;
}

namespace detail {

inline void require_invertible(const DistributionSpec& marginal) {
  try {
    (void)quantile(marginal, 0.5);
  } catch (const Error& e) {
    throw Error(ErrorKind::UnsupportedMarginal,
                "marginal " + describe(marginal) + " has no closed-form quantile");
  }
}

}  // namespace detail

/// Copula uniforms pushed through marginal quantile functions.
inline DrawMatrix sample_copula(const CopulaSpec& c, const std::vector<DistributionSpec>& marginals,
                                std::size_t count, Seed seed,
                                CopulaSampling method = CopulaSampling::Auto) {
  require(marginals.size() == dimension(c), ErrorKind::Shape,
          "marginal count must equal the copula dimension");
  for (const auto& mg : marginals) {
    validate(mg);
    detail::require_invertible(mg);
  }
  DrawMatrix m = sample_copula_uniforms(c, count, seed, method);
  const std::size_t n = m.cols;
  for_each_block(count, [&](BlockRange b) {
    for (std::size_t i = b.begin; i < b.end; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double& x = m.values[i * n + j];
        const auto* p = std::get_if<PowerLaw>(&marginals[j]);
        // Power-law inversion written on the survival scale.
        x = p ? p->lower_bound * std::pow(1.0 - x, -1.0 / p->tail_index) : quantile(marginals[j], x);
      }
  });
  return m;
}

struct TailRatio {
  double ratio = 0.0;
  stats::Interval ci;
  double dependent_prob = 0.0;
  double independent_prob = 0.0;
  double dependent_se = 0.0;
  double independent_se = 0.0;
  std::size_t dependent_hits = 0;
  std::size_t independent_hits = 0;
  double threshold = 0.0;  // z * n
};

namespace detail {

// Conditional survival P(U_j > u | U_-j = rest) for each coordinate j.
class ConditionalSurvival {
 public:
  explicit ConditionalSurvival(const CopulaSpec& c) : n_(dimension(c)) {
    if (const auto* e = std::get_if<Efgm>(&c)) {
      gamma_ = e->dependence;
      return;
    }
    const auto& p = std::get<PowerCopula>(c).cdf;
    for (std::size_t j = 0; j < n_; ++j) {
      std::vector<std::size_t> others;
      for (std::size_t l = 0; l < n_; ++l)
        if (l != j) others.push_back(l);
      partials_.push_back(p.derivative(others));
    }
  }

  /// `u` holds the conditioning coordinates; entry j is overwritten.
  /// `tail` is 1 - F_j at the threshold, i.e. the unconditional survival.
  double operator()(std::vector<double>& u, std::size_t j, double tail) const {
    if (tail <= 0.0) return 0.0;
    if (tail >= 1.0) return 1.0;
    if (partials_.empty()) {
      double g = gamma_;
      for (std::size_t l = 0; l < n_; ++l)
        if (l != j) g *= 1.0 - 2.0 * u[l];
      // 1 - [u + g u (1 - u)] with u = 1 - tail
      return std::clamp(tail * (1.0 - g * (1.0 - tail)), 0.0, 1.0);
    }
    u[j] = 1.0;
    const double whole = partials_[j](u);
    u[j] = 1.0 - tail;
    const double part = partials_[j](u);
    return whole > 0.0 ? std::clamp(1.0 - part / whole, 0.0, 1.0) : tail;
  }

 private:
  std::size_t n_;
  double gamma_ = 0.0;
  std::vector<Polynomial> partials_;
};

struct TailProbability {
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t hits = 0;
};

// P(sum X_i > t) for PowerLaw(alpha) marginals by conditional Monte Carlo:
// sum_j P(X_j > max(M_-j, t - S_-j) | U_-j), unbiased for any copula.
inline TailProbability conditional_tail(const std::optional<CopulaSpec>& c, std::size_t n, double alpha,
                                        double t, std::size_t mc_count, Seed seed) {
  DrawMatrix u = c ? sample_copula_uniforms(*c, mc_count, seed)
                   : sample_copula_uniforms(Efgm{n, 0.0}, mc_count, seed);
  const ConditionalSurvival surv(c ? *c : CopulaSpec{Efgm{n, 0.0}});
  const std::size_t blocks = block_count(mc_count);
  std::vector<double> s1(blocks), s2(blocks);
  std::vector<std::size_t> hits(blocks);
  for_each_block(mc_count, [&](BlockRange b) {
    std::vector<double> row(n), x(n);
    double a = 0.0, a2 = 0.0;
    std::size_t h = 0;
    for (std::size_t i = b.begin; i < b.end; ++i) {
      const auto r = u.row(i);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = std::pow(1.0 - r[j], -1.0 / alpha);
        total += x[j];
      }
      h += total > t;
      double e = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double rest_sum = 0.0, rest_max = 0.0;
        for (std::size_t l = 0; l < n; ++l)
          if (l != j) {
            rest_sum += x[l];
            rest_max = std::max(rest_max, x[l]);
          }
        const double c_j = std::max(rest_max, t - rest_sum);
        const double tail = c_j <= 1.0 ? 1.0 : std::pow(c_j, -alpha);
        std::copy(r.begin(), r.end(), row.begin());
        e += surv(row, j, tail);
      }
      a += e;
      a2 += e * e;
    }
    s1[b.index] = a;
    s2[b.index] = a2;
    hits[b.index] = h;
  });
  double a = 0.0, a2 = 0.0;
  std::size_t h = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    a += s1[b];
    a2 += s2[b];
    h += hits[b];
  }
  const auto m = stats::mean_with_ci(a, a2, mc_count);
  return {m.mean, m.std_error, h};
}

}  // namespace detail

/// Empirical `level` quantile of a sum of n independent PowerLaw(alpha) risks.
inline double independent_sum_quantile(double alpha, std::size_t n, double level, std::size_t mc_count,
                                       Seed seed) {
  const auto m = draw_matrix(PowerLaw{alpha, 1.0}, mc_count, n, seed);
  auto s = aggregate(m, WeightVector(std::vector<double>(n, 1.0), false));
  return var_in_place(s, level);
}

inline constexpr std::size_t kMinTailHits = 100;

/// P(sum X_i > z n | copula) / P(sum xi_i > z n | independent) with
/// PowerLaw(alpha) marginals. Independent streams for the two estimates; the
/// ratio interval is by the delta method.
inline TailRatio tail_equivalence_ratio(const CopulaSpec& c, double alpha, std::size_t n_risks, double z,
                                        std::size_t mc_count, Seed seed, double confidence = 0.95) {
  validate(c);
  require(dimension(c) == n_risks, ErrorKind::Shape, "copula dimension must equal nRisks");
  require(alpha > 0.0, ErrorKind::ParameterDomain, "tail index must be > 0");
  require(z > 0.0, ErrorKind::Domain, "z must be > 0");
  const double t = z * static_cast<double>(n_risks);
  const auto dep = detail::conditional_tail(c, n_risks, alpha, t, mc_count, derive_seed(seed, {0}));
  const auto ind = detail::conditional_tail(std::nullopt, n_risks, alpha, t, mc_count, derive_seed(seed, {1}));
  require(dep.hits >= kMinTailHits && ind.hits >= kMinTailHits, ErrorKind::Resolution,
          "fewer than " + std::to_string(kMinTailHits) +
              " tail hits; increase mcCount or lower z");
  TailRatio r;
  r.dependent_prob = dep.estimate;
  r.independent_prob = ind.estimate;
  r.dependent_se = dep.std_error;
  r.independent_se = ind.std_error;
  r.dependent_hits = dep.hits;
  r.independent_hits = ind.hits;
  r.threshold = t;
  r.ratio = dep.estimate / ind.estimate;
  const double rel = std::hypot(dep.std_error / dep.estimate, ind.std_error / ind.estimate);
  const double half = stats::z_critical(confidence) * r.ratio * rel;
  r.ci = {r.ratio - half, r.ratio + half};
  return r;
}

enum class SignVerdict { AggregateLower, AggregateHigher, Inconclusive };

inline std::string to_string(SignVerdict v) {
  switch (v) {
    case SignVerdict::AggregateLower: return "aggregate-lower";
    case SignVerdict::AggregateHigher: return "aggregate-higher";
    case SignVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct DependentVarComparison {
  RiskMeasureReport aggregate;  // VaR of (X1 + X2) / 2
  RiskMeasureReport single;     // VaR of X1
  SignVerdict verdict = SignVerdict::Inconclusive;
};

/// VaR of the equal-weight pair versus a single risk under EFGM(gamma) with
/// PowerLaw(alpha) marginals, from the same draws.
inline DependentVarComparison var_compare_dependent(double alpha, double gamma, double level,
                                                    std::size_t mc_count, Seed seed,
                                                    double confidence = 0.95) {
  require(level >= 0.99 && level < 1.0, ErrorKind::Domain, "level must lie in [0.99, 1)");
  const PowerLaw marginal{alpha, 1.0};
  const auto m = sample_copula(Efgm{2, gamma}, {marginal, marginal}, mc_count, seed);
  std::vector<double> mean(mc_count), first(mc_count);
  for (std::size_t i = 0; i < mc_count; ++i) {
    mean[i] = 0.5 * (m.values[2 * i] + m.values[2 * i + 1]);
    first[i] = m.values[2 * i];
  }
  DependentVarComparison out{var_report(mean, level, confidence), var_report(first, level, confidence)};
  out.aggregate.seed = out.single.seed = seed;
  out.aggregate.aggregation_count = 2;
  const stats::Interval a{out.aggregate.ci_low, out.aggregate.ci_high};
  const stats::Interval s{out.single.ci_low, out.single.ci_high};
  if (stats::disjoint(a, s))
    out.verdict = a.high < s.low ? SignVerdict::AggregateLower : SignVerdict::AggregateHigher;
  return out;
}

}  // namespace heavytail
