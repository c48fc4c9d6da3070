#pragma once

// Weighted aggregation, majorization, Schur-ordering scans and the
// truncated-risk support bound.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "heavytail/dist.hpp"
#include "heavytail/error.hpp"
#include "heavytail/parallel.hpp"
#include "heavytail/risk.hpp"
#include "heavytail/rng.hpp"
#include "heavytail/stats.hpp"

namespace heavytail {

inline constexpr double kSimplexTolerance = 1e-12;

class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> weights, bool simplex = true)
      : weights_(std::move(weights)), simplex_(simplex) {
    require(!weights_.empty(), ErrorKind::Domain, "weight vector must be nonempty");
    for (double w : weights_)
      require(std::isfinite(w) && w >= 0.0, ErrorKind::Domain, "weights must be finite and >= 0");
    if (simplex_)
      require(std::abs(sum() - 1.0) <= kSimplexTolerance, ErrorKind::Domain,
              "simplex weights must sum to 1");
  }

  /// (1/n, ..., 1/n)
  static WeightVector equal(std::size_t n) {
    require(n >= 1, ErrorKind::Domain, "n must be >= 1");
    return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)), false).as_simplex();
  }

  /// (1, 0, ..., 0)
  static WeightVector concentrated(std::size_t n) {
    require(n >= 1, ErrorKind::Domain, "n must be >= 1");
    std::vector<double> w(n, 0.0);
    w[0] = 1.0;
    return WeightVector(std::move(w));
  }

  std::size_t size() const noexcept { return weights_.size(); }
  bool simplex() const noexcept { return simplex_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }
  double sum() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

  std::vector<double> descending() const {
    std::vector<double> d(weights_);
    std::sort(d.begin(), d.end(), std::greater<>());
    return d;
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (i) s += ";";
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", weights_[i]);
      s += buf;
    }
    return s + ")";
  }

 private:
  // 1/n rounding can leave the sum a few ulps off 1; still a simplex point.
  WeightVector as_simplex() && {
    simplex_ = true;
    return std::move(*this);
  }

  std::vector<double> weights_;
  bool simplex_ = false;
};

enum class TruncationMode { ZeroOut, Clip };

struct TruncationSpec {
  double support_length = kInfinity;
  TruncationMode mode = TruncationMode::ZeroOut;
};

inline std::string to_string(TruncationMode m) {
  return m == TruncationMode::ZeroOut ? "zero-out" : "clip";
}

inline double truncate(double x, const TruncationSpec& t) {
  const double a = t.support_length;
  if (std::isinf(a)) return x;
  if (t.mode == TruncationMode::ZeroOut) return std::abs(x) <= a ? x : 0.0;
  return std::copysign(std::min(std::abs(x), a), x);
}

inline std::vector<double> truncate(std::span<const double> samples, const TruncationSpec& t) {
  require(t.support_length > 0.0, ErrorKind::Domain, "support length a must be > 0");
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [&](double x) { return truncate(x, t); });
  return out;
}

/// Row-major replications x n matrix of i.i.d. draws.
struct DrawMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
};

/// Rows are generated in blocks; block b uses derive_seed(seed, {b}).
inline DrawMatrix draw_matrix(const DistributionSpec& spec, std::size_t rows, std::size_t cols,
                              Seed seed) {
  require(rows >= 1 && cols >= 1, ErrorKind::Domain, "draw matrix needs rows, cols >= 1");
  const Sampler sampler(spec);
  DrawMatrix m{rows, cols, std::vector<double>(rows * cols)};
  for_each_block(rows, [&](BlockRange b) {
    Rng rng(derive_seed(seed, {b.index}));
    for (std::size_t i = b.begin * cols; i < b.end * cols; ++i) m.values[i] = sampler(rng);
  });
  return m;
}

inline std::vector<double> aggregate(const DrawMatrix& draws, const WeightVector& w) {
  require(draws.cols == w.size(), ErrorKind::Shape,
          "draw matrix has " + std::to_string(draws.cols) + " columns but " +
              std::to_string(w.size()) + " weights");
  std::vector<double> z(draws.rows);
  const auto& wv = w.weights();
  for (std::size_t i = 0; i < draws.rows; ++i) {
    const double* x = draws.values.data() + i * draws.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < draws.cols; ++j) s += wv[j] * x[j];
    z[i] = s;
  }
  return z;
}

/// Calls fn(n, z) for each n in n_list, where z holds mc_count draws of the
/// equal-weight mean of n i.i.d. risks. Row r uses the same underlying draws
/// for every n (its first n), so the sweep shares common random numbers;
/// results depend on the largest n in the list.
/// Draws are regenerated per chunk of n values to bound memory.
template <class Fn>
void mean_of_n_sweep(const DistributionSpec& spec, std::span<const std::size_t> n_list,
                     std::size_t mc_count, Seed seed, Fn&& fn,
                     std::size_t max_chunk_values = std::size_t{1} << 24) {
  require(mc_count >= 1, ErrorKind::Domain, "mcCount must be >= 1");
  for (std::size_t n : n_list) require(n >= 1, ErrorKind::Domain, "aggregation count must be >= 1");
  const Sampler sampler(spec);
  const std::size_t per_chunk = std::max<std::size_t>(1, max_chunk_values / mc_count);
  // Every row consumes max_n draws so that chunking leaves the streams intact.
  const std::size_t max_n = *std::max_element(n_list.begin(), n_list.end());
  for (std::size_t start = 0; start < n_list.size(); start += per_chunk) {
    const auto chunk = n_list.subspan(start, std::min(per_chunk, n_list.size() - start));
    std::vector<std::vector<double>> z(chunk.size(), std::vector<double>(mc_count));
    for_each_block(mc_count, [&](BlockRange b) {
      Rng rng(derive_seed(seed, {b.index}));
      std::vector<double> prefix(max_n + 1);
      for (std::size_t r = b.begin; r < b.end; ++r) {
        for (std::size_t k = 1; k <= max_n; ++k) prefix[k] = prefix[k - 1] + sampler(rng);
        for (std::size_t c = 0; c < chunk.size(); ++c)
          z[c][r] = prefix[chunk[c]] / static_cast<double>(chunk[c]);
      }
    });
    for (std::size_t c = 0; c < chunk.size(); ++c) fn(chunk[c], z[c]);
  }
}

/// True iff v is majorized by w (v < w): descending partial sums of v never
/// exceed those of w.
inline bool majorizes(const WeightVector& v, const WeightVector& w) {
  require(v.size() == w.size(), ErrorKind::Incomparable, "majorization needs equal lengths");
  require(std::abs(v.sum() - w.sum()) <= kSimplexTolerance, ErrorKind::Incomparable,
          "majorization needs equal totals");
  const auto dv = v.descending(), dw = w.descending();
  double sv = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < dv.size(); ++i) {
    sv += dv[i];
    sw += dw[i];
    if (sv > sw + kSimplexTolerance) return false;
  }
  return true;
}

/// Convex path t * (1,0,...,0) + (1 - t) * (1/n,...,1/n), t = 0 .. 1.
inline std::vector<WeightVector> majorization_chain(std::size_t n, std::size_t steps) {
  require(n >= 1, ErrorKind::Domain, "n must be >= 1");
  if (n == 1) return {WeightVector::concentrated(1)};
  require(steps >= 2, ErrorKind::Domain, "steps must be >= 2");
  std::vector<WeightVector> chain;
  const double e = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < steps; ++k) {
    if (k == 0) {
      chain.push_back(WeightVector::equal(n));
      continue;
    }
    if (k + 1 == steps) {
      chain.push_back(WeightVector::concentrated(n));
      continue;
    }
    const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
    std::vector<double> w(n, (1.0 - t) * e);
    w[0] = t + (1.0 - t) * e;
    const double rest = std::accumulate(w.begin() + 1, w.end(), 0.0);
    w[0] = 1.0 - rest;
    chain.emplace_back(std::move(w));
  }
  return chain;
}

struct AggregationReport {
  WeightVector weights;
  double level = 0.0;
  double var_estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t sample_count = 0;
};

enum class SchurVerdict { IncreasingTowardEqual, DecreasingTowardEqual, Flat, Inconclusive };

inline std::string to_string(SchurVerdict v) {
  switch (v) {
    case SchurVerdict::IncreasingTowardEqual: return "increasing-toward-equal";
    case SchurVerdict::DecreasingTowardEqual: return "decreasing-toward-equal";
    case SchurVerdict::Flat: return "flat";
    case SchurVerdict::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

/// VaR(more equal vector) - VaR(less equal vector) for one consecutive pair.
struct GapEstimate {
  double estimate = 0.0;
  stats::Interval ci;
};

struct SchurScanResult {
  std::vector<AggregationReport> reports;
  std::vector<GapEstimate> gaps;
  SchurVerdict verdict = SchurVerdict::Inconclusive;
};

struct SchurScanOptions {
  double confidence = 0.95;
  std::size_t batches = 50;
};

/// VaR along a weight chain under common random numbers. Gap intervals come
/// from sectioning: the draw matrix is split into contiguous batches, batch
/// VaR gaps give a Student-t standard error around the full-sample gap, and
/// the confidence is Bonferroni-split across gaps.
inline SchurScanResult schur_scan(const DistributionSpec& spec, const std::vector<WeightVector>& chain,
                                  double level, std::size_t mc_count, Seed seed,
                                  const SchurScanOptions& opt = {}) {
  require(chain.size() >= 2, ErrorKind::DegenerateScan, "schur_scan needs a chain of >= 2 vectors");
  detail::check_level(level);
  const std::size_t n = chain.front().size();
  for (const auto& w : chain)
    require(w.size() == n, ErrorKind::Shape, "all chain vectors must have the same length");
  require(opt.batches >= 2 && mc_count / opt.batches >= 10, ErrorKind::Domain,
          "mcCount too small for the sectioning batches");

  const DrawMatrix draws = draw_matrix(spec, mc_count, n, seed);
  const std::size_t k = chain.size();
  const std::size_t batch_rows = mc_count / opt.batches;

  SchurScanResult out;
  std::vector<std::vector<double>> batch_var(k, std::vector<double>(opt.batches));
  std::vector<double> full_var(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto z = aggregate(draws, chain[c]);
    for (std::size_t b = 0; b < opt.batches; ++b) {
      std::vector<double> slice(z.begin() + static_cast<std::ptrdiff_t>(b * batch_rows),
                                z.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_rows));
      batch_var[c][b] = var_in_place(slice, level);
    }
    const auto rep = var_report(z, level, opt.confidence);
    full_var[c] = rep.point_estimate;
    out.reports.push_back({chain[c], level, rep.point_estimate, rep.ci_low, rep.ci_high, mc_count});
  }

  const double per_gap_conf = 1.0 - (1.0 - opt.confidence) / static_cast<double>(k - 1);
  const double t = stats::t_critical(per_gap_conf, static_cast<double>(opt.batches - 1));
  bool all_pos = true, all_neg = true, all_zero = true;
  for (std::size_t c = 0; c + 1 < k; ++c) {
    // Orient each gap as VaR(more equal) - VaR(less equal).
    double sign;
    if (majorizes(chain[c], chain[c + 1])) sign = 1.0;
    else if (majorizes(chain[c + 1], chain[c])) sign = -1.0;
    else throw Error(ErrorKind::Incomparable, "consecutive chain vectors are not majorization-ordered");
    const std::size_t more = sign > 0 ? c : c + 1, less = sign > 0 ? c + 1 : c;
    std::vector<double> g(opt.batches);
    for (std::size_t b = 0; b < opt.batches; ++b) g[b] = batch_var[more][b] - batch_var[less][b];
    const double se = stats::stdev(g) / std::sqrt(static_cast<double>(opt.batches));
    const double est = full_var[more] - full_var[less];
    GapEstimate gap{est, {est - t * se, est + t * se}};
    all_pos = all_pos && gap.ci.low > 0.0;
    all_neg = all_neg && gap.ci.high < 0.0;
    all_zero = all_zero && gap.ci.contains(0.0);
    out.gaps.push_back(gap);
  }
  if (all_pos) out.verdict = SchurVerdict::IncreasingTowardEqual;
  else if (all_neg) out.verdict = SchurVerdict::DecreasingTowardEqual;
  else if (all_zero) out.verdict = SchurVerdict::Flat;
  return out;
}

/// Paired Monte Carlo estimate of P(A) - P(B) from common draws.
struct ProbabilityDifference {
  double estimate = 0.0;
  double std_error = 0.0;
  stats::Interval ci;
  double prob_first = 0.0;
  double prob_second = 0.0;
  std::size_t hits_first = 0;
  std::size_t hits_second = 0;
  std::size_t sample_count = 0;
};

namespace detail {

// Streams mc_count rows of `cols` draws, evaluating the two events per row.
template <class EventPair>
ProbabilityDifference paired_difference(const DistributionSpec& spec, std::size_t cols,
                                        std::size_t mc_count, Seed seed, double confidence,
                                        EventPair events) {
  require(mc_count >= 2, ErrorKind::Domain, "mcCount must be >= 2");
  const Sampler sampler(spec);
  const std::size_t blocks = block_count(mc_count);
  struct Tally {
    std::size_t a = 0, b = 0, a_only = 0, b_only = 0;
  };
  std::vector<Tally> tallies(blocks);
  for_each_block(mc_count, [&](BlockRange r) {
    Rng rng(derive_seed(seed, {r.index}));
    std::vector<double> x(cols);
    Tally t;
    for (std::size_t i = r.begin; i < r.end; ++i) {
      for (auto& v : x) v = sampler(rng);
      const auto [ea, eb] = events(std::span<const double>(x));
      t.a += ea;
      t.b += eb;
      t.a_only += ea && !eb;
      t.b_only += eb && !ea;
    }
    tallies[r.index] = t;
  });
  Tally total;
  for (const auto& t : tallies) {
    total.a += t.a;
    total.b += t.b;
    total.a_only += t.a_only;
    total.b_only += t.b_only;
  }
  // D = 1{A} - 1{B} takes values +1 (a_only), -1 (b_only), 0.
  const double sum = static_cast<double>(total.a_only) - static_cast<double>(total.b_only);
  const double sum_sq = static_cast<double>(total.a_only + total.b_only);
  const auto m = stats::mean_with_ci(sum, sum_sq, mc_count, confidence);
  const double dn = static_cast<double>(mc_count);
  return {m.mean, m.std_error, m.ci, static_cast<double>(total.a) / dn,
          static_cast<double>(total.b) / dn, total.a, total.b, mc_count};
}

}  // namespace detail

/// G(w, z) = P(w[1] X1 + w[2] X2 > z) - P(X1 > z) with the two largest weights.
inline ProbabilityDifference estimate_G(const DistributionSpec& spec, const WeightVector& w, double z,
                                        std::size_t mc_count, Seed seed, double confidence = 0.95) {
  require(w.size() >= 2, ErrorKind::Domain, "estimate_G needs >= 2 weights");
  require(z > 0.0, ErrorKind::Domain, "z must be > 0");
  const auto d = w.descending();
  if (d[0] == 1.0) {
    ProbabilityDifference zero;
    zero.sample_count = 0;
    return zero;
  }
  const double w1 = d[0], w2 = d[1];
  return detail::paired_difference(spec, 2, mc_count, seed, confidence, [&](std::span<const double> x) {
    return std::pair{w1 * x[0] + w2 * x[1] > z, x[0] > z};
  });
}

/// F_n(z) = P(mean of n draws > z) - P(X1 > z).
inline ProbabilityDifference estimate_Fn(const DistributionSpec& spec, std::size_t n, double z,
                                         std::size_t mc_count, Seed seed, double confidence = 0.95) {
  require(n >= 3, ErrorKind::Domain, "estimate_Fn needs n >= 3");
  const double dn = static_cast<double>(n);
  return detail::paired_difference(spec, n, mc_count, seed, confidence, [&](std::span<const double> x) {
    return std::pair{std::accumulate(x.begin(), x.end(), 0.0) / dn > z, x[0] > z};
  });
}

enum class BoundVariant { Symmetric, Skewed, EqualWeightFn };

inline std::string to_string(BoundVariant v) {
  switch (v) {
    case BoundVariant::Symmetric: return "symmetric";
    case BoundVariant::Skewed: return "skewed";
    case BoundVariant::EqualWeightFn: return "equal-weight-Fn";
  }
  return "unknown";
}

inline constexpr double kBoundSafetyFactor = 1.05;

struct SupportBound {
  double a = 0.0;
  double moment = 0.0;   // plug-in E|X1|^r
  double divisor = 0.0;  // plug-in G(w, z) or F_n(z)
  double r = 0.0;
  std::size_t n = 0;
  BoundVariant variant = BoundVariant::Symmetric;
};

/// (E|X1|^r (n - 1) / (c D))^(1/r) times the safety factor, with c = 2 for
/// the symmetric and equal-weight variants and c = 1 for the skewed one.
inline SupportBound support_bound_from(double moment, double divisor, double r, std::size_t n,
                                       BoundVariant variant) {
  require(r > 0.0 && r < 1.0, ErrorKind::Domain, "r must lie in (0, 1)");
  require(n >= 2, ErrorKind::Domain, "n must be >= 2");
  require(divisor > 0.0, ErrorKind::BoundUndefined,
          "bound undefined: divisor estimate is not positive");
  const double c = variant == BoundVariant::Skewed ? 1.0 : 2.0;
  const double a = std::pow(moment * static_cast<double>(n - 1) / (c * divisor), 1.0 / r);
  return {kBoundSafetyFactor * a, moment, divisor, r, n, variant};
}

inline SupportBound support_bound(const DistributionSpec& spec, const WeightVector& w, double z,
                                  double r, std::size_t n, BoundVariant variant,
                                  std::size_t mc_count, Seed seed) {
  require(r > 0.0 && r < 1.0, ErrorKind::Domain, "r must lie in (0, 1)");
  const auto moment = fractional_moment(spec, r, mc_count, derive_seed(seed, {0}));
  double divisor;
  if (variant == BoundVariant::EqualWeightFn) {
    divisor = n >= 3 ? estimate_Fn(spec, n, z, mc_count, derive_seed(seed, {1})).estimate
                     : estimate_G(spec, WeightVector::equal(2), z, mc_count, derive_seed(seed, {1})).estimate;
  } else {
    divisor = estimate_G(spec, w, z, mc_count, derive_seed(seed, {1})).estimate;
  }
  return support_bound_from(moment.mean, divisor, r, n, variant);
}

struct TruncatedOrdering {
  ProbabilityDifference difference;  // P(Y_w(a) > z) - P(Y_1(a) > z)
  bool verdict = false;
};

/// CRN estimates of P(Y_w(a) > z) and P(Y_1(a) > z) for truncated risks.
inline TruncatedOrdering verify_truncated_ordering(const DistributionSpec& spec, const WeightVector& w,
                                                   double z, const TruncationSpec& t,
                                                   std::size_t mc_count, Seed seed,
                                                   double confidence = 0.95) {
  require(w.simplex(), ErrorKind::Domain, "verify_truncated_ordering needs simplex weights");
  require(t.support_length > 0.0, ErrorKind::Domain, "support length a must be > 0");
  const double a = t.support_length;
  // |Y_i| <= a, so Y_w <= a * sum(w) = a; both events are impossible when a <= z.
  if (a <= z) {
    TruncatedOrdering none;
    none.difference.sample_count = mc_count;
    return none;
  }
  const auto& wv = w.weights();
  auto d = detail::paired_difference(spec, w.size(), mc_count, seed, confidence,
                                     [&](std::span<const double> x) {
                                       double s = 0.0;
                                       for (std::size_t i = 0; i < x.size(); ++i)
                                         s += wv[i] * truncate(x[i], t);
                                       return std::pair{s > z, truncate(x[0], t) > z};
                                     });
  require(d.hits_first + d.hits_second > 0, ErrorKind::Resolution,
          "no tail hits in either estimate; increase mcCount");
  return {d, d.ci.low > 0.0};
}

}  // namespace heavytail
