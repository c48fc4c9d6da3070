#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "heavytail/dist.hpp"
#include "heavytail/stats.hpp"

namespace ht = heavytail;

namespace {

std::vector<double> mean_of_draws(const ht::DistributionSpec& spec, std::size_t reps, std::size_t n,
                                  ht::Seed seed) {
  const auto draws = ht::sample(spec, reps * n, seed);
  std::vector<double> out(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += draws[r * n + i];
    out[r] = s / static_cast<double>(n);
  }
  return out;
}

ht::ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const ht::Error& e) {
    return e.kind();
  }
  return ht::ErrorKind::Usage;
}

}  // namespace

TEST(Sample, NormalMeanNearZero) {
  const auto x = ht::sample(ht::Normal{0.0, 1.0}, 1'000'000, 11);
  EXPECT_NEAR(ht::stats::mean(x), 0.0, 0.005);
}

TEST(Sample, CauchyExceedanceOfOne) {
  const auto x = ht::sample(ht::Cauchy{0.0, 1.0}, 1'000'000, 12);
  const double frac =
      static_cast<double>(std::count_if(x.begin(), x.end(), [](double v) { return v > 1.0; })) /
      static_cast<double>(x.size());
  EXPECT_NEAR(frac, 0.25, 0.002);
}

TEST(Sample, StableAlphaTwoVarianceIsTwiceScaleSquared) {
  const auto x = ht::sample(ht::Stable{2.0, 1.0, 0.0, 0.0}, 1'000'000, 13);
  const double sd = ht::stats::stdev(x);
  EXPECT_NEAR(sd * sd, 2.0, 0.04);
}

TEST(Sample, DeterministicPerSeed) {
  const ht::Stable s{0.7, 1.0, 0.3, 0.0};
  const auto a = ht::sample(s, 100'000, 99);
  const auto b = ht::sample(s, 100'000, 99);
  const auto c = ht::sample(s, 100'000, 100);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Sample, InvalidSpecNamesField) {
  try {
    ht::sample(ht::Stable{2.5, 1.0, 0.0, 0.0}, 10, 1);
    FAIL();
  } catch (const ht::Error& e) {
    EXPECT_EQ(e.kind(), ht::ErrorKind::ParameterDomain);
    EXPECT_NE(std::string(e.what()).find("stabilityIndex"), std::string::npos);
  }
  try {
    ht::sample(ht::Gpd{0.2, -1.0, 0.0}, 10, 1);
    FAIL();
  } catch (const ht::Error& e) {
    EXPECT_NE(std::string(e.what()).find("scale"), std::string::npos);
  }
  EXPECT_EQ(kind_of([] { ht::sample(ht::Stable{1.5, 1.0, 1.5, 0.0}, 10, 1); }),
            ht::ErrorKind::ParameterDomain);
  EXPECT_EQ(kind_of([] { ht::sample(ht::PowerLaw{1.0, 2.0}, 10, 1); }),
            ht::ErrorKind::ParameterDomain);
  EXPECT_EQ(kind_of([] { ht::sample(ht::Normal{}, 0, 1); }), ht::ErrorKind::Domain);
}

TEST(Evaluate, CauchyCdfAtLocationIsHalf) {
  EXPECT_DOUBLE_EQ(ht::cdf(ht::Cauchy{0.0, 1.0}, 0.0), 0.5);
}

TEST(Evaluate, MirroredLevyCdfIsOneAtAndAboveLocation) {
  const ht::Levy l{2.0, 1.5, ht::LevyOrientation::PaperMirrored};
  EXPECT_EQ(ht::cdf(l, 2.0), 1.0);
  EXPECT_EQ(ht::cdf(l, 3.0), 1.0);
  EXPECT_EQ(ht::density(l, 2.5), 0.0);
  EXPECT_GT(ht::density(l, 1.0), 0.0);
}

TEST(Evaluate, NormalDensitySymmetric) {
  const auto xs = ht::sample(ht::Normal{0.0, 3.0}, 200, 5);
  for (double x : xs) EXPECT_DOUBLE_EQ(ht::density(ht::Normal{}, x), ht::density(ht::Normal{}, -x));
}

TEST(Evaluate, DensityIsDerivativeOfCdf) {
  const std::vector<std::pair<ht::DistributionSpec, double>> cases = {
      {ht::Normal{1.0, 2.0}, 0.3},
      {ht::LogNormal{0.5, 0.7}, 2.0},
      {ht::Levy{0.0, 1.0}, 1.7},
      {ht::Levy{1.0, 2.0, ht::LevyOrientation::PaperMirrored}, -3.0},
      {ht::Cauchy{1.0, 2.0}, 4.0},
      {ht::Gpd{0.3, 2.0, 0.0}, 1.5},
      {ht::Gpd{-0.2, 1.0, 0.5}, 1.0},
      {ht::PowerLaw{0.7}, 3.0},
  };
  for (const auto& [spec, x] : cases) {
    const double h = 1e-5 * std::max(1.0, std::abs(x));
    const double fd = (ht::cdf(spec, x + h) - ht::cdf(spec, x - h)) / (2 * h);
    EXPECT_NEAR(ht::density(spec, x), fd, 1e-6 * std::max(1.0, fd)) << ht::describe(spec);
  }
}

TEST(Evaluate, CdfMonotone) {
  const std::vector<ht::DistributionSpec> specs = {
      ht::Normal{}, ht::LogNormal{}, ht::Levy{}, ht::Levy{0, 1, ht::LevyOrientation::PaperMirrored},
      ht::Cauchy{}, ht::Gpd{0.5, 1, 0}, ht::Gpd{-0.5, 1, 0}, ht::PowerLaw{0.3}};
  for (const auto& spec : specs) {
    double prev = 0.0;
    for (double x = -20.0; x <= 20.0; x += 0.01) {
      const double f = ht::cdf(spec, x);
      ASSERT_GE(f, prev) << ht::describe(spec) << " at " << x;
      ASSERT_LE(f, 1.0);
      prev = f;
    }
  }
}

TEST(Evaluate, GeneralStableIsSamplingOnly) {
  EXPECT_EQ(kind_of([] { ht::density(ht::Stable{0.7, 1.0, 0.0, 0.0}, 1.0); }),
            ht::ErrorKind::UnsupportedEvaluation);
  EXPECT_EQ(kind_of([] { ht::cdf(ht::Stable{1.0, 1.0, 0.5, 0.0}, 1.0); }),
            ht::ErrorKind::UnsupportedEvaluation);
  // Closed-form members of the stable family evaluate through their equivalent.
  EXPECT_DOUBLE_EQ(ht::cdf(ht::Stable{1.0, 2.0, 0.0, 1.0}, 3.0), ht::cdf(ht::Cauchy{1.0, 2.0}, 3.0));
  EXPECT_NEAR(ht::cdf(ht::Stable{2.0, 1.0, 0.0, 0.0}, 1.0),
              ht::cdf(ht::Normal{0.0, std::numbers::sqrt2}, 1.0), 1e-15);
}

TEST(Quantile, ClosedFormExamples) {
  EXPECT_NEAR(ht::quantile(ht::Cauchy{0.0, 1.0}, 0.75), 1.0, 1e-12);
  EXPECT_NEAR(ht::quantile(ht::Gpd{1.0, 1.0, 0.0}, 0.5), 1.0, 1e-12);
  EXPECT_NEAR(ht::quantile(ht::PowerLaw{1.0}, 0.99), 100.0, 1e-9);
}

TEST(Quantile, RejectsLevelsOutsideUnitInterval) {
  EXPECT_EQ(kind_of([] { ht::quantile(ht::Normal{}, 0.0); }), ht::ErrorKind::Domain);
  EXPECT_EQ(kind_of([] { ht::quantile(ht::Normal{}, 1.0); }), ht::ErrorKind::Domain);
  EXPECT_EQ(kind_of([] { ht::quantile(ht::Normal{}, 1.5); }), ht::ErrorKind::Domain);
}

TEST(Quantile, InvertsCdf) {
  const std::vector<ht::DistributionSpec> specs = {
      ht::Normal{1.0, 2.0},       ht::LogNormal{0.5, 1.2}, ht::Levy{0.5, 2.0},
      ht::Levy{0.5, 2.0, ht::LevyOrientation::PaperMirrored},
      ht::Cauchy{-1.0, 0.5},      ht::Gpd{0.1862, 1.0, 0.0}, ht::Gpd{0.0, 2.0, 1.0},
      ht::Gpd{-0.3, 1.0, 0.0},    ht::PowerLaw{0.1862},     ht::PowerLaw{1.5}};
  ht::Rng rng(42);
  for (const auto& spec : specs) {
    for (int i = 0; i < 100; ++i) {
      const double p = rng.uniform_open();
      const double x = ht::quantile(spec, p);
      EXPECT_NEAR(ht::cdf(spec, x), p, 1e-10 * p) << ht::describe(spec) << " p=" << p;
    }
  }
}

TEST(Quantile, RoundTripFromSupportPoints) {
  const ht::DistributionSpec spec = ht::LogNormal{0.0, 1.0};
  const auto xs = ht::sample(spec, 100, 8);
  for (double x : xs) EXPECT_NEAR(ht::quantile(spec, ht::cdf(spec, x)), x, 1e-9 * x);
}

TEST(Quantile, BisectionAgreesWithAnalyticInverse) {
  const ht::DistributionSpec spec = ht::Levy{0.0, 1.0};
  for (double p : {0.01, 0.3, 0.9, 0.999}) {
    const double x = ht::quantile_by_bisection([&](double v) { return ht::cdf(spec, v); }, p);
    EXPECT_NEAR(x, ht::quantile(spec, p), 1e-9 * ht::quantile(spec, p));
  }
}

TEST(FractionalMoment, CauchyHalfMomentIsSqrtTwo) {
  const auto m = ht::fractional_moment(ht::Cauchy{0.0, 1.0}, 0.5, 1'000'000, 21);
  EXPECT_NEAR(m.mean, std::numbers::sqrt2, 0.02);
  EXPECT_GT(m.std_error, 0.0);
}

TEST(FractionalMoment, NormalFirstAbsoluteMoment) {
  const auto m = ht::fractional_moment(ht::Normal{0.0, 1.0}, 1.0, 1'000'000, 22);
  EXPECT_NEAR(m.mean, std::sqrt(2.0 / std::numbers::pi), 4.0 * m.std_error);
}

TEST(FractionalMoment, MirroredSamplerGivesIdenticalAbsoluteMoment) {
  const auto right = ht::fractional_moment(ht::Levy{0.0, 1.0}, 0.25, 100'000, 23);
  const auto left = ht::fractional_moment(
      ht::Levy{0.0, 1.0, ht::LevyOrientation::PaperMirrored}, 0.25, 100'000, 23);
  EXPECT_EQ(right.mean, left.mean);
}

TEST(FractionalMoment, InfiniteMomentRejected) {
  EXPECT_EQ(kind_of([] { ht::fractional_moment(ht::Stable{0.7, 1, 0, 0}, 0.7, 100, 1); }),
            ht::ErrorKind::InfiniteMoment);
  EXPECT_EQ(kind_of([] { ht::fractional_moment(ht::Cauchy{}, 1.0, 100, 1); }),
            ht::ErrorKind::InfiniteMoment);
  EXPECT_NO_THROW(ht::fractional_moment(ht::Stable{0.7, 1, 0, 0}, 0.5, 100, 1));
}

// Family equivalences checked with a two-sample KS test at the 1% level.
class FamilyEquivalence : public ::testing::Test {
 protected:
  static void expect_same_law(const std::vector<double>& a, const std::vector<double>& b) {
    const double d = ht::stats::ks_two_sample(a, b);
    EXPECT_LT(d, ht::stats::ks_two_sample_critical(a.size(), b.size(), 0.01));
  }
};

TEST_F(FamilyEquivalence, StableTwoIsNormal) {
  expect_same_law(ht::sample(ht::Stable{2.0, 1.0, 0.0, 0.0}, 100'000, 31),
                  ht::sample(ht::Normal{0.0, std::numbers::sqrt2}, 100'000, 32));
}

TEST_F(FamilyEquivalence, StableOneIsCauchy) {
  expect_same_law(ht::sample(ht::Stable{1.0, 2.0, 0.0, 1.0}, 100'000, 33),
                  ht::sample(ht::Cauchy{1.0, 2.0}, 100'000, 34));
}

TEST_F(FamilyEquivalence, StableHalfTotallySkewedIsLevy) {
  ht::Stable s1{0.5, 1.5, 1.0, 0.5, ht::StableParameterization::S1};
  expect_same_law(ht::sample(s1, 100'000, 35), ht::sample(ht::Levy{0.5, 1.5}, 100'000, 36));
  // The S0 law differs from S1 by a location shift of skewness * scale.
  ht::Stable s0{0.5, 1.5, 1.0, 0.5 + 1.5};
  expect_same_law(ht::sample(s0, 100'000, 37), ht::sample(ht::Levy{0.5, 1.5}, 100'000, 38));
}

TEST_F(FamilyEquivalence, CauchyClosedUnderAveraging) {
  expect_same_law(mean_of_draws(ht::Cauchy{1.0, 2.0}, 100'000, 10, 41),
                  ht::sample(ht::Cauchy{1.0, 2.0}, 100'000, 42));
}

TEST_F(FamilyEquivalence, LevyAverageScalesLinearly) {
  const double sigma = 0.5;
  const std::size_t n = 8;
  expect_same_law(mean_of_draws(ht::Levy{0.0, sigma}, 100'000, n, 43),
                  ht::sample(ht::Levy{0.0, sigma * n}, 100'000, 44));
}

TEST_F(FamilyEquivalence, StableAveragingScalesByPowerLaw) {
  // (X1 + X2) / 2 ~ 2^(1/alpha - 1) X for symmetric stable laws.
  const double a = 0.7;
  auto avg = mean_of_draws(ht::Stable{a, 1, 0, 0}, 100'000, 2, 45);
  auto single = ht::sample(ht::Stable{a, std::pow(2.0, 1.0 / a - 1.0), 0, 0}, 100'000, 46);
  expect_same_law(avg, single);
}
