#include <gtest/gtest.h>

#include <random>
#include <stdexcept>

#include "vsls/spline.hpp"

using vsls::MonotoneCubic;

// Reference values from scipy.interpolate.PchipInterpolator.
TEST(MonotoneCubic, MatchesReferenceMixedShape) {
  const MonotoneCubic p({0, 2, 3, 7, 10, 11}, {0.1, 0.9, 0.4, 0.4, 1.0, 0.2});
  const double q[] = {0.5, 1, 2.5, 4, 5.5, 8, 9.9, 10.5};
  const double want[] = {0.50625, 0.7500000000000002, 0.65, 0.4, 0.4, 0.5555555555555557, 0.9980444444444443, 0.73125};
  for (std::size_t i = 0; i < std::size(q); ++i) EXPECT_NEAR(p(q[i]), want[i], 1e-12) << q[i];
  const double slopes[] = {1.0, 0.0, 0.0, 0.0, 0.0, -1.05};
  for (std::size_t i = 0; i < std::size(slopes); ++i) EXPECT_NEAR(p.slopes()[i], slopes[i], 1e-12);
}

TEST(MonotoneCubic, MatchesReferenceIncreasing) {
  const MonotoneCubic p({1, 4, 6, 9}, {0.0, 0.3, 0.35, 1.0});
  const double q[] = {1.5, 2, 3, 5, 7, 8, 8.9};
  const double want[] = {0.06989850427350427, 0.13367521367521365, 0.23735042735042733, 0.3239712798118911,
                         0.4637376677988032,  0.6935355005660683,  0.967026264758208};
  for (std::size_t i = 0; i < std::size(q); ++i) EXPECT_NEAR(p(q[i]), want[i], 1e-12) << q[i];
  const double slopes[] = {0.145, 0.03846153846153846, 0.04257641921397379, 0.33166666666666667};
  for (std::size_t i = 0; i < std::size(slopes); ++i) EXPECT_NEAR(p.slopes()[i], slopes[i], 1e-12);
}

TEST(MonotoneCubic, HoldsEdgesOutsideRange) {
  const MonotoneCubic p({2, 3, 5, 8}, {0.4, 0.1, 0.7, 0.6});
  EXPECT_EQ(p(-10), 0.4);
  EXPECT_EQ(p(2), 0.4);
  EXPECT_EQ(p(8), 0.6);
  EXPECT_EQ(p(100), 0.6);
  const auto v = p.evaluate_integers(11);
  EXPECT_EQ(v[0], 0.4);
  EXPECT_EQ(v[10], 0.6);
  for (int i = 0; i < 11; ++i) EXPECT_DOUBLE_EQ(v[i], p(i));
}

TEST(MonotoneCubic, LinearBelowFourKnots) {
  const MonotoneCubic one({5}, {0.3});
  EXPECT_TRUE(one.is_linear());
  EXPECT_EQ(one(0), 0.3);
  EXPECT_EQ(one(9), 0.3);
  const MonotoneCubic three({0, 4, 6}, {0.0, 1.0, 0.0});
  EXPECT_TRUE(three.is_linear());
  EXPECT_DOUBLE_EQ(three(1), 0.25);
  EXPECT_DOUBLE_EQ(three(5), 0.5);
}

TEST(MonotoneCubic, RejectsBadKnots) {
  EXPECT_THROW(MonotoneCubic({}, {}), std::invalid_argument);
  EXPECT_THROW(MonotoneCubic({0, 0}, {1, 2}), std::invalid_argument);
  EXPECT_THROW(MonotoneCubic({0, 1}, {1}), std::invalid_argument);
}

// Between two knots the curve stays inside the knot values, and monotone data
// gives a monotone curve.
TEST(MonotoneCubic, NoOvershootProperty) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 12);
    std::vector<double> xs, ys;
    double x = 0;
    for (int i = 0; i < n; ++i) {
      x += 1 + static_cast<int>(rng() % 6);
      xs.push_back(x);
      ys.push_back(u(rng));
    }
    const bool sorted = trial % 2 == 0;
    if (sorted) std::sort(ys.begin(), ys.end());
    const MonotoneCubic p(xs, ys);
    const auto v = p.evaluate_integers(static_cast<std::int64_t>(x) + 3);
    for (int i = 0; i + 1 < n; ++i) {
      const double lo = std::min(ys[i], ys[i + 1]);
      const double hi = std::max(ys[i], ys[i + 1]);
      for (auto t = static_cast<std::int64_t>(xs[i]); t <= static_cast<std::int64_t>(xs[i + 1]); ++t) {
        ASSERT_GE(v[t], lo - 1e-12);
        ASSERT_LE(v[t], hi + 1e-12);
        if (sorted && t > 0) ASSERT_GE(v[t], v[t - 1] - 1e-12);
      }
    }
  }
}
