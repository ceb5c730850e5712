#include "sgnep/games.hpp"
#include "sgnep/stochastic.hpp"

#include <gtest/gtest.h>

using namespace sgnep;

TEST(BatchSchedule, HandValues) {
  const BatchSchedule s;
  EXPECT_EQ(batch_size(s, 0), 1);
  EXPECT_EQ(batch_size(s, 9), 100);
  EXPECT_EQ(batch_size({2.0, 1.0, 0.5}, 3), 16);  // 2 * 4^1.5
  EXPECT_EQ(batch_size({0.1, 1.0, 1.0}, 0), 1);   // ceil(0.1)
}

TEST(BatchSchedule, MonotoneAndSummable) {
  for (const BatchSchedule s : {BatchSchedule{}, BatchSchedule{0.5, 2.0, 0.5}, BatchSchedule{3.0, 1.0, 2.0}}) {
    Index prev = 0;
    double sum = 0.0;
    for (Index k = 0; k <= 10000; ++k) {
      const Index n = batch_size(s, k);
      EXPECT_GE(n, prev);
      prev = n;
      sum += 1.0 / static_cast<double>(n);
    }
    EXPECT_LE(sum, inverse_batch_sum_bound(s));
  }
}

TEST(BatchSchedule, RejectsInvalidParameters) {
  EXPECT_THROW(batch_size({0.0, 1.0, 1.0}, 1), std::invalid_argument);
  EXPECT_THROW(batch_size({1.0, 0.0, 1.0}, 1), std::invalid_argument);
  EXPECT_THROW(batch_size({1.0, 1.0, 0.0}, 1), std::invalid_argument);
  EXPECT_THROW(batch_size({}, -1), std::invalid_argument);
}

TEST(SampleSource, ReproducibleStreams) {
  const GaussianNoise nz{Vector::Zero(3), Vector::Ones(3)};
  SampleSource a(7, 2), b(7, 2);
  EXPECT_EQ(a.draw_batch(0, nz, 5), b.draw_batch(0, nz, 5));
  EXPECT_EQ(a.draw_batch_mean(1, nz, 10000), b.draw_batch_mean(1, nz, 10000));
  // Draws from stream 0 do not perturb stream 1.
  SampleSource c(7, 2), d(7, 2);
  c.draw_batch(0, nz, 3);
  EXPECT_EQ(c.draw_batch(1, nz, 4), d.draw_batch(1, nz, 4));
  EXPECT_NE(SampleSource(7, 2).draw_batch(0, nz, 4), SampleSource(7, 2).draw_batch(1, nz, 4));
  EXPECT_THROW(a.draw_batch(2, nz, 1), std::out_of_range);
}

TEST(SampleSource, ExactLawBatchMeansHaveTheRightSpread) {
  const GaussianNoise nz{Vector::Constant(1, 2.0), Vector::Constant(1, 0.5)};
  SampleSource src(5, 1);
  const Index N = 100000;  // beyond the explicit limit
  const int reps = 4000;
  double m = 0.0, m2 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double v = src.draw_batch_mean(0, nz, N)(0);
    m += v;
    m2 += v * v;
  }
  m /= reps;
  const double sd = std::sqrt(m2 / reps - m * m);
  const double expected_sd = 0.5 / std::sqrt(double(N));
  EXPECT_NEAR(m, 2.0, 4.0 * expected_sd / std::sqrt(double(reps)));
  EXPECT_NEAR(sd / expected_sd, 1.0, 0.05);
}

TEST(EmpiricalError, ZeroVarianceGivesZero) {
  const GameSpec g = build_bilinear_game({BilinearVariant::unconstrained_monotone, 1.0, 0.0});
  const std::vector<Index> sizes{10, 100};
  const ErrorStats st = empirical_error(g, Vector::Ones(2), sizes, 30, 1);
  for (double e : st.mean_error) EXPECT_EQ(e, 0.0);
}

TEST(EmpiricalError, SlopeNearMinusOneHalf) {
  const GameSpec g = build_bilinear_game({BilinearVariant::unconstrained_monotone, 1.0, 0.5});
  const std::vector<Index> sizes{10, 100, 1000};
  const ErrorStats st = empirical_error(g, Vector::Ones(2), sizes, 200, 3);
  EXPECT_LE(st.slope, -0.4);
  EXPECT_GE(st.slope, -0.6);

  // Doubling the replications keeps each mean within 3 standard errors.
  const ErrorStats twice = empirical_error(g, Vector::Ones(2), sizes, 400, 4);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double se = std::hypot(st.std_error[i], twice.std_error[i]);
    EXPECT_LE(std::abs(st.mean_error[i] - twice.mean_error[i]), 3.0 * se);
  }
  EXPECT_THROW(empirical_error(g, Vector::Ones(2), sizes, 10, 1), std::invalid_argument);
}

TEST(EmpiricalError, ScheduleOverloadUsesBatchSizes) {
  const GameSpec g = build_bilinear_game({BilinearVariant::unconstrained_monotone, 1.0, 0.5});
  const std::vector<Index> ks{0, 9};
  const ErrorStats st = empirical_error(g, Vector::Ones(2), BatchSchedule{}, ks, 30, 1);
  EXPECT_EQ(st.batch_sizes, (std::vector<Index>{1, 100}));
}

TEST(LogLogSlope, ExactPowerLaw) {
  const std::vector<double> x{1, 10, 100}, y{1, 0.1, 0.01};
  EXPECT_NEAR(loglog_slope(x, y), -1.0, 1e-12);
  const std::vector<double> bad{1, 0, 1};
  EXPECT_TRUE(std::isnan(loglog_slope(x, bad)));
}
