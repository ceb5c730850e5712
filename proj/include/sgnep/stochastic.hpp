#pragma once

#include "sgnep/game.hpp"

#include <cmath>
#include <limits>

namespace sgnep {

/// Increasing batch law N_k = ceil(c (k + k0)^(a+1)).
struct BatchSchedule {
  double c = 1.0;
  double k0 = 1.0;
  double a = 1.0;

  void validate() const {
    if (!(c > 0.0) || !(k0 > 0.0) || !(a > 0.0)) {
      throw std::invalid_argument("batch schedule needs c, k0, a > 0");
    }
  }
};

inline Index batch_size(const BatchSchedule &s, Index k) {
  s.validate();
  if (k < 0) throw std::invalid_argument("iteration index must be >= 0");
  const double raw = s.c * std::pow(static_cast<double>(k) + s.k0, s.a + 1.0);
  // pow can land one ulp above an exact integer.
  const double n = std::ceil(raw * (1.0 - 4.0 * std::numeric_limits<double>::epsilon()));
  if (n >= static_cast<double>(std::numeric_limits<Index>::max())) {
    return std::numeric_limits<Index>::max();
  }
  return std::max<Index>(1, static_cast<Index>(n));
}

/// Upper bound on sum_{k>=0} 1/N_k: first term plus the integral of the tail.
inline double inverse_batch_sum_bound(const BatchSchedule &s) {
  s.validate();
  return 1.0 / (s.c * std::pow(s.k0, s.a + 1.0)) + 1.0 / (s.c * s.a * std::pow(s.k0, s.a));
}

/// Empirical norm of the stochastic error F^SA - F at a fixed point.
struct ErrorStats {
  std::vector<Index> batch_sizes;
  std::vector<double> mean_error;
  std::vector<double> std_error;  // standard error of each mean
  std::vector<std::vector<double>> samples;
  double slope = std::numeric_limits<double>::quiet_NaN();  // d log(mean) / d log(N)
};

/// Least-squares slope of log y against log x; NaN when any y is not positive.
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline ErrorStats empirical_error(const GameSpec &game, const Vector &x,
                                  std::span<const Index> batch_sizes, Index reps,
                                  std::uint64_t seed) {
  if (reps < 30) throw std::invalid_argument("empirical_error needs at least 30 replications");
  const Vector mean = game.pseudograd_mean(x);
  SampleSource source(seed, game.agents());
  ErrorStats st;
  std::vector<double> nk;
  for (Index N : batch_sizes) {
    std::vector<double> errs;
    errs.reserve(static_cast<std::size_t>(reps));
    for (Index r = 0; r < reps; ++r) errs.push_back((game.pseudograd_sample(x, N, source) - mean).norm());
    double m = 0.0;
    for (double e : errs) m += e;
    m /= static_cast<double>(reps);
    double var = 0.0;
    for (double e : errs) var += (e - m) * (e - m);
    var /= static_cast<double>(reps - 1);
    st.batch_sizes.push_back(N);
    st.mean_error.push_back(m);
    st.std_error.push_back(std::sqrt(var / static_cast<double>(reps)));
    st.samples.push_back(std::move(errs));
    nk.push_back(static_cast<double>(N));
  }
  st.slope = loglog_slope(nk, st.mean_error);
  return st;
}

/// Same, with batch sizes taken from the schedule at iterations ks.
inline ErrorStats empirical_error(const GameSpec &game, const Vector &x, const BatchSchedule &s,
                                  std::span<const Index> ks, Index reps, std::uint64_t seed) {
  std::vector<Index> sizes;
  for (Index k : ks) sizes.push_back(batch_size(s, k));
  return empirical_error(game, x, sizes, reps, seed);
}

}  // namespace sgnep
