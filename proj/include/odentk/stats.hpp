#pragma once

#include <vector>

namespace odentk {

struct KsResult {
  double statistic = 0.0;  // sup |F_n - Phi((x - mean) / std)|
  double p_value = 0.0;    // asymptotic Kolmogorov tail at (sqrt(n) + 0.12 + 0.11/sqrt(n)) D
  double mean = 0.0;
  double std = 0.0;
};

// One-sample KS against the normal fitted by sample mean and std.
// Needs >= 8 samples; zero variance is an input error.
KsResult ks_normal_test(const std::vector<double>& samples);

// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2), clamped to [0, 1].
double kolmogorov_tail(double t);

double mean(const std::vector<double>& x);
// Unbiased sample standard deviation; needs >= 2 values.
double sample_std(const std::vector<double>& x);
double median(std::vector<double> x);

// Least-squares slope of log(y) against log(x); values must be positive.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace odentk
