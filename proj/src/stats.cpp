#include "odentk/stats.hpp"

#include <algorithm>
#include <cmath>

#include "odentk/error.hpp"

namespace odentk {

double kolmogorov_tail(double t) {
  if (t <= 0.0) return 1.0;
  // The alternating series converges slowly near 0; below 0.2 the tail is 1 within 1e-12.
  if (t < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double mean(const std::vector<double>& x) {
  require(!x.empty(), ErrorCode::input, "mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(const std::vector<double>& x) {
  require(x.size() >= 2, ErrorCode::input, "sample_std needs at least 2 values");
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double median(std::vector<double> x) {
  require(!x.empty(), ErrorCode::input, "median of an empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::input, "loglog_slope needs >= 2 paired points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, ErrorCode::numeric, "loglog_slope needs positive values");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  require(den > 0.0, ErrorCode::input, "loglog_slope needs distinct x values");
  return (n * sxy - sx * sy) / den;
}

KsResult ks_normal_test(const std::vector<double>& samples) {
  require(samples.size() >= 8, ErrorCode::input, "ks_normal_test needs at least 8 samples");
  for (double v : samples) require(std::isfinite(v), ErrorCode::domain, "ks_normal_test got a non-finite sample");
  KsResult r;
  r.mean = mean(samples);
  r.std = sample_std(samples);
  require(r.std > 0.0, ErrorCode::input, "degenerate sample: zero variance");
  std::vector<double> z = samples;
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double F = 0.5 * std::erfc(-(z[i] - r.mean) / (r.std * std::sqrt(2.0)));
    d = std::max({d, (i + 1) / n - F, F - i / n});
  }
  r.statistic = d;
  const double rn = std::sqrt(n);
  r.p_value = kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d);
  return r;
}

}  // namespace odentk
