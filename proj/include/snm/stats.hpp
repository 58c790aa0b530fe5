#ifndef SNM_STATS_HPP
#define SNM_STATS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>

namespace snm {

inline double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

namespace detail {

/// Continued fraction for the regularized incomplete beta function
/// (modified Lentz method).
inline double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double eps = std::numeric_limits<double>::epsilon();
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 10.0 * eps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double betainc(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw std::invalid_argument("betainc: a and b must be positive");
  }
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double log_bt = a * std::log(x) + b * std::log1p(-x) -
                  (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
  double bt = std::exp(log_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * detail::beta_cf(a, b, x) / a;
  }
  return 1.0 - bt * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Quantile of the Beta(a, b) distribution by bisection on the monotone CDF.
inline double beta_quantile(double p, double a, double b) {
  if (!(p >= 0.0) || !(p <= 1.0)) {
    throw std::invalid_argument("beta_quantile: p must lie in [0, 1]");
  }
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (betainc(a, b, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-15 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

/// Exact (Clopper-Pearson) two-sided binomial confidence interval for k
/// successes in n trials at the given confidence level.
inline std::pair<double, double> clopper_pearson(std::int64_t k,
                                                 std::int64_t n,
                                                 double confidence = 0.95) {
  if (n < 0 || k < 0 || k > n) {
    throw std::invalid_argument("clopper_pearson: need 0 <= k <= n");
  }
  if (n == 0) return {0.0, 1.0};
  double alpha = 1.0 - confidence;
  double lo = (k == 0) ? 0.0
                       : beta_quantile(alpha / 2.0, static_cast<double>(k),
                                       static_cast<double>(n - k + 1));
  double hi = (k == n) ? 1.0
                       : beta_quantile(1.0 - alpha / 2.0,
                                       static_cast<double>(k + 1),
                                       static_cast<double>(n - k));
  return {lo, hi};
}

/// Streaming mean / standard error accumulator (Welford).
class MeanAccumulator {
 public:
  void add(double x) {
    ++n_;
    double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  std::int64_t count() const { return n_; }
  double mean() const { return mean_; }

  double variance() const {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }

  double std_err() const {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::int64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace snm

#endif  // SNM_STATS_HPP
