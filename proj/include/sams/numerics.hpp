#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sams/common.hpp"

namespace sams {

// Log-gamma via the Lanczos approximation (g = 7, 9 terms). Relative error
// below 1e-13 on (0, 50], which covers every concentration and count this
// project feeds it. Reflection handles x < 0.5.
inline double lgamma_fn(double x) {
  static const double kLanczos[9] = {
      0.99999999999980993,      676.5203681218851,     -1259.1392167224028,
      771.32342877765313,       -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,     9.9843695780195716e-6, 1.5056327351493116e-7};
  if (!(x > 0.0)) throw ConfigError("lgamma_fn: requires x > 0");
  if (x < 0.5) {
    // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return std::log(M_PI / std::sin(M_PI * x)) - lgamma_fn(1.0 - x);
  }
  const double z = x - 1.0;
  double acc = kLanczos[0];
  for (int i = 1; i < 9; ++i) acc += kLanczos[i] / (z + i);
  const double t = z + 7.5;
  return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(acc);
}

// Digamma: recurrence up to x >= 10, then the asymptotic series. The shift
// keeps the truncated Bernoulli tail below ~1e-13 relative.
inline double digamma_fn(double x) {
  if (!(x > 0.0)) throw ConfigError("digamma_fn: requires x > 0");
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv;
  result -= inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132)))));
  return result;
}

// Trigamma, same scheme as digamma.
inline double trigamma_fn(double x) {
  if (!(x > 0.0)) throw ConfigError("trigamma_fn: requires x > 0");
  double result = 0.0;
  while (x < 10.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv + inv2 * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * (5.0 / 66))))));
  return result;
}

namespace detail {

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  const double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-14) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double ibeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln = lgamma_fn(a + b) - lgamma_fn(a) - lgamma_fn(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// P(T > t) for Student's t with df degrees of freedom.
inline double student_t_sf(double t, double df) {
  const double x = df / (df + t * t);
  const double half = 0.5 * ibeta(0.5 * df, 0.5, x);
  return t >= 0.0 ? half : 1.0 - half;
}

struct PairedTTest {
  double mean_diff = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double p_one_sided_less = 1.0;  // alternative: mean(x) < mean(y)
};

// Paired t-test on matched samples x_i, y_i.
inline PairedTTest paired_ttest(const std::vector<double>& x,
                                const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("paired_ttest: needs >= 2 matched pairs");
  const std::size_t n = x.size();
  PairedTTest out;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += x[i] - y[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  out.mean_diff = mean;
  out.df = static_cast<double>(n - 1);
  if (sd == 0.0) {
    out.t = mean == 0.0 ? 0.0 : (mean < 0.0 ? -std::numeric_limits<double>::infinity()
                                            : std::numeric_limits<double>::infinity());
    out.p_two_sided = mean == 0.0 ? 1.0 : 0.0;
    out.p_one_sided_less = mean < 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double sf = student_t_sf(std::fabs(out.t), out.df);
  out.p_two_sided = 2.0 * sf;
  out.p_one_sided_less = out.t < 0.0 ? student_t_sf(-out.t, out.df)
                                     : 1.0 - student_t_sf(out.t, out.df);
  return out;
}

// Linear-interpolation quantile on sorted data (the numpy/R-7 rule).
inline double quantile_linear(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ConfigError("quantile_linear: empty input");
  if (sorted.size() == 1) return sorted[0];
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Quintile class breakpoints {0.2, 0.4, 0.6, 0.8}.
inline std::vector<double> quintile_breakpoints(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {quantile_linear(values, 0.2), quantile_linear(values, 0.4),
          quantile_linear(values, 0.6), quantile_linear(values, 0.8)};
}

}  // namespace sams
