#pragma once

// Standard normal special functions. Q below always means the CDF
// Phi(x) = P(N(0,1) <= x), never the upper tail.

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "tadc/errors.hpp"

namespace tadc {

namespace detail {

template <std::floating_point T>
inline void require_finite(T x, const char* fn) {
  if (!std::isfinite(x)) throw DomainError(std::string(fn) + ": non-finite argument");
}

template <std::floating_point T>
constexpr T log_sqrt_2pi = T(0.918938533204672741780329736405617639861L);

// Q(-t)/q(t) for t > 0 via the Laplace continued fraction
//   1/(t + 1/(t + 2/(t + 3/(t + ...)))),
// evaluated with the modified Lentz algorithm. Fast for t >= 5.
template <std::floating_point T>
T mills_ratio_cf(T t) {
  const T tiny = std::numeric_limits<T>::min() * 16;
  const T eps = std::numeric_limits<T>::epsilon();
  T f = t;
  T c = f;
  T d = 0;
  for (int n = 1; n < 500; ++n) {
    d = t + T(n) * d;
    if (std::abs(d) < tiny) d = tiny;
    d = 1 / d;
    c = t + T(n) / c;
    if (std::abs(c) < tiny) c = tiny;
    const T delta = c * d;
    f *= delta;
    if (std::abs(delta - 1) < eps) break;
  }
  return 1 / f;
}

// log(1 - exp(x)) for x <= 0.
template <std::floating_point T>
T log1mexp(T x) {
  if (x >= 0) return -std::numeric_limits<T>::infinity();
  return x > -std::numbers::ln2_v<T> ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// Versions that accept +-inf; used where interval endpoints may be unbounded.
template <std::floating_point T>
T log_pdf_ext(T x) {
  if (std::isinf(x)) return -std::numeric_limits<T>::infinity();
  return -x * x / 2 - log_sqrt_2pi<T>;
}

template <std::floating_point T>
T log_cdf_ext(T x) {
  if (x == std::numeric_limits<T>::infinity()) return 0;
  if (x == -std::numeric_limits<T>::infinity()) return -std::numeric_limits<T>::infinity();
  if (x < -5) return log_pdf_ext(x) + std::log(mills_ratio_cf(-x));
  if (x > 5) return std::log1p(-T(0.5) * std::erfc(x / std::numbers::sqrt2_v<T>));
  return std::log(T(0.5) * std::erfc(-x / std::numbers::sqrt2_v<T>));
}

}  // namespace detail

template <std::floating_point T>
T std_normal_pdf(T x) {
  detail::require_finite(x, "std_normal_pdf");
  return std::exp(detail::log_pdf_ext(x));
}

template <std::floating_point T>
T log_std_normal_pdf(T x) {
  detail::require_finite(x, "log_std_normal_pdf");
  return detail::log_pdf_ext(x);
}

template <std::floating_point T>
T std_normal_cdf(T x) {
  detail::require_finite(x, "std_normal_cdf");
  if (x < -5) return std::exp(detail::log_pdf_ext(x)) * detail::mills_ratio_cf(-x);
  return T(0.5) * std::erfc(-x / std::numbers::sqrt2_v<T>);
}

/// ln Q(x); finite for every finite x (the continued fraction covers the far left tail).
template <std::floating_point T>
T log_std_normal_cdf(T x) {
  detail::require_finite(x, "log_std_normal_cdf");
  return detail::log_cdf_ext(x);
}

/// q(x)/Q(x), the derivative of ln Q(x).
template <std::floating_point T>
T cdf_hazard(T x) {
  detail::require_finite(x, "cdf_hazard");
  if (x < -5) return 1 / detail::mills_ratio_cf(-x);
  return std::exp(detail::log_pdf_ext(x) - detail::log_cdf_ext(x));
}

template <std::floating_point T>
struct GaussianTail {
  T log_cdf;
  T log_pdf;
  T mills_ratio;  // pdf/cdf
};

template <std::floating_point T>
GaussianTail<T> gaussian_tail(T x) {
  return {log_std_normal_cdf(x), log_std_normal_pdf(x), cdf_hazard(x)};
}

/// ln(Q(hi) - Q(lo)) for lo < hi; either endpoint may be infinite.
template <std::floating_point T>
T log_cdf_difference(T lo, T hi) {
  if (std::isnan(lo) || std::isnan(hi)) throw DomainError("log_cdf_difference: NaN endpoint");
  if (!(lo < hi)) return -std::numeric_limits<T>::infinity();
  if (hi <= 0) {
    const T lh = detail::log_cdf_ext(hi);
    return lh + detail::log1mexp(detail::log_cdf_ext(lo) - lh);
  }
  if (lo >= 0) {
    const T ll = detail::log_cdf_ext(-lo);
    return ll + detail::log1mexp(detail::log_cdf_ext(-hi) - ll);
  }
  const T outside = std::exp(detail::log_cdf_ext(lo)) + std::exp(detail::log_cdf_ext(-hi));
  return std::log1p(-outside);
}

/// x with Q(x) = p. Acklam's rational approximation followed by two Halley steps.
template <std::floating_point T>
T inv_std_normal_cdf(T p) {
  if (!(p > 0 && p < 1)) throw DomainError("inv_std_normal_cdf: p must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  const double pd = static_cast<double>(p);
  const double plow = 0.02425;
  double x;
  if (pd < plow) {
    const double q = std::sqrt(-2 * std::log(pd));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (pd <= 1 - plow) {
    const double q = pd - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-pd));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  T z = static_cast<T>(x);
  for (int it = 0; it < 2; ++it) {
    // Work on the smaller tail so the residual keeps relative precision.
    T e;
    if (z < 0) {
      e = std_normal_cdf(z) - p;
    } else {
      e = (1 - p) - std_normal_cdf(-z);
    }
    const T u = e * std::exp(z * z / 2 + detail::log_sqrt_2pi<T>);
    z = z - u / (1 + z * u / 2);
  }
  return z;
}

/// Mean of N(center, stdev^2) restricted to [lower, upper].
///
/// Uses mean = c + s (q(a) - q(b)) / (Q(b) - Q(a)) with a = (l-c)/s, b = (u-c)/s,
/// evaluated in the log domain. Returns nullopt when the interval carries less
/// than 1e-300 probability.
template <std::floating_point T>
std::optional<T> try_truncated_gaussian_mean(T center, T stdev, T lower, T upper) {
  const T a = (lower - center) / stdev;
  const T b = (upper - center) / stdev;
  if (a > 0) {
    // Reflect so the interval never sits wholly in the upper tail.
    auto r = try_truncated_gaussian_mean(-center, stdev, -upper, -lower);
    if (!r) return std::nullopt;
    return -*r;
  }
  const T log_mass = log_cdf_difference(a, b);
  if (!(log_mass >= T(-690.7755278982137L))) return std::nullopt;
  const T ratio = std::exp(detail::log_pdf_ext(a) - log_mass) - std::exp(detail::log_pdf_ext(b) - log_mass);
  T m = center + stdev * ratio;
  if (m <= lower) m = std::nextafter(lower, upper);
  if (m >= upper) m = std::nextafter(upper, lower);
  return m;
}

template <std::floating_point T>
T truncated_gaussian_mean(T center, T stdev, T lower, T upper) {
  if (!std::isfinite(center) || !(stdev > 0) || !std::isfinite(stdev))
    throw DomainError("truncated_gaussian_mean: center must be finite and stdev positive");
  if (std::isnan(lower) || std::isnan(upper) || !(lower < upper))
    throw DomainError("truncated_gaussian_mean: require lower < upper");
  if (auto m = try_truncated_gaussian_mean(center, stdev, lower, upper)) return *m;
  double suggestion;
  if (std::isfinite(lower) && std::isfinite(upper))
    suggestion = static_cast<double>((lower + upper) / 2);
  else
    suggestion = static_cast<double>(std::isfinite(lower) ? lower : upper);
  throw DegenerateError("truncated_gaussian_mean: interval has numerically zero mass", suggestion);
}

/// Pairwise (cascade) summation; the result depends only on the element order.
double pairwise_sum(std::span<const double> values);

}  // namespace tadc
