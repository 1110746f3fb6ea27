// Copyright 2026 The irec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reproducible transcendental functions.
//
// Everything the decoder must regenerate bit-for-bit (the shared normal
// stream, the auxiliary variance schedule, M, the residual frequency tables)
// goes through these routines instead of libm. They use only +, -, *, /,
// sqrt, floor and exact power-of-two scaling, all of which IEEE-754 pins
// down exactly, so results agree across compilers and platforms as long as
// floating-point contraction is disabled (the irec target sets
// -ffp-contract=off).
//
// Accuracy is a few ulp, which is plenty: these functions need to be
// identical on both ends of the channel, not correctly rounded.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

namespace irec::detmath {

inline constexpr double kPi = 3.14159265358979311600e+00;
inline constexpr double kHalfPi = 1.57079632679489655800e+00;
inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kInvLn2 = 1.44269504088896338700e+00;

// Natural logarithm for finite x > 0. Returns -inf for 0 and NaN otherwise.
inline double log(double x) {
  if (!(x > 0.0)) return x == 0.0 ? -std::numeric_limits<double>::infinity()
                                  : std::numeric_limits<double>::quiet_NaN();
  if (x == std::numeric_limits<double>::infinity()) return x;

  int exponent_bias = 0;
  if (x < 0x1p-1022) {  // subnormal: rescale exactly first
    x *= 0x1p54;
    exponent_bias = -54;
  }
  auto bits = std::bit_cast<std::uint64_t>(x);
  int e = static_cast<int>((bits >> 52) & 0x7ff) - 1023 + exponent_bias;
  bits = (bits & 0x000fffffffffffffULL) | 0x3ff0000000000000ULL;
  double m = std::bit_cast<double>(bits);  // [1, 2)
  if (m > 1.41421356237309504880) {
    m *= 0.5;
    ++e;
  }
  // log(m) = 2 atanh(s), |s| <= 0.1716.
  const double s = (m - 1.0) / (m + 1.0);
  const double s2 = s * s;
  double series = 1.0 / 25.0;
  for (int n = 11; n >= 0; --n) series = 1.0 / (2 * n + 1) + s2 * series;
  const double log_m = 2.0 * s * series;
  const double de = static_cast<double>(e);
  return de * kLn2Hi + (de * kLn2Lo + log_m);
}

inline double exp(double x) {
  if (x != x) return x;
  if (x > 709.782712893384) return std::numeric_limits<double>::infinity();
  if (x < -745.2) return 0.0;
  const double k = std::floor(x * kInvLn2 + 0.5);
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;  // |r| <= 0.35
  double poly = 1.0;
  for (int n = 17; n >= 1; --n) poly = 1.0 + r * poly / n;
  return std::ldexp(poly, static_cast<int>(k));
}

// x^y for x > 0.
inline double pow(double x, double y) { return irec::detmath::exp(y * irec::detmath::log(x)); }

namespace detail {

// Taylor kernels on [0, pi/4], nested Horner form.
inline double sin_kernel(double x) {
  const double x2 = x * x;
  double acc = 1.0;
  for (int n = 10; n >= 1; --n) acc = 1.0 - x2 / ((2.0 * n) * (2.0 * n + 1.0)) * acc;
  return x * acc;
}

inline double cos_kernel(double x) {
  const double x2 = x * x;
  double acc = 1.0;
  for (int n = 10; n >= 1; --n) acc = 1.0 - x2 / ((2.0 * n - 1.0) * (2.0 * n)) * acc;
  return acc;
}

}  // namespace detail

// (cos, sin) of the angle 2*pi*turn for turn in [0, 1). Range reduction is
// done on the turn fraction, where multiplying by 4 is exact.
inline std::pair<double, double> cos_sin_turn(double turn) {
  const double t = turn * 4.0;
  const double quadrant = std::floor(t);
  const double f = t - quadrant;  // [0, 1), exact
  double c, s;
  if (f <= 0.5) {
    const double angle = f * kHalfPi;
    c = detail::cos_kernel(angle);
    s = detail::sin_kernel(angle);
  } else {
    const double angle = (1.0 - f) * kHalfPi;
    c = detail::sin_kernel(angle);
    s = detail::cos_kernel(angle);
  }
  switch (static_cast<int>(quadrant) & 3) {
    case 0: return {c, s};
    case 1: return {-s, c};
    case 2: return {-c, -s};
    default: return {s, -c};
  }
}

// Complementary error function, Chebyshev fit with fractional error below
// 1.2e-7 everywhere (the classic erfcc approximation).
inline double erfc(double x) {
  const double z = x < 0.0 ? -x : x;
  const double t = 1.0 / (1.0 + 0.5 * z);
  const double poly =
      -z * z - 1.26551223 +
      t * (1.00002368 +
           t * (0.37409196 +
                t * (0.09678418 +
                     t * (-0.18628806 +
                          t * (0.27886807 +
                               t * (-1.13520398 +
                                    t * (1.48851587 + t * (-0.82215223 + t * 0.17087277))))))));
  const double ans = t * irec::detmath::exp(poly);
  return x >= 0.0 ? ans : 2.0 - ans;
}

// Standard normal CDF. Absolute error below 1e-7.
inline double normal_cdf(double x) {
  return 0.5 * irec::detmath::erfc(-x * 0.70710678118654752440);
}

}  // namespace irec::detmath
