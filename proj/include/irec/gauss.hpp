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

// Diagonal Gaussian algebra. All quantities are in nats.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "irec/errors.hpp"

namespace irec {

// Standard deviations are clamped to this floor at construction so that
// collapsed posterior dimensions keep finite log-densities.
inline constexpr double kStdFloor = 1e-6;

using Vector = std::vector<double>;

class DiagGaussian {
 public:
  DiagGaussian(Vector mean, Vector std) : mean_(std::move(mean)), std_(std::move(std)) {
    if (mean_.empty() || mean_.size() != std_.size()) {
      throw UsageError("DiagGaussian: mean and std must have equal length >= 1 (got " +
                       std::to_string(mean_.size()) + " and " + std::to_string(std_.size()) + ")");
    }
    for (std::size_t i = 0; i < mean_.size(); ++i) {
      if (!std::isfinite(mean_[i]) || !std::isfinite(std_[i])) {
        throw NumericError("DiagGaussian: non-finite parameter at dimension " + std::to_string(i));
      }
      if (std_[i] < 0.0) {
        throw UsageError("DiagGaussian: negative std at dimension " + std::to_string(i));
      }
      std_[i] = std::max(std_[i], kStdFloor);
    }
  }

  // Isotropic N(mean, std^2 I) of the given dimension.
  static DiagGaussian isotropic(std::size_t dims, double mean = 0.0, double stddev = 1.0) {
    return DiagGaussian(Vector(dims, mean), Vector(dims, stddev));
  }
  static DiagGaussian standard(std::size_t dims) { return isotropic(dims); }

  std::size_t dims() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& std() const { return std_; }
  double mean(std::size_t i) const { return mean_[i]; }
  double std(std::size_t i) const { return std_[i]; }
  double variance(std::size_t i) const { return std_[i] * std_[i]; }

  friend bool operator==(const DiagGaussian&, const DiagGaussian&) = default;

 private:
  Vector mean_;
  Vector std_;
};

namespace detail {
inline void require_same_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}
}  // namespace detail

// Per-dimension KL(N(mq, sq^2) || N(mp, sp^2)).
inline double kl_divergence_1d(double mq, double sq, double mp, double sp) {
  const double ratio = (sq * sq) / (sp * sp);
  const double diff = mq - mp;
  return 0.5 * (ratio + diff * diff / (sp * sp) - 1.0 - std::log(ratio));
}

inline double kl_divergence(const DiagGaussian& q, const DiagGaussian& p) {
  detail::require_same_dims(q.dims(), p.dims(), "kl_divergence");
  double total = 0.0;
  for (std::size_t i = 0; i < q.dims(); ++i) {
    total += kl_divergence_1d(q.mean(i), q.std(i), p.mean(i), p.std(i));
  }
  return total;
}

// log q(z) - log p(z). The 2*pi normalisers cancel.
inline double log_density_ratio(const DiagGaussian& q, const DiagGaussian& p,
                                std::span<const double> z) {
  detail::require_same_dims(q.dims(), p.dims(), "log_density_ratio");
  detail::require_same_dims(q.dims(), z.size(), "log_density_ratio");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double tq = (z[i] - q.mean(i)) / q.std(i);
    const double tp = (z[i] - p.mean(i)) / p.std(i);
    total += 0.5 * (tp * tp - tq * tq) + std::log(p.std(i) / q.std(i));
  }
  return total;
}

inline double log_density(const DiagGaussian& q, std::span<const double> z) {
  detail::require_same_dims(q.dims(), z.size(), "log_density");
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double t = (z[i] - q.mean(i)) / q.std(i);
    total += -0.5 * t * t - std::log(q.std(i)) - kHalfLog2Pi;
  }
  return total;
}

// z = scale * z' + shift, elementwise.
struct AffineMap {
  Vector scale;
  Vector shift;

  Vector apply(std::span<const double> whitened) const {
    detail::require_same_dims(scale.size(), whitened.size(), "AffineMap::apply");
    Vector out(whitened.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale[i] * whitened[i] + shift[i];
    return out;
  }

  bool is_identity() const {
    return std::all_of(scale.begin(), scale.end(), [](double s) { return s == 1.0; }) &&
           std::all_of(shift.begin(), shift.end(), [](double s) { return s == 0.0; });
  }
};

struct Whitened {
  DiagGaussian target;  // q expressed in coordinates where the prior is N(0, I)
  AffineMap transform;  // maps whitened coordinates back to the original ones
};

// Change of variables that turns the coding distribution p into N(0, I).
// KL is invariant under it.
inline Whitened whiten(const DiagGaussian& q, const DiagGaussian& p) {
  detail::require_same_dims(q.dims(), p.dims(), "whiten");
  Vector mean(q.dims()), stddev(q.dims());
  for (std::size_t i = 0; i < q.dims(); ++i) {
    mean[i] = (q.mean(i) - p.mean(i)) / p.std(i);
    stddev[i] = q.std(i) / p.std(i);
  }
  return Whitened{DiagGaussian(std::move(mean), std::move(stddev)), AffineMap{p.std(), p.mean()}};
}

}  // namespace irec
