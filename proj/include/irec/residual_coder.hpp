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

// Residual channel: integer symbols coded with a range coder whose
// frequencies come from a Gaussian discretised onto unit bins.
//
// Tables use 16-bit precision. Both ends build them from the same (mu, sigma)
// doubles with detmath::normal_cdf, so they agree bit-for-bit.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "irec/detmath.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"

namespace irec {

inline constexpr int kProbabilityBits = 16;
inline constexpr std::uint32_t kProbabilityTotal = 1u << kProbabilityBits;
inline constexpr int kResidualMin = -255;
inline constexpr int kResidualMax = 255;

struct DiscretizedGaussian {
  double mu = 0.0;
  double sigma = 1.0;
  int lo = kResidualMin;
  int hi = kResidualMax;

  friend bool operator==(const DiscretizedGaussian&, const DiscretizedGaussian&) = default;
};

struct FrequencyTable {
  int lo = 0;
  std::vector<std::uint32_t> freq;
  std::vector<std::uint32_t> cum;  // size freq.size() + 1, cum.back() == total

  int hi() const { return lo + static_cast<int>(freq.size()) - 1; }
  std::uint32_t frequency(int symbol) const { return freq[static_cast<std::size_t>(symbol - lo)]; }
  // -log2 of the quantised probability.
  double cost_bits(int symbol) const {
    return -std::log2(static_cast<double>(frequency(symbol)) / kProbabilityTotal);
  }
};

// Quantises the discretised Gaussian to integer frequencies summing to 2^16.
// Each symbol first gets one tick, the remaining 2^16 - n ticks are shared in
// proportion to the bin probabilities (rounded down), and the leftover goes
// to the most probable symbol.
inline FrequencyTable pmf_quantized(const DiscretizedGaussian& model,
                                    int precision_bits = kProbabilityBits) {
  if (precision_bits != kProbabilityBits) {
    throw UsageError("pmf_quantized: only 16-bit precision is supported");
  }
  if (model.hi < model.lo) throw UsageError("pmf_quantized: empty support");
  const std::int64_t n = std::int64_t{model.hi} - model.lo + 1;
  if (n > std::int64_t{kProbabilityTotal}) {
    throw ConfigError("pmf_quantized: support of " + std::to_string(n) +
                      " symbols exceeds 2^16");
  }
  if (!std::isfinite(model.mu) || !std::isfinite(model.sigma) || model.sigma < 0.0) {
    throw NumericError("pmf_quantized: invalid model parameters");
  }
  const double sigma = std::max(model.sigma, kStdFloor);

  std::vector<double> p(static_cast<std::size_t>(n));
  double lower = detmath::normal_cdf((model.lo - 0.5 - model.mu) / sigma);
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double upper = detmath::normal_cdf((model.lo + i + 0.5 - model.mu) / sigma);
    p[i] = std::max(upper - lower, 0.0);
    total += p[i];
    lower = upper;
  }
  if (!(total > 0.0)) {
    // mu is so far outside the support that every bin underflowed.
    std::fill(p.begin(), p.end(), 0.0);
    p[model.mu < model.lo ? 0 : p.size() - 1] = 1.0;
    total = 1.0;
  }

  FrequencyTable t;
  t.lo = model.lo;
  t.freq.resize(p.size());
  const double spare = static_cast<double>(kProbabilityTotal - n);
  std::uint64_t assigned = 0;
  std::size_t most_probable = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    t.freq[i] = 1u + static_cast<std::uint32_t>(std::floor(p[i] / total * spare));
    assigned += t.freq[i];
    if (p[i] > p[most_probable]) most_probable = i;
  }
  t.freq[most_probable] += static_cast<std::uint32_t>(kProbabilityTotal - assigned);
  t.cum.resize(p.size() + 1);
  t.cum[0] = 0;
  for (std::size_t i = 0; i < p.size(); ++i) t.cum[i + 1] = t.cum[i] + t.freq[i];
  return t;
}

// Byte-oriented range coder, 32-bit range with carry propagation through a
// cached byte (the LZMA scheme). Range stays >= 2^24 between symbols.
class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq) {
    const std::uint32_t r = range_ >> kProbabilityBits;
    low_ += std::uint64_t{r} * cum;
    range_ = r * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

 private:
  static constexpr std::uint32_t kTop = 1u << 24;

  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(static_cast<std::uint32_t>(low_) >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFu) << 8;
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
    if (next_byte() != 0) throw CorruptStreamError("range coder stream must start with 0x00");
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  int decode(const FrequencyTable& t) {
    const std::uint32_t r = range_ >> kProbabilityBits;
    const std::uint32_t value = code_ / r;
    if (value >= kProbabilityTotal) throw CorruptStreamError("range coder value out of range");
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), value);
    const auto idx = static_cast<std::size_t>(it - t.cum.begin()) - 1;
    code_ -= r * t.cum[idx];
    range_ = r * t.freq[idx];
    while (range_ < kTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return t.lo + static_cast<int>(idx);
  }

 private:
  static constexpr std::uint32_t kTop = 1u << 24;

  std::uint8_t next_byte() {
    if (pos_ >= data_.size()) throw CorruptStreamError("range coder stream exhausted");
    return data_[pos_++];
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

namespace detail {
// Rebuilds the table only when the model changes between symbols.
class TableCache {
 public:
  const FrequencyTable& get(const DiscretizedGaussian& m) {
    if (!valid_ || !(m == model_)) {
      table_ = pmf_quantized(m);
      model_ = m;
      valid_ = true;
    }
    return table_;
  }

 private:
  bool valid_ = false;
  DiscretizedGaussian model_;
  FrequencyTable table_;
};
}  // namespace detail

inline std::vector<std::uint8_t> encode_residuals(std::span<const int> residuals,
                                                  std::span<const DiscretizedGaussian> models) {
  if (residuals.size() != models.size()) {
    throw UsageError("encode_residuals: one model per residual required");
  }
  RangeEncoder enc;
  detail::TableCache cache;
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    const FrequencyTable& t = cache.get(models[i]);
    const int r = residuals[i];
    if (r < t.lo || r > t.hi()) {
      throw UsageError("encode_residuals: residual " + std::to_string(r) + " at position " +
                       std::to_string(i) + " is outside the model support");
    }
    const auto idx = static_cast<std::size_t>(r - t.lo);
    enc.encode(t.cum[idx], t.freq[idx]);
  }
  return enc.finish();
}

inline std::vector<int> decode_residuals(std::span<const std::uint8_t> data,
                                         std::span<const DiscretizedGaussian> models,
                                         std::size_t count) {
  if (models.size() != count) throw UsageError("decode_residuals: one model per symbol required");
  RangeDecoder dec(data);
  detail::TableCache cache;
  std::vector<int> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode(cache.get(models[i]));
  return out;
}

// Ideal code length, sum of -log2 P(r_i) under the quantised tables.
inline double residual_cost_bits(std::span<const int> residuals,
                                 std::span<const DiscretizedGaussian> models) {
  if (residuals.size() != models.size()) {
    throw UsageError("residual_cost_bits: one model per residual required");
  }
  detail::TableCache cache;
  double bits = 0.0;
  for (std::size_t i = 0; i < residuals.size(); ++i) bits += cache.get(models[i]).cost_bits(residuals[i]);
  return bits;
}

}  // namespace irec
