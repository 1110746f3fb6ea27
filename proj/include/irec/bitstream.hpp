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

// IREC container.
//
//   header (54 bytes, integers little-endian)
//     0  magic "IREC"       4  version u8 = 1    5  flags u8 (bit0: residual)
//     6  seed u64          14  omega f64        22  epsilon f64
//    30  model_id u64      38  block_count u32  42  latent_dim u32
//    46  image_width u32   50  image_height u32
//   blocks, block_count times
//     K as unsigned LEB128, then the index tuple as one mixed-radix integer
//     sum_k i_k M^k in ceil(K log2 M) bits, most significant bit first,
//     zero-padded to a whole byte
//   residual section (flags bit0 only)
//     symbol count u32, then the range-coder bytes up to end of file
//
// docs/FORMAT.md walks through an annotated example.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "irec/aux_chain.hpp"
#include "irec/errors.hpp"
#include "irec/rec_codec.hpp"

namespace irec {

inline constexpr std::uint8_t kFormatVersion = 1;
inline constexpr std::uint8_t kFlagResidual = 0x01;
inline constexpr std::size_t kHeaderBytes = 54;

struct ContainerHeader {
  std::uint8_t version = kFormatVersion;
  std::uint8_t flags = 0;
  std::uint64_t seed = 0;
  double omega = 3.0;
  double epsilon = 0.2;
  std::uint64_t model_id = 0;
  std::uint32_t block_count = 0;
  std::uint32_t latent_dim = 0;
  std::uint32_t image_width = 0;
  std::uint32_t image_height = 0;

  bool has_residual() const { return (flags & kFlagResidual) != 0; }
  std::uint64_t samples_per_step() const { return irec::samples_per_step(omega, epsilon); }

  friend bool operator==(const ContainerHeader& a, const ContainerHeader& b) {
    // Bitwise comparison of the doubles so that round trips are exact.
    return a.version == b.version && a.flags == b.flags && a.seed == b.seed &&
           std::bit_cast<std::uint64_t>(a.omega) == std::bit_cast<std::uint64_t>(b.omega) &&
           std::bit_cast<std::uint64_t>(a.epsilon) == std::bit_cast<std::uint64_t>(b.epsilon) &&
           a.model_id == b.model_id && a.block_count == b.block_count &&
           a.latent_dim == b.latent_dim && a.image_width == b.image_width &&
           a.image_height == b.image_height;
  }
};

struct ResidualSection {
  std::uint32_t symbol_count = 0;
  std::vector<std::uint8_t> coded;
  friend bool operator==(const ResidualSection&, const ResidualSection&) = default;
};

struct Container {
  ContainerHeader header;
  std::vector<IndexTuple> blocks;
  std::optional<ResidualSection> residual;
  friend bool operator==(const Container&, const Container&) = default;
};

using BigUint = boost::multiprecision::cpp_int;

// Bits occupied by an index tuple of K steps: ceil(K log2 M), computed
// exactly as the bit length of M^K - 1.
inline std::uint64_t payload_bits(std::uint64_t steps, std::uint64_t m) {
  if (steps == 0 || m < 2) throw UsageError("payload_bits: need K >= 1 and M >= 2");
  BigUint top = boost::multiprecision::pow(BigUint(m), static_cast<unsigned>(steps)) - 1;
  return boost::multiprecision::msb(top) + 1;
}

inline std::size_t varint_length(std::uint64_t v) {
  std::size_t n = 1;
  while (v >= 0x80) {
    v >>= 7;
    ++n;
  }
  return n;
}

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      out_.push_back(static_cast<std::uint8_t>(v | 0x80));
      v >>= 7;
    }
    out_.push_back(static_cast<std::uint8_t>(v));
  }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (n > remaining()) {
      throw CorruptStreamError(std::string("truncated container while reading ") + what);
    }
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return take(1, what)[0]; }
  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto b = take(8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::uint64_t varint(const char* what) {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 35; shift += 7) {
      const std::uint8_t b = u8(what);
      v |= std::uint64_t{b & 0x7fu} << shift;
      if ((b & 0x80) == 0) {
        if (shift > 0 && b == 0) throw CorruptStreamError("non-canonical varint");
        return v;
      }
    }
    throw CorruptStreamError("varint longer than 5 bytes");
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void validate_header(const ContainerHeader& h) {
  if (h.version != kFormatVersion) {
    throw FormatError("unsupported container version " + std::to_string(h.version));
  }
  if ((h.flags & ~kFlagResidual) != 0) throw FormatError("unknown container flags");
  if (!(h.omega > 0.0) || !std::isfinite(h.omega)) throw FormatError("invalid omega in header");
  if (!(h.epsilon >= 0.0) || !std::isfinite(h.epsilon)) {
    throw FormatError("invalid epsilon in header");
  }
  try {
    (void)h.samples_per_step();
  } catch (const Error& e) {
    throw FormatError(std::string("header hyperparameters unusable: ") + e.what());
  }
}

inline void write_tuple(ByteWriter& w, const IndexTuple& t, std::uint64_t m) {
  const std::uint64_t steps = t.indices.size();
  if (steps == 0) throw UsageError("pack: empty index tuple");
  BigUint value = 0;
  for (std::size_t k = steps; k-- > 0;) {
    if (t.indices[k] >= m) {
      throw UsageError("pack: index " + std::to_string(t.indices[k]) + " >= M = " +
                       std::to_string(m));
    }
    value = value * m + t.indices[k];
  }
  const std::uint64_t nbits = payload_bits(steps, m);
  const std::uint64_t nbytes = (nbits + 7) / 8;
  value <<= static_cast<unsigned>(nbytes * 8 - nbits);  // zero padding in the low bits
  std::vector<std::uint8_t> be;
  boost::multiprecision::export_bits(value, std::back_inserter(be), 8, true);
  w.varint(steps);
  for (std::size_t i = be.size(); i < nbytes; ++i) w.u8(0);
  w.bytes(be.size() > nbytes ? std::span<const std::uint8_t>(be).last(nbytes)
                             : std::span<const std::uint8_t>(be));
}

inline IndexTuple read_tuple(ByteReader& r, std::uint64_t m) {
  const std::uint64_t steps = r.varint("block step count");
  if (steps == 0) throw CorruptStreamError("block with K = 0");
  if (steps > std::numeric_limits<std::uint32_t>::max()) throw CorruptStreamError("K overflows 32 bits");
  // Every step needs at least one bit; bail out before any big arithmetic.
  if (steps > r.remaining() * 8) throw CorruptStreamError("truncated block payload");
  const std::uint64_t nbits = payload_bits(steps, m);
  const std::uint64_t nbytes = (nbits + 7) / 8;
  auto raw = r.take(nbytes, "block payload");
  const unsigned pad = static_cast<unsigned>(nbytes * 8 - nbits);
  if (pad > 0 && (raw.back() & ((1u << pad) - 1u)) != 0) {
    throw CorruptStreamError("nonzero padding bits in block payload");
  }
  BigUint value;
  boost::multiprecision::import_bits(value, raw.begin(), raw.end(), 8, true);
  value >>= pad;
  IndexTuple t;
  t.indices.resize(steps);
  const BigUint radix = m;
  for (std::uint64_t k = 0; k < steps; ++k) {
    BigUint digit;
    boost::multiprecision::divide_qr(value, radix, value, digit);
    t.indices[k] = static_cast<std::uint32_t>(digit);
  }
  if (value != 0) throw CorruptStreamError("block payload exceeds M^K");
  return t;
}

}  // namespace detail

inline std::vector<std::uint8_t> pack(const Container& c) {
  ContainerHeader h = c.header;
  h.flags = static_cast<std::uint8_t>((h.flags & ~kFlagResidual) |
                                      (c.residual ? kFlagResidual : 0));
  try {
    detail::validate_header(h);
  } catch (const FormatError& e) {
    throw UsageError(std::string("pack: ") + e.what());
  }
  if (h.block_count != c.blocks.size()) {
    throw UsageError("pack: header block_count " + std::to_string(h.block_count) + " but " +
                     std::to_string(c.blocks.size()) + " blocks supplied");
  }
  const std::uint64_t m = h.samples_per_step();

  detail::ByteWriter w;
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("IREC"), 4));
  w.u8(h.version);
  w.u8(h.flags);
  w.u64(h.seed);
  w.f64(h.omega);
  w.f64(h.epsilon);
  w.u64(h.model_id);
  w.u32(h.block_count);
  w.u32(h.latent_dim);
  w.u32(h.image_width);
  w.u32(h.image_height);
  for (const auto& t : c.blocks) detail::write_tuple(w, t, m);
  if (c.residual) {
    w.u32(c.residual->symbol_count);
    w.bytes(c.residual->coded);
  }
  return w.take();
}

inline std::vector<std::uint8_t> pack(const ContainerHeader& h, const std::vector<IndexTuple>& blocks,
                                      const std::optional<ResidualSection>& residual = std::nullopt) {
  return pack(Container{h, blocks, residual});
}

inline Container unpack(std::span<const std::uint8_t> data) {
  detail::ByteReader r(data);
  if (data.size() < 4) throw FormatError("container shorter than its magic");
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), "IREC", 4) != 0) throw FormatError("bad magic, not an IREC file");
  if (data.size() < kHeaderBytes) throw CorruptStreamError("truncated container header");
  Container c;
  ContainerHeader& h = c.header;
  h.version = r.u8("version");
  h.flags = r.u8("flags");
  h.seed = r.u64("seed");
  h.omega = r.f64("omega");
  h.epsilon = r.f64("epsilon");
  h.model_id = r.u64("model id");
  h.block_count = r.u32("block count");
  h.latent_dim = r.u32("latent dim");
  h.image_width = r.u32("image width");
  h.image_height = r.u32("image height");
  detail::validate_header(h);
  const std::uint64_t m = h.samples_per_step();

  // Each block occupies at least two bytes.
  if (h.block_count > r.remaining() / 2) throw CorruptStreamError("truncated block section");
  c.blocks.reserve(h.block_count);
  for (std::uint32_t b = 0; b < h.block_count; ++b) c.blocks.push_back(detail::read_tuple(r, m));

  if (h.has_residual()) {
    ResidualSection res;
    res.symbol_count = r.u32("residual symbol count");
    auto rest = r.take(r.remaining(), "residual bytes");
    res.coded.assign(rest.begin(), rest.end());
    c.residual = std::move(res);
  } else if (r.remaining() != 0) {
    throw CorruptStreamError("trailing bytes after the last block");
  }
  return c;
}

struct CodelengthReport {
  std::uint64_t payload_bits = 0;  // sum of ceil(K log2 M) over blocks
  std::uint64_t length_bits = 0;   // the per-block K varints
  double ideal_bits = 0.0;         // sum of KL / ln 2
  double overhead_ratio = 0.0;     // payload / ideal, kUnboundedOverhead when ideal == 0
};

inline constexpr double kUnboundedOverhead = std::numeric_limits<double>::max();

inline CodelengthReport codelength_report(const ContainerHeader& h,
                                          const std::vector<IndexTuple>& blocks,
                                          std::span<const double> block_kl_nats) {
  if (block_kl_nats.size() != blocks.size()) {
    throw UsageError("codelength_report: one KL value per block required");
  }
  const std::uint64_t m = h.samples_per_step();
  CodelengthReport r;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::uint64_t steps = blocks[i].indices.size();
    r.payload_bits += payload_bits(steps, m);
    r.length_bits += 8 * varint_length(steps);
    r.ideal_bits += block_kl_nats[i] / std::numbers::ln2;
  }
  r.overhead_ratio = r.ideal_bits > 0.0 ? static_cast<double>(r.payload_bits) / r.ideal_bits
                     : r.payload_bits == 0 ? 1.0
                                           : kUnboundedOverhead;
  return r;
}

}  // namespace irec
