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

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "irec/bitstream.hpp"
#include "irec/errors.hpp"

namespace {

using irec::Container;
using irec::ContainerHeader;
using irec::IndexTuple;

ContainerHeader header(double omega, double epsilon, std::uint32_t blocks) {
  ContainerHeader h;
  h.seed = 0x0123456789abcdefull;
  h.omega = omega;
  h.epsilon = epsilon;
  h.model_id = 42;
  h.block_count = blocks;
  h.latent_dim = 16;
  h.image_width = 64;
  h.image_height = 32;
  return h;
}

TEST(PayloadBits, Examples) {
  EXPECT_EQ(irec::payload_bits(1, 21), 5u);
  EXPECT_EQ(irec::payload_bits(4, 37), 21u);
  EXPECT_EQ(irec::payload_bits(10, 37), 53u);
  EXPECT_EQ(irec::payload_bits(34, 37), 178u);
  EXPECT_EQ(irec::payload_bits(1, 2), 1u);
  EXPECT_EQ(irec::payload_bits(3, 2), 3u);
  EXPECT_EQ(irec::payload_bits(1, 256), 8u);
  EXPECT_EQ(irec::payload_bits(1, 257), 9u);
  EXPECT_THROW(irec::payload_bits(0, 21), irec::UsageError);
}

TEST(PayloadBits, AgreesWithFloatingPointCeilingAwayFromIntegers) {
  for (std::uint64_t m : {3u, 21u, 37u, 149u, 1000u}) {
    for (std::uint64_t k = 1; k < 300; ++k) {
      const double x = static_cast<double>(k) * std::log2(static_cast<double>(m));
      if (std::abs(x - std::round(x)) < 1e-9) continue;
      EXPECT_EQ(irec::payload_bits(k, m), static_cast<std::uint64_t>(std::ceil(x)));
    }
  }
}

TEST(Pack, SingleZeroIndexIsOneZeroByte) {
  Container c{header(3.0, 0.0, 1), {IndexTuple{{0}}}, std::nullopt};
  const auto bytes = irec::pack(c);
  ASSERT_EQ(bytes.size(), irec::kHeaderBytes + 2);
  EXPECT_EQ(bytes[irec::kHeaderBytes], 0x01);      // K
  EXPECT_EQ(bytes[irec::kHeaderBytes + 1], 0x00);  // 5 bits of zero, padded
}

TEST(Pack, HeaderLayout) {
  Container c{header(3.0, 0.2, 0), {}, std::nullopt};
  const auto b = irec::pack(c);
  ASSERT_EQ(b.size(), irec::kHeaderBytes);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "IREC");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 0xef);  // seed, little-endian
  EXPECT_EQ(b[13], 0x01);
  EXPECT_EQ(b[14 + 7], 0x40);  // 3.0 = 0x4008000000000000
  EXPECT_EQ(b[14 + 6], 0x08);
  EXPECT_EQ(b[30], 42);
  EXPECT_EQ(b[42], 16);
  EXPECT_EQ(b[46], 64);
  EXPECT_EQ(b[50], 32);
  EXPECT_EQ(irec::unpack(b), c);
}

TEST(Pack, FourStepPayloadIsThreeBytes) {
  // Tuple (1, 2, 3, 4) as 1 + 2*37 + 3*37^2 + 4*37^3 = 206794, shifted left
  // by the 3 padding bits.
  Container c{header(3.0, 0.2, 1), {IndexTuple{{1, 2, 3, 4}}}, std::nullopt};
  const auto b = irec::pack(c);
  ASSERT_EQ(b.size(), irec::kHeaderBytes + 1 + 3);
  const std::uint32_t v = 206794u << 3;
  EXPECT_EQ(b[irec::kHeaderBytes], 4);
  EXPECT_EQ(b[irec::kHeaderBytes + 1], (v >> 16) & 0xff);
  EXPECT_EQ(b[irec::kHeaderBytes + 2], (v >> 8) & 0xff);
  EXPECT_EQ(b[irec::kHeaderBytes + 3], v & 0xff);
}

TEST(Pack, Errors) {
  EXPECT_THROW(irec::pack(Container{header(3.0, 0.2, 1), {IndexTuple{{37}}}, std::nullopt}),
               irec::UsageError);
  EXPECT_THROW(irec::pack(Container{header(3.0, 0.2, 2), {IndexTuple{{1}}}, std::nullopt}),
               irec::Error);
  EXPECT_THROW(irec::pack(Container{header(3.0, 0.2, 1), {IndexTuple{}}, std::nullopt}),
               irec::UsageError);
}

TEST(PackUnpack, RandomRoundTrips) {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const double omega = 0.5 + (trial % 10) * 0.7;
    const double eps = (trial % 3) * 0.1;
    const std::uint32_t nblocks = static_cast<std::uint32_t>(rng() % 6);
    Container c{header(omega, eps, nblocks), {}, std::nullopt};
    c.header.seed = rng();
    const std::uint64_t m = c.header.samples_per_step();
    for (std::uint32_t b = 0; b < nblocks; ++b) {
      IndexTuple t;
      t.indices.resize(1 + rng() % (trial % 50 == 0 ? 300 : 20));
      for (auto& i : t.indices) i = static_cast<std::uint32_t>(rng() % m);
      if (coin(rng)) std::fill(t.indices.begin(), t.indices.end(), static_cast<std::uint32_t>(m - 1));
      c.blocks.push_back(std::move(t));
    }
    if (coin(rng)) {
      irec::ResidualSection r;
      r.symbol_count = static_cast<std::uint32_t>(rng());
      r.coded.resize(rng() % 40);
      for (auto& x : r.coded) x = static_cast<std::uint8_t>(rng());
      c.residual = r;
      c.header.flags = irec::kFlagResidual;
    }
    const auto bytes = irec::pack(c);
    ASSERT_EQ(irec::unpack(bytes), c) << trial;
  }
}

TEST(Unpack, BadMagicAndVersion) {
  auto b = irec::pack(Container{header(3.0, 0.2, 0), {}, std::nullopt});
  auto x = b;
  x[0] = 'X';
  EXPECT_THROW(irec::unpack(x), irec::FormatError);
  x = b;
  x[4] = 2;
  EXPECT_THROW(irec::unpack(x), irec::FormatError);
  x = b;
  x[5] = 0x80;
  EXPECT_THROW(irec::unpack(x), irec::FormatError);
  EXPECT_THROW(irec::unpack(std::vector<std::uint8_t>{'I', 'R'}), irec::FormatError);
}

TEST(Unpack, BadHyperparametersAreFormatErrors) {
  auto b = irec::pack(Container{header(3.0, 0.2, 0), {}, std::nullopt});
  const double big = 40.0;  // exp(40) > 2^32
  std::memcpy(&b[14], &big, 8);
  EXPECT_THROW(irec::unpack(b), irec::FormatError);
}

TEST(Unpack, TruncationIsCorruptStream) {
  Container c{header(3.0, 0.2, 2), {IndexTuple{{1, 2, 3}}, IndexTuple{{4, 5}}}, std::nullopt};
  const auto b = irec::pack(c);
  for (std::size_t n = 4; n < b.size(); ++n) {
    EXPECT_THROW(irec::unpack(std::span(b).first(n)), irec::CorruptStreamError) << n;
  }
  auto extra = b;
  extra.push_back(0);
  EXPECT_THROW(irec::unpack(extra), irec::CorruptStreamError);
}

TEST(Unpack, NonzeroPaddingIsCorruptStream) {
  auto b = irec::pack(Container{header(3.0, 0.0, 1), {IndexTuple{{0}}}, std::nullopt});
  b.back() = 0x01;  // one of the three padding bits
  EXPECT_THROW(irec::unpack(b), irec::CorruptStreamError);
}

TEST(Unpack, ValueBeyondMToTheKIsCorruptStream) {
  // M = 21, K = 1: 5 bits can hold up to 31.
  auto b = irec::pack(Container{header(3.0, 0.0, 1), {IndexTuple{{0}}}, std::nullopt});
  b.back() = static_cast<std::uint8_t>(25u << 3);
  EXPECT_THROW(irec::unpack(b), irec::CorruptStreamError);
}

TEST(Unpack, EmptyBlockListRoundTrips) {
  Container c{header(3.0, 0.2, 0), {}, std::nullopt};
  const auto b = irec::pack(c);
  EXPECT_EQ(b.size(), irec::kHeaderBytes);
  EXPECT_EQ(irec::unpack(b), c);
}

// Single-bit flips anywhere in a container never crash; a flip in the block
// section either fails to parse or changes the decoded latent.
TEST(Unpack, BitFlipFuzz) {
  std::mt19937_64 rng(77);
  Container c{header(3.0, 0.2, 4), {}, std::nullopt};
  for (int b = 0; b < 4; ++b) {
    IndexTuple t;
    t.indices.resize(3 + b * 4);
    for (auto& i : t.indices) i = static_cast<std::uint32_t>(rng() % 37);
    c.blocks.push_back(t);
  }
  const auto clean = irec::pack(c);
  auto decode_all = [](const Container& x) {
    std::vector<irec::Vector> zs;
    const std::uint64_t m = x.header.samples_per_step();
    for (std::uint32_t b = 0; b < x.blocks.size(); ++b) {
      const auto s = irec::build_schedule_for_steps(
          static_cast<std::uint32_t>(x.blocks[b].indices.size()), x.header.omega, x.header.epsilon);
      EXPECT_EQ(s.M, m);
      zs.push_back(irec::decode(x.blocks[b], s, irec::Seed64{x.header.seed}, b, 4));
    }
    return zs;
  };
  const auto clean_z = decode_all(c);
  int errors = 0, changed = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    auto b = clean;
    const std::size_t bit = rng() % (b.size() * 8);
    b[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    try {
      const Container d = irec::unpack(b);
      ASSERT_NE(d, c) << bit;
      if (bit / 8 >= irec::kHeaderBytes) {
        EXPECT_NE(decode_all(d), clean_z) << bit;
      }
      ++changed;
    } catch (const irec::Error&) {
      ++errors;
    }
  }
  EXPECT_EQ(errors + changed, 10000);
  EXPECT_GT(errors, 0);
  EXPECT_GT(changed, 0);
}

TEST(CodelengthReport, ThirtyNatExample) {
  const ContainerHeader h = header(3.0, 0.2, 1);
  const std::vector<IndexTuple> blocks{IndexTuple{std::vector<std::uint32_t>(10, 0)}};
  const std::vector<double> kl{30.0};
  const auto r = irec::codelength_report(h, blocks, kl);
  EXPECT_EQ(r.payload_bits, 53u);
  EXPECT_EQ(r.length_bits, 8u);
  EXPECT_NEAR(r.ideal_bits, 43.2809, 1e-4);
  EXPECT_NEAR(r.overhead_ratio, 1.2246, 1e-4);
}

TEST(CodelengthReport, ZeroKlUsesSentinel) {
  const ContainerHeader h = header(3.0, 0.2, 1);
  const auto r = irec::codelength_report(h, {IndexTuple{{0}}}, std::vector<double>{0.0});
  EXPECT_EQ(r.payload_bits, 6u);
  EXPECT_EQ(r.ideal_bits, 0.0);
  EXPECT_EQ(r.overhead_ratio, irec::kUnboundedOverhead);
  EXPECT_EQ(irec::codelength_report(h, {}, std::vector<double>{}).overhead_ratio, 1.0);
  EXPECT_THROW(irec::codelength_report(h, {IndexTuple{{0}}}, std::vector<double>{}),
               irec::UsageError);
}

// Indices plus the K varint stay within (1+eps) KL/ln2 + ceil(log2 M) + 16.
// Rounding M up costs a fixed fraction of a bit per step, so the margin
// shrinks linearly and the bound only holds over a finite KL range.
TEST(CodelengthReport, FormatLevelBound) {
  for (double eps : {0.2, 0.5}) {
    for (double kl = 0.01; kl < 500.0; kl *= 1.07) {
      const auto s = irec::build_schedule(kl, 3.0, eps);
      const double bound = (1.0 + eps) * kl / std::numbers::ln2 +
                           std::ceil(std::log2(double(s.M))) + 16.0;
      const auto bits = irec::payload_bits(s.K, s.M) + 8 * irec::varint_length(s.K);
      EXPECT_LE(double(bits), bound) << kl << " " << eps;
    }
  }
}

// At eps = 0 the payload-only ratio stays under 1.10 from 100 nats upwards.
// Counting the K varint as well, the ratio first settles under 1.10 at
// about 105.23 nats, so the varint cannot be part of that claim.
TEST(CodelengthReport, EpsilonZeroRatioAboveHundredNats) {
  const ContainerHeader h = header(3.0, 0.0, 1);
  double worst_payload = 0.0, last_failing_kl = 0.0;
  for (std::uint32_t K = 34; K < 3000; ++K) {
    // Worst case for each K is the smallest KL that still needs K steps.
    const double kl = std::max(100.0, std::nextafter(3.0 * (K - 1), 1e9));
    ASSERT_EQ(irec::steps_for_kl(kl, 3.0), K);
    const std::vector<IndexTuple> blocks{IndexTuple{std::vector<std::uint32_t>(K, 0)}};
    const auto r = irec::codelength_report(h, blocks, std::vector<double>{kl});
    worst_payload = std::max(worst_payload, r.overhead_ratio);
    if (double(r.payload_bits + r.length_bits) / r.ideal_bits > 1.10) last_failing_kl = kl;
  }
  EXPECT_LE(worst_payload, 1.10);
  EXPECT_NEAR(worst_payload, 1.0496, 1e-4);
  EXPECT_NEAR(last_failing_kl, 105.0, 1e-9);
  // 162 bits (K = 36) needs at least 162 ln2 / 1.1 nats.
  EXPECT_NEAR((irec::payload_bits(36, 21) + 8) * std::numbers::ln2 / 1.10, 105.2323, 1e-4);
}

}  // namespace
