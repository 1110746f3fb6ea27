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

// Image compression on top of the index codec. Every patch is one block:
// its posterior is encoded with its own schedule, the block index selects
// the slice of the shared stream. Lossless mode appends the range-coded
// residual between the image and the decoder's reconstruction.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "irec/aux_chain.hpp"
#include "irec/bitstream.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"
#include "irec/rec_codec.hpp"
#include "irec/residual_coder.hpp"
#include "irec/toy_model.hpp"

namespace irec {

enum class Mode { kLossy, kLossless };

struct CompressionResult {
  std::vector<std::uint8_t> container;
  std::vector<double> block_kl;         // nats, per block
  std::vector<double> block_log_ratio;  // log q(z)/p(z) of the transmitted z, per block
  std::uint64_t payload_bits = 0;       // index tuples incl. K varints and padding
  std::uint64_t residual_bits = 0;      // residual section incl. its count field
  double bpp = 0.0;                     // container bits / pixel
  double psnr = kPsnrCap;               // of the decoder's output
  double seconds = 0.0;

  double total_kl() const {
    double s = 0.0;
    for (double v : block_kl) s += v;
    return s;
  }
  std::uint64_t total_bits() const { return 8ull * container.size(); }
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
// exception thrown by any task is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline std::uint32_t require_patch_side(const LinearGaussianModel& model) {
  model.validate();
  const std::uint32_t side = model.patch_side();
  if (side == 0) throw UsageError("model dimension is not a square patch");
  return side;
}

inline DiscretizedGaussian residual_model(const LinearGaussianModel& model) {
  return DiscretizedGaussian{0.0, std::sqrt(model.noise_var), kResidualMin, kResidualMax};
}

// Reconstruction from decoded latents, one z per block.
inline ImageGray8 render(const LinearGaussianModel& model, const std::vector<Vector>& z,
                         std::uint32_t width, std::uint32_t height, std::uint32_t side) {
  std::vector<Vector> patches;
  patches.reserve(z.size());
  for (const Vector& zi : z) patches.push_back(reconstruct(model, zi));
  return plane_to_image(unpatchify(patches, width, height, side), width, height);
}

struct DecodedLatents {
  Container container;
  std::vector<Vector> z;
  std::uint32_t side = 0;
};

inline DecodedLatents decode_latents(std::span<const std::uint8_t> bytes,
                                     const LinearGaussianModel& model, unsigned threads) {
  const std::uint32_t side = require_patch_side(model);
  DecodedLatents out{unpack(bytes), {}, side};
  const ContainerHeader& h = out.container.header;
  if (h.model_id != model_id(model)) {
    throw ModelMismatchError("container was produced with a different model");
  }
  if (h.latent_dim != model.latent_dims()) {
    throw ModelMismatchError("container latent dimension does not match the model");
  }
  if (h.image_width == 0 || h.image_height == 0) throw CorruptStreamError("empty image dimensions");
  const std::uint64_t tiles =
      std::uint64_t{tiles_along(h.image_width, side)} * tiles_along(h.image_height, side);
  if (tiles != h.block_count) {
    throw CorruptStreamError("block count does not match the image dimensions");
  }
  const std::uint64_t m = h.samples_per_step();
  const RecConfig dec_cfg{h.omega, h.epsilon, 1, false};
  out.z.resize(out.container.blocks.size());
  parallel_for(out.z.size(), threads, [&](std::size_t b) {
    const IndexTuple& t = out.container.blocks[b];
    const AuxSchedule s = build_schedule_for_steps(static_cast<std::uint32_t>(t.indices.size()),
                                                   h.omega, h.epsilon);
    if (s.M != m) throw CorruptStreamError("inconsistent samples per step");
    const Vector zw = decode(t, s, dec_cfg, Seed64{h.seed}, static_cast<std::uint32_t>(b),
                             h.latent_dim);
    // The coding distribution is already N(0, I); the whitening map is the identity.
    out.z[b] = zw;
  });
  return out;
}

}  // namespace detail

struct PipelineOptions {
  unsigned threads = 0;  // 0: hardware concurrency
};

inline CompressionResult compress(const ImageGray8& img, const LinearGaussianModel& model,
                                  const RecConfig& cfg, Seed64 seed, Mode mode,
                                  const PipelineOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  img.validate();
  if (img.width == 0 || img.height == 0) throw UsageError("compress: empty image");
  const std::uint32_t side = detail::require_patch_side(model);
  const std::uint32_t L = model.latent_dims();
  cfg.validate(L);

  const std::vector<Vector> patches = patchify(img, side);
  const DiagGaussian prior = DiagGaussian::standard(L);
  std::vector<IndexTuple> blocks(patches.size());
  std::vector<Vector> z(patches.size());
  CompressionResult res;
  res.block_kl.resize(patches.size());
  res.block_log_ratio.resize(patches.size());

  detail::parallel_for(patches.size(), opt.threads, [&](std::size_t b) {
    const Whitened w = whiten(posterior(model, patches[b]), prior);
    const double kl = kl_divergence(w.target, DiagGaussian::standard(L));
    const AuxSchedule s = build_schedule(kl, cfg.omega, cfg.epsilon);
    EncodeResult enc = encode(w.target, s, cfg, seed, static_cast<std::uint32_t>(b));
    blocks[b] = std::move(enc.indices);
    z[b] = w.transform.apply(enc.z);
    res.block_kl[b] = kl;
    res.block_log_ratio[b] = enc.log_ratio;
  });

  Container c;
  c.header.seed = seed.value;
  c.header.omega = cfg.omega;
  c.header.epsilon = cfg.epsilon;
  c.header.model_id = model_id(model);
  c.header.block_count = static_cast<std::uint32_t>(blocks.size());
  c.header.latent_dim = L;
  c.header.image_width = img.width;
  c.header.image_height = img.height;

  const ImageGray8 recon = detail::render(model, z, img.width, img.height, side);
  if (mode == Mode::kLossless) {
    std::vector<int> r(img.pixels.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = int{img.pixels[i]} - int{recon.pixels[i]};
    const std::vector<DiscretizedGaussian> models(r.size(), detail::residual_model(model));
    c.residual = ResidualSection{static_cast<std::uint32_t>(r.size()), encode_residuals(r, models)};
    res.residual_bits = 8ull * (4 + c.residual->coded.size());
    res.psnr = kPsnrCap;
  } else {
    res.psnr = psnr(img, recon);
  }

  c.blocks = std::move(blocks);
  res.container = pack(c);
  res.payload_bits = res.total_bits() - 8ull * kHeaderBytes - res.residual_bits;
  res.bpp = static_cast<double>(res.total_bits()) / static_cast<double>(img.pixels.size());
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline CompressionResult compress_lossy(const ImageGray8& img, const LinearGaussianModel& model,
                                        const RecConfig& cfg, Seed64 seed,
                                        const PipelineOptions& opt = {}) {
  return compress(img, model, cfg, seed, Mode::kLossy, opt);
}

inline CompressionResult compress_lossless(const ImageGray8& img, const LinearGaussianModel& model,
                                           const RecConfig& cfg, Seed64 seed,
                                           const PipelineOptions& opt = {}) {
  return compress(img, model, cfg, seed, Mode::kLossless, opt);
}

// Decodes either kind of container: the reconstruction, plus the residual
// when the container carries one.
inline ImageGray8 decompress(std::span<const std::uint8_t> bytes, const LinearGaussianModel& model,
                             const PipelineOptions& opt = {}) {
  detail::DecodedLatents d = detail::decode_latents(bytes, model, opt.threads);
  const ContainerHeader& h = d.container.header;
  ImageGray8 img = detail::render(model, d.z, h.image_width, h.image_height, d.side);
  if (!d.container.residual) return img;

  const ResidualSection& sec = *d.container.residual;
  if (sec.symbol_count != img.pixels.size()) {
    throw CorruptStreamError("residual symbol count does not match the image size");
  }
  const std::vector<DiscretizedGaussian> models(img.pixels.size(), detail::residual_model(model));
  const std::vector<int> r = decode_residuals(sec.coded, models, img.pixels.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const int v = int{img.pixels[i]} + r[i];
    if (v < 0 || v > 255) throw CorruptStreamError("residual leaves the pixel range");
    img.pixels[i] = static_cast<std::uint8_t>(v);
  }
  return img;
}

inline ImageGray8 decompress_lossy(std::span<const std::uint8_t> bytes,
                                   const LinearGaussianModel& model,
                                   const PipelineOptions& opt = {}) {
  detail::DecodedLatents d = detail::decode_latents(bytes, model, opt.threads);
  const ContainerHeader& h = d.container.header;
  return detail::render(model, d.z, h.image_width, h.image_height, d.side);
}

inline ImageGray8 decompress_lossless(std::span<const std::uint8_t> bytes,
                                      const LinearGaussianModel& model,
                                      const PipelineOptions& opt = {}) {
  const Container c = unpack(bytes);
  if (!c.header.has_residual()) throw FormatError("container has no residual section");
  return decompress(bytes, model, opt);
}

// ---- Negative ELBO ----

struct ElboBits {
  double kl_bits = 0.0;        // sum over patches of KL(q(z|x) || p(z)) / ln 2
  double residual_bits = 0.0;  // sum over pixels of E_q[-log2 P(x | z)]
  double total() const { return kl_bits + residual_bits; }
};

namespace detail {

// Gauss-Hermite rule for weight exp(-t^2) via the Golub-Welsch eigenproblem.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  std::vector<double> nodes(static_cast<std::size_t>(n)), weights(static_cast<std::size_t>(n));
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
    const double v = eig.eigenvectors()(0, i);
    weights[static_cast<std::size_t>(i)] = sqrt_pi * v * v;
  }
  return {nodes, weights};
}

inline double gaussian_bin_probability(double x, double mean, double sd) {
  const double a = (x - 0.5 - mean) / (sd * std::numbers::sqrt2);
  const double b = (x + 0.5 - mean) / (sd * std::numbers::sqrt2);
  // Difference of erfc on the side that avoids cancellation.
  const double p = a > 0.0 ? 0.5 * (std::erfc(a) - std::erfc(b))
                           : 0.5 * (std::erfc(-b) - std::erfc(-a));
  return std::max(p, 1e-300);
}

}  // namespace detail

// Negative ELBO of the image under the model with the unit-bin discretised
// Gaussian likelihood, in bits. KL is exact; the expected log-likelihood is
// a per-pixel one-dimensional integral (x_hat is Gaussian under q), done
// with 40-point Gauss-Hermite quadrature.
inline ElboBits negative_elbo_bits(const ImageGray8& img, const LinearGaussianModel& model) {
  img.validate();
  const std::uint32_t side = detail::require_patch_side(model);
  const std::uint32_t L = model.latent_dims(), D = model.dims();
  const std::vector<Vector> patches = patchify(img, side);
  const std::uint32_t tx = tiles_along(img.width, side);
  const auto [nodes, weights] = detail::gauss_hermite(40);
  const double sd = std::sqrt(model.noise_var);
  const DiagGaussian prior = DiagGaussian::standard(L);

  ElboBits out;
  for (std::size_t b = 0; b < patches.size(); ++b) {
    const DiagGaussian q = posterior(model, patches[b]);
    out.kl_bits += kl_divergence(q, prior) / std::numbers::ln2;
    const std::uint32_t bx = static_cast<std::uint32_t>(b % tx), by = static_cast<std::uint32_t>(b / tx);
    for (std::uint32_t i = 0; i < D; ++i) {
      const std::uint32_t px = bx * side + i % side, py = by * side + i / side;
      if (px >= img.width || py >= img.height) continue;
      double mean = model.mu(i), var = 0.0;
      for (std::uint32_t j = 0; j < L; ++j) {
        mean += model.W(i, j) * q.mean(j);
        var += model.W(i, j) * model.W(i, j) * q.variance(j);
      }
      const double x = patches[b][i];
      double expected = 0.0;
      for (std::size_t n = 0; n < nodes.size(); ++n) {
        const double xhat = mean + std::numbers::sqrt2 * std::sqrt(var) * nodes[n];
        expected += weights[n] * -std::log2(detail::gaussian_bin_probability(x, xhat, sd));
      }
      out.residual_bits += expected / std::sqrt(std::numbers::pi);
    }
  }
  return out;
}

}  // namespace irec
