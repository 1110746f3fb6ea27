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

// Linear-Gaussian latent model (probabilistic PCA) over square image patches,
// plus the grayscale image plumbing around it.
//
//   p(z)     = N(0, I_L)
//   p(x | z) = N(W z + mu, noise_var I_D)
//
// W has orthogonal columns, so the posterior over z is diagonal.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irec/detmath.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"
#include "irec/sample_stream.hpp"

namespace irec {

inline constexpr double kNoiseVarFloor = 1e-6;
inline constexpr std::uint32_t kDefaultPatch = 8;
inline constexpr double kPsnrCap = 99.0;

struct LinearGaussianModel {
  Eigen::MatrixXd W;   // D x L
  Eigen::VectorXd mu;  // D
  double noise_var = 1.0;

  std::uint32_t dims() const { return static_cast<std::uint32_t>(W.rows()); }
  std::uint32_t latent_dims() const { return static_cast<std::uint32_t>(W.cols()); }

  // Side of the square patch, or 0 when D is not a perfect square.
  std::uint32_t patch_side() const {
    const auto d = dims();
    auto s = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(d))));
    return s * s == d ? s : 0u;
  }

  void validate() const {
    if (W.rows() == 0 || W.cols() == 0) throw UsageError("model has an empty weight matrix");
    if (mu.size() != W.rows()) throw UsageError("model mean does not match W rows");
    if (!(noise_var >= kNoiseVarFloor) || !std::isfinite(noise_var)) {
      throw NumericError("model noise variance must be finite and >= 1e-6");
    }
    if (!W.allFinite() || !mu.allFinite()) throw NumericError("model has non-finite parameters");
  }
};

// Maximum-likelihood PPCA with the rotation fixed to identity: columns follow
// descending eigenvalues and each eigenvector's largest-magnitude entry is
// made positive.
inline LinearGaussianModel fit_ppca(const std::vector<Vector>& patches, std::uint32_t latent) {
  if (patches.empty()) throw UsageError("fit_ppca: no data");
  const std::size_t d = patches.front().size();
  if (d < 2) throw UsageError("fit_ppca: data dimension must be >= 2");
  if (patches.size() < d + 1) {
    throw UsageError("fit_ppca: need at least D+1 = " + std::to_string(d + 1) + " patches");
  }
  if (latent < 1 || latent >= d) throw UsageError("fit_ppca: need 1 <= L < D");

  const auto n = static_cast<Eigen::Index>(patches.size());
  const auto D = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd X(n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector& p = patches[static_cast<std::size_t>(i)];
    if (p.size() != d) throw UsageError("fit_ppca: patches have different dimensions");
    for (Eigen::Index j = 0; j < D; ++j) {
      if (!std::isfinite(p[static_cast<std::size_t>(j)])) {
        throw NumericError("fit_ppca: non-finite input");
      }
      X(i, j) = p[static_cast<std::size_t>(j)];
    }
  }
  LinearGaussianModel m;
  m.mu = X.colwise().mean().transpose();
  X.rowwise() -= m.mu.transpose();
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("fit_ppca: eigendecomposition failed");
  // Eigen returns ascending order.
  const Eigen::VectorXd& values = eig.eigenvalues();
  const Eigen::MatrixXd& vectors = eig.eigenvectors();

  double discarded = 0.0;
  for (Eigen::Index j = 0; j < D - latent; ++j) discarded += values(j);
  m.noise_var = std::max(discarded / static_cast<double>(D - latent), kNoiseVarFloor);

  m.W = Eigen::MatrixXd::Zero(D, latent);
  for (Eigen::Index c = 0; c < latent; ++c) {
    const Eigen::Index src = D - 1 - c;
    Eigen::VectorXd u = vectors.col(src);
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0.0) u = -u;
    const double scale = std::sqrt(std::max(values(src) - m.noise_var, 0.0));
    m.W.col(c) = u * scale;
  }
  return m;
}

// Exact posterior q(z | x) = N(W^T (x - mu) / m, noise_var / m) per latent
// dimension, with m_j = |W_j|^2 + noise_var.
inline DiagGaussian posterior(const LinearGaussianModel& model, std::span<const double> x) {
  const std::uint32_t D = model.dims(), L = model.latent_dims();
  detail::require_same_dims(D, x.size(), "posterior");
  Vector mean(L), stddev(L);
  for (std::uint32_t j = 0; j < L; ++j) {
    double norm = 0.0, proj = 0.0;
    for (std::uint32_t i = 0; i < D; ++i) {
      const double w = model.W(i, j);
      norm += w * w;
      proj += w * (x[i] - model.mu(i));
    }
    const double m = norm + model.noise_var;
    mean[j] = proj / m;
    stddev[j] = std::sqrt(model.noise_var / m);
  }
  return DiagGaussian(std::move(mean), std::move(stddev));
}

// x_hat = W z + mu. Summation order is fixed so encoder and decoder agree.
inline Vector reconstruct(const LinearGaussianModel& model, std::span<const double> z) {
  const std::uint32_t D = model.dims(), L = model.latent_dims();
  detail::require_same_dims(L, z.size(), "reconstruct");
  Vector out(D);
  for (std::uint32_t i = 0; i < D; ++i) {
    double acc = 0.0;
    for (std::uint32_t j = 0; j < L; ++j) acc += model.W(i, j) * z[j];
    out[i] = acc + model.mu(i);
  }
  return out;
}

// Round half away from zero, then clamp to [0, 255]. NaN maps to 0.
inline std::uint8_t quantize_clamp(double v) {
  if (!(v > 0.0)) return 0;
  const double r = std::round(v);
  return r >= 255.0 ? std::uint8_t{255} : static_cast<std::uint8_t>(r);
}

struct ImageGray8 {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  ImageGray8() = default;
  ImageGray8(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t{w} * h, fill) {}

  std::size_t size() const { return pixels.size(); }
  std::uint8_t& at(std::uint32_t x, std::uint32_t y) { return pixels[std::size_t{y} * width + x]; }
  std::uint8_t at(std::uint32_t x, std::uint32_t y) const {
    return pixels[std::size_t{y} * width + x];
  }
  void validate() const {
    if (std::size_t{width} * height != pixels.size()) {
      throw UsageError("image: width * height does not match pixel count");
    }
  }
  friend bool operator==(const ImageGray8&, const ImageGray8&) = default;
};

inline double mse(const ImageGray8& a, const ImageGray8& b) {
  if (a.width != b.width || a.height != b.height) throw UsageError("image dimensions differ");
  a.validate();
  b.validate();
  if (a.pixels.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(a.pixels.size());
}

// PSNR in dB; identical images report the 99 dB cap.
inline double psnr(const ImageGray8& a, const ImageGray8& b) {
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrCap;
  return std::min(10.0 * std::log10(255.0 * 255.0 / e), kPsnrCap);
}

// Number of tiles along each axis.
inline std::uint32_t tiles_along(std::uint32_t extent, std::uint32_t side) {
  return (extent + side - 1) / side;
}

// Non-overlapping side x side tiles in row-major tile order, each tile
// flattened row-major. Pixels beyond the plane are zero.
inline std::vector<Vector> patchify(std::span<const double> plane, std::uint32_t width,
                                    std::uint32_t height, std::uint32_t side = kDefaultPatch) {
  if (side == 0) throw UsageError("patchify: patch side must be >= 1");
  if (plane.size() != std::size_t{width} * height) {
    throw UsageError("patchify: plane size does not match dimensions");
  }
  const std::uint32_t tx = tiles_along(width, side), ty = tiles_along(height, side);
  std::vector<Vector> out;
  out.reserve(std::size_t{tx} * ty);
  for (std::uint32_t by = 0; by < ty; ++by) {
    for (std::uint32_t bx = 0; bx < tx; ++bx) {
      Vector p(std::size_t{side} * side, 0.0);
      for (std::uint32_t y = 0; y < side; ++y) {
        const std::uint32_t iy = by * side + y;
        if (iy >= height) break;
        for (std::uint32_t x = 0; x < side; ++x) {
          const std::uint32_t ix = bx * side + x;
          if (ix >= width) break;
          p[std::size_t{y} * side + x] = plane[std::size_t{iy} * width + ix];
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline std::vector<Vector> patchify(const ImageGray8& img, std::uint32_t side = kDefaultPatch) {
  img.validate();
  std::vector<double> plane(img.pixels.begin(), img.pixels.end());
  return patchify(plane, img.width, img.height, side);
}

// Inverse of patchify; padding is cropped.
inline std::vector<double> unpatchify(const std::vector<Vector>& patches, std::uint32_t width,
                                      std::uint32_t height, std::uint32_t side = kDefaultPatch) {
  if (side == 0) throw UsageError("unpatchify: patch side must be >= 1");
  const std::uint32_t tx = tiles_along(width, side), ty = tiles_along(height, side);
  if (patches.size() != std::size_t{tx} * ty) {
    throw UsageError("unpatchify: expected " + std::to_string(std::size_t{tx} * ty) +
                     " patches, got " + std::to_string(patches.size()));
  }
  std::vector<double> plane(std::size_t{width} * height);
  for (std::uint32_t by = 0; by < ty; ++by) {
    for (std::uint32_t bx = 0; bx < tx; ++bx) {
      const Vector& p = patches[std::size_t{by} * tx + bx];
      if (p.size() != std::size_t{side} * side) throw UsageError("unpatchify: wrong patch size");
      for (std::uint32_t y = 0; y < side && by * side + y < height; ++y) {
        for (std::uint32_t x = 0; x < side && bx * side + x < width; ++x) {
          plane[std::size_t{by * side + y} * width + bx * side + x] = p[std::size_t{y} * side + x];
        }
      }
    }
  }
  return plane;
}

inline ImageGray8 plane_to_image(std::span<const double> plane, std::uint32_t width,
                                 std::uint32_t height) {
  if (plane.size() != std::size_t{width} * height) {
    throw UsageError("plane_to_image: size does not match dimensions");
  }
  ImageGray8 img(width, height);
  for (std::size_t i = 0; i < plane.size(); ++i) img.pixels[i] = quantize_clamp(plane[i]);
  return img;
}

// ---- PGM (binary P5, 8-bit) ----

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return data;
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("error while writing '" + path + "'");
}

class PgmTokenizer {
 public:
  explicit PgmTokenizer(std::span<const std::uint8_t> d) : d_(d) {}

  std::uint64_t number() {
    skip_space_and_comments();
    std::uint64_t v = 0;
    std::size_t digits = 0;
    while (pos_ < d_.size() && d_[pos_] >= '0' && d_[pos_] <= '9') {
      v = v * 10 + (d_[pos_++] - '0');
      if (++digits > 9) throw FormatError("PGM: header number too large");
    }
    if (digits == 0) throw FormatError("PGM: expected a number in the header");
    return v;
  }

  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= d_.size() || !is_space(d_[pos_])) throw FormatError("PGM: malformed header end");
    return pos_ + 1;
  }

  std::size_t pos_ = 0;

 private:
  static bool is_space(std::uint8_t c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  }
  void skip_space_and_comments() {
    while (pos_ < d_.size()) {
      if (is_space(d_[pos_])) {
        ++pos_;
      } else if (d_[pos_] == '#') {
        while (pos_ < d_.size() && d_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> d_;
};

}  // namespace detail

inline ImageGray8 parse_pgm(std::span<const std::uint8_t> data) {
  if (data.size() < 2 || data[0] != 'P' || data[1] != '5') {
    throw FormatError("not a binary PGM (missing P5 magic)");
  }
  detail::PgmTokenizer tok(data);
  tok.pos_ = 2;
  const auto w = tok.number();
  const auto h = tok.number();
  const auto maxval = tok.number();
  if (w == 0 || h == 0) throw FormatError("PGM: zero width or height");
  if (maxval == 0 || maxval > 255) throw FormatError("PGM: only 8-bit images are supported");
  const std::size_t start = tok.raster_start();
  const std::uint64_t count = w * h;
  if (data.size() - start < count) throw FormatError("PGM: truncated raster");
  ImageGray8 img(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h));
  std::memcpy(img.pixels.data(), data.data() + start, count);
  return img;
}

inline std::vector<std::uint8_t> serialize_pgm(const ImageGray8& img) {
  img.validate();
  const std::string head =
      "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline ImageGray8 read_pgm(const std::string& path) { return parse_pgm(detail::read_file(path)); }

inline void write_pgm(const std::string& path, const ImageGray8& img) {
  detail::write_file(path, serialize_pgm(img));
}

// ---- LGM1 model files ----

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

// "LGM1", D u32, L u32, mu (D f64), W (D*L f64, row-major), noise_var f64.
// All little-endian.
inline std::vector<std::uint8_t> serialize_model(const LinearGaussianModel& m) {
  m.validate();
  std::vector<std::uint8_t> out{'L', 'G', 'M', '1'};
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto put_f64 = [&](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  };
  put_u32(m.dims());
  put_u32(m.latent_dims());
  for (std::uint32_t i = 0; i < m.dims(); ++i) put_f64(m.mu(i));
  for (std::uint32_t i = 0; i < m.dims(); ++i) {
    for (std::uint32_t j = 0; j < m.latent_dims(); ++j) put_f64(m.W(i, j));
  }
  put_f64(m.noise_var);
  return out;
}

inline LinearGaussianModel parse_model(std::span<const std::uint8_t> data) {
  if (data.size() < 12 || std::memcmp(data.data(), "LGM1", 4) != 0) {
    throw FormatError("not an LGM1 model file");
  }
  std::size_t pos = 4;
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data[pos++]} << (8 * i);
    return v;
  };
  auto get_f64 = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data[pos++]} << (8 * i);
    return std::bit_cast<double>(v);
  };
  const std::uint32_t D = get_u32(), L = get_u32();
  if (D == 0 || L == 0 || L >= D || D > 65536) throw FormatError("LGM1: invalid dimensions");
  const std::uint64_t expected = 12 + 8ull * D + 8ull * D * L + 8;
  if (data.size() != expected) {
    throw FormatError("LGM1: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(data.size()));
  }
  LinearGaussianModel m;
  m.mu.resize(D);
  m.W.resize(D, L);
  for (std::uint32_t i = 0; i < D; ++i) m.mu(i) = get_f64();
  for (std::uint32_t i = 0; i < D; ++i) {
    for (std::uint32_t j = 0; j < L; ++j) m.W(i, j) = get_f64();
  }
  m.noise_var = get_f64();
  try {
    m.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("LGM1: ") + e.what());
  }
  return m;
}

inline std::uint64_t model_id(const LinearGaussianModel& m) { return fnv1a64(serialize_model(m)); }

inline void save_model(const std::string& path, const LinearGaussianModel& m) {
  detail::write_file(path, serialize_model(m));
}

inline LinearGaussianModel load_model(const std::string& path) {
  return parse_model(detail::read_file(path));
}

// ---- Synthetic data ----

// Reserved stream steps so that image synthesis never shares draws with the
// codec (which uses steps below K).
inline constexpr std::uint32_t kSynthImageStep = 0xFFFF0100u;
inline constexpr std::uint32_t kModelSampleStep = 0xFFFF0200u;

// A smooth test image: gradient plus a few random low-frequency waves plus
// Gaussian pixel noise. Deterministic in (seed, index).
inline ImageGray8 synthetic_image(std::uint32_t width, std::uint32_t height, Seed64 seed,
                                  std::uint32_t index = 0, double noise_sd = 3.0) {
  if (width == 0 || height == 0) throw UsageError("synthetic_image: empty dimensions");
  constexpr std::uint32_t kWaves = 6;
  double params[kWaves][4];
  for (std::uint32_t w = 0; w < kWaves; ++w) {
    for (std::uint32_t c = 0; c < 4; ++c) {
      params[w][c] = draw_uniform(seed, index, kSynthImageStep, w * 4 + c);
    }
  }
  const double gx = draw_uniform(seed, index, kSynthImageStep, 100) - 0.5;
  const double gy = draw_uniform(seed, index, kSynthImageStep, 101) - 0.5;
  ImageGray8 img(width, height);
  std::vector<double> noise(width);
  for (std::uint32_t y = 0; y < height; ++y) {
    draw_vector_into(seed, index, kSynthImageStep + 1, y, noise);
    for (std::uint32_t x = 0; x < width; ++x) {
      double v = 128.0 + 80.0 * (gx * x / width + gy * y / height);
      for (const auto& p : params) {
        // Spatial frequencies in cycles per pixel, at most 1/25.
        const double fx = (p[0] - 0.5) * 0.08, fy = (p[1] - 0.5) * 0.08;
        const double amp = 10.0 + 25.0 * p[3];
        v += amp * detmath::cos_sin_turn(fx * x + fy * y + p[2]).second;
      }
      img.at(x, y) = quantize_clamp(v + noise_sd * noise[x]);
    }
  }
  return img;
}

// Draws an image from the model: per tile z ~ N(0, I), x = W z + mu + noise.
inline ImageGray8 sample_image(const LinearGaussianModel& model, std::uint32_t width,
                               std::uint32_t height, Seed64 seed) {
  model.validate();
  const std::uint32_t side = model.patch_side();
  if (side == 0) throw UsageError("sample_image: model dimension is not a square patch");
  const std::uint32_t tiles = tiles_along(width, side) * tiles_along(height, side);
  const double noise_sd = std::sqrt(model.noise_var);
  std::vector<Vector> patches;
  patches.reserve(tiles);
  for (std::uint32_t t = 0; t < tiles; ++t) {
    const Vector z = draw_vector(seed, t, kModelSampleStep, 0, model.latent_dims());
    const Vector e = draw_vector(seed, t, kModelSampleStep, 1, model.dims());
    Vector x = reconstruct(model, z);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += noise_sd * e[i];
    patches.push_back(std::move(x));
  }
  return plane_to_image(unpatchify(patches, width, height, side), width, height);
}

// Fits a model to the tiles of several synthetic images.
inline LinearGaussianModel fit_on_synthetic(std::uint32_t latent, std::uint32_t images,
                                            std::uint32_t size, Seed64 seed,
                                            double noise_sd = 3.0,
                                            std::uint32_t side = kDefaultPatch) {
  std::vector<Vector> data;
  for (std::uint32_t i = 0; i < images; ++i) {
    const auto tiles = patchify(synthetic_image(size, size, seed, i, noise_sd), side);
    data.insert(data.end(), tiles.begin(), tiles.end());
  }
  return fit_ppca(data, latent);
}

}  // namespace irec
