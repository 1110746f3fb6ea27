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

// irec: command-line front end for the codec, the studies and the
// validation suite. See docs/irec.1.md for the full flag reference.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "irec/irec.hpp"

namespace {

using irec::Seed64;
using json = nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kFormat = 3,
  kModelMismatch = 4,
  kValidateFailed = 5,
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  irec::detail::write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void emit(const json& record) { std::cout << record.dump() << "\n"; }

// Defaults follow the published settings: omega 3, epsilon 0.2 and 20 beams
// for lossless; epsilon 0 and 10 beams for lossy.
irec::RecConfig resolve_config(const std::string& mode, double omega,
                               const std::optional<double>& epsilon,
                               const std::optional<std::uint32_t>& beams) {
  irec::RecConfig cfg = mode == "lossy" ? irec::lossy_defaults() : irec::lossless_defaults();
  cfg.omega = omega;
  if (epsilon) cfg.epsilon = *epsilon;
  if (beams) cfg.beams = *beams;
  return cfg;
}

struct CompressArgs {
  std::string mode = "lossless";
  std::string model, in, out;
  std::uint64_t seed = 0;
  double omega = 3.0;
  std::optional<double> epsilon;
  std::optional<std::uint32_t> beams;
  unsigned threads = 0;
};

struct DecompressArgs {
  std::string mode;  // empty: whatever the container holds
  std::string model, in, out;
  unsigned threads = 0;
};

struct FitArgs {
  std::vector<std::string> inputs;
  std::uint32_t synthetic = 0;
  std::uint32_t synthetic_size = 128;
  double synthetic_noise = 3.0;
  std::uint32_t latent = 16;
  std::uint32_t patch = irec::kDefaultPatch;
  std::uint64_t seed = 0;
  std::string out;
};

struct SynthArgs {
  std::uint32_t width = 64, height = 64, index = 0;
  std::uint64_t seed = 0;
  double noise = 3.0;
  std::string model, out;
};

struct BiasArgs {
  std::vector<std::uint32_t> beams{1, 5, 20};
  double kl = 30.0, omega = 3.0, epsilon = 0.2;
  std::uint32_t dims = 16, trials = 200;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
};

struct SweepArgs {
  std::vector<double> omega{3.0, 4.0, 5.0}, epsilon{0.2};
  std::vector<std::uint32_t> beams{1, 5, 20};
  std::uint32_t trials = 30, dims = 16;
  double kl = 30.0;
  std::string image, model, out;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct ValidateArgs {
  std::uint64_t seed = 1;
  double exponent = irec::kPowerLawExponent;
  std::string tie_break = "smallest";
  std::string histogram_csv;
  bool quick = false;
  unsigned threads = 0;
};

int run_compress(const CompressArgs& a) {
  const irec::LinearGaussianModel model = irec::load_model(a.model);
  const irec::ImageGray8 img = irec::read_pgm(a.in);
  const irec::RecConfig cfg = resolve_config(a.mode, a.omega, a.epsilon, a.beams);
  const irec::Mode mode = a.mode == "lossy" ? irec::Mode::kLossy : irec::Mode::kLossless;
  const irec::CompressionResult r =
      irec::compress(img, model, cfg, Seed64{a.seed}, mode, {a.threads});
  irec::detail::write_file(a.out, r.container);
  emit({{"command", "compress"},
        {"mode", a.mode},
        {"omega", cfg.omega},
        {"epsilon", cfg.epsilon},
        {"beams", cfg.beams},
        {"seed", a.seed},
        {"bpp", r.bpp},
        {"kl_nats", r.total_kl()},
        {"bits", r.total_bits()},
        {"payload_bits", r.payload_bits},
        {"residual_bits", r.residual_bits},
        {"psnr", r.psnr},
        {"seconds", r.seconds}});
  return kOk;
}

int run_decompress(const DecompressArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const irec::LinearGaussianModel model = irec::load_model(a.model);
  const std::vector<std::uint8_t> bytes = irec::detail::read_file(a.in);
  irec::ImageGray8 img;
  if (a.mode == "lossless") {
    img = irec::decompress_lossless(bytes, model, {a.threads});
  } else if (a.mode == "lossy") {
    img = irec::decompress_lossy(bytes, model, {a.threads});
  } else {
    img = irec::decompress(bytes, model, {a.threads});
  }
  irec::write_pgm(a.out, img);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  emit({{"command", "decompress"},
        {"width", img.width},
        {"height", img.height},
        {"bits", 8 * bytes.size()},
        {"bpp", 8.0 * static_cast<double>(bytes.size()) / static_cast<double>(img.size())},
        {"seconds", seconds}});
  return kOk;
}

int run_fit(const FitArgs& a) {
  std::vector<irec::Vector> data;
  for (const auto& path : a.inputs) {
    const auto tiles = irec::patchify(irec::read_pgm(path), a.patch);
    data.insert(data.end(), tiles.begin(), tiles.end());
  }
  for (std::uint32_t i = 0; i < a.synthetic; ++i) {
    const auto img = irec::synthetic_image(a.synthetic_size, a.synthetic_size, Seed64{a.seed}, i,
                                           a.synthetic_noise);
    const auto tiles = irec::patchify(img, a.patch);
    data.insert(data.end(), tiles.begin(), tiles.end());
  }
  if (data.empty()) throw irec::UsageError("fit: give --in images and/or --synthetic N");
  const irec::LinearGaussianModel m = irec::fit_ppca(data, a.latent);
  irec::save_model(a.out, m);
  char id[17];
  std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(irec::model_id(m)));
  emit({{"command", "fit"},
        {"patches", data.size()},
        {"dims", m.dims()},
        {"latent", m.latent_dims()},
        {"noise_var", m.noise_var},
        {"model_id", id}});
  return kOk;
}

int run_synth(const SynthArgs& a) {
  irec::ImageGray8 img;
  if (!a.model.empty()) {
    img = irec::sample_image(irec::load_model(a.model), a.width, a.height, Seed64{a.seed});
  } else {
    img = irec::synthetic_image(a.width, a.height, Seed64{a.seed}, a.index, a.noise);
  }
  irec::write_pgm(a.out, img);
  emit({{"command", "synth"}, {"width", img.width}, {"height", img.height}});
  return kOk;
}

int run_bias(const BiasArgs& a) {
  irec::BiasStudySpec opts;
  opts.beams = a.beams;
  opts.kl = a.kl;
  opts.dims = a.dims;
  opts.trials = a.trials;
  opts.omega = a.omega;
  opts.epsilon = a.epsilon;
  opts.seed = Seed64{a.seed};
  opts.threads = a.threads;
  write_text(a.out, irec::bias_csv(irec::bias_study(opts)));
  return kOk;
}

int run_sweep(const SweepArgs& a) {
  irec::SweepSpec opts;
  opts.omega_grid = a.omega;
  opts.epsilon_grid = a.epsilon;
  opts.beam_grid = a.beams;
  opts.trials = a.trials;
  opts.kl = a.kl;
  opts.dims = a.dims;
  opts.seed = Seed64{a.seed};
  opts.threads = a.threads;
  if (!a.image.empty() || !a.model.empty()) {
    if (a.image.empty() || a.model.empty()) {
      throw irec::UsageError("sweep: --image and --model go together");
    }
    opts.image = irec::read_pgm(a.image);
    opts.model = irec::load_model(a.model);
  }
  write_text(a.out, irec::sweep_csv(irec::sweep(opts)));
  return kOk;
}

int run_validate(const ValidateArgs& a) {
  irec::ValidateOptions o;
  o.seed = Seed64{a.seed};
  o.exponent = a.exponent;
  o.tie = a.tie_break == "largest" ? irec::detail::TieBreak::kLargestTuple
                                   : irec::detail::TieBreak::kSmallestTuple;
  o.histogram_csv_path = a.histogram_csv;
  o.threads = a.threads;
  if (a.quick) {
    o.chain_targets = 4;
    o.chain_trials = 20000;
    o.moment_configs = 10;
    o.moment_samples = 20000;
    o.ks_seeds = 2000;
    o.histogram_targets = 10;
    o.histogram_trials = 200;
  }
  bool all = true;
  for (const auto& c : irec::run_validation(o)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    all = all && c.passed;
  }
  return all ? kOk : kValidateFailed;
}

template <class Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const irec::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const irec::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kUsage;
  } catch (const irec::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const irec::ModelMismatchError& e) {
    std::cerr << "model mismatch: " << e.what() << "\n";
    return kModelMismatch;
  } catch (const irec::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const irec::CorruptStreamError& e) {
    std::cerr << "corrupt stream: " << e.what() << "\n";
    return kFormat;
  } catch (const irec::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kFormat;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"iREC relative-entropy codec: image compression, studies and self-checks"};
  app.require_subcommand(1);

  CompressArgs ca;
  auto* compress = app.add_subcommand("compress", "Compress a PGM image into an IREC container");
  compress->add_option("--mode", ca.mode, "lossy or lossless")
      ->check(CLI::IsMember({"lossy", "lossless"}))
      ->capture_default_str();
  compress->add_option("--model", ca.model, "LGM1 model file")->required();
  compress->add_option("--in", ca.in, "input PGM (P5)")->required();
  compress->add_option("--out", ca.out, "output container")->required();
  compress->add_option("--seed", ca.seed, "shared random seed")->capture_default_str();
  compress->add_option("--omega", ca.omega, "target nats per auxiliary step")->capture_default_str();
  compress->add_option("--epsilon", ca.epsilon,
                       "oversampling rate (default 0.2 lossless, 0 lossy)");
  compress->add_option("--beams", ca.beams, "beam count (default 20 lossless, 10 lossy)");
  compress->add_option("--threads", ca.threads, "worker threads, 0 = all cores");

  DecompressArgs da;
  auto* decompress = app.add_subcommand("decompress", "Decode an IREC container to a PGM image");
  decompress->add_option("--mode", da.mode, "require lossy or lossless (default: as stored)")
      ->check(CLI::IsMember({"lossy", "lossless"}));
  decompress->add_option("--model", da.model, "LGM1 model file")->required();
  decompress->add_option("--in", da.in, "input container")->required();
  decompress->add_option("--out", da.out, "output PGM")->required();
  decompress->add_option("--threads", da.threads, "worker threads, 0 = all cores");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a PPCA patch model");
  fit->add_option("--in", fa.inputs, "training PGM images");
  fit->add_option("--synthetic", fa.synthetic, "also train on N synthetic images");
  fit->add_option("--synthetic-size", fa.synthetic_size, "side of synthetic training images")
      ->capture_default_str();
  fit->add_option("--synthetic-noise", fa.synthetic_noise, "pixel noise of synthetic images")
      ->capture_default_str();
  fit->add_option("--latent", fa.latent, "latent dimension L")->capture_default_str();
  fit->add_option("--patch", fa.patch, "patch side")->capture_default_str();
  fit->add_option("--seed", fa.seed, "seed for synthetic images")->capture_default_str();
  fit->add_option("--out", fa.out, "output LGM1 file")->required();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a synthetic or model-sampled test image");
  synth->add_option("--width", sa.width)->capture_default_str();
  synth->add_option("--height", sa.height)->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();
  synth->add_option("--index", sa.index, "image index within the seed")->capture_default_str();
  synth->add_option("--noise", sa.noise, "pixel noise standard deviation")->capture_default_str();
  synth->add_option("--model", sa.model, "sample from this model instead");
  synth->add_option("--out", sa.out, "output PGM")->required();

  BiasArgs ba;
  auto* bias = app.add_subcommand("bias-study", "Mean log q(z)/p(z) versus beam count (CSV)");
  bias->add_option("--beams", ba.beams, "comma-separated beam counts")->delimiter(',');
  bias->add_option("--kl", ba.kl, "target KL in nats")->capture_default_str();
  bias->add_option("--dims", ba.dims)->capture_default_str();
  bias->add_option("--trials", ba.trials)->capture_default_str();
  bias->add_option("--omega", ba.omega)->capture_default_str();
  bias->add_option("--epsilon", ba.epsilon)->capture_default_str();
  bias->add_option("--seed", ba.seed)->capture_default_str();
  bias->add_option("--threads", ba.threads);
  bias->add_option("--out", ba.out, "CSV path (default stdout)");

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Overhead and time over an (omega, epsilon, B) grid");
  sweep->add_option("--omega-grid", wa.omega)->delimiter(',');
  sweep->add_option("--epsilon-grid", wa.epsilon)->delimiter(',');
  sweep->add_option("--beam-grid", wa.beams)->delimiter(',');
  sweep->add_option("--trials", wa.trials)->capture_default_str();
  sweep->add_option("--kl", wa.kl, "synthetic problem KL")->capture_default_str();
  sweep->add_option("--dims", wa.dims, "synthetic problem dims")->capture_default_str();
  sweep->add_option("--image", wa.image, "image problem: PGM");
  sweep->add_option("--model", wa.model, "image problem: LGM1 model");
  sweep->add_option("--seed", wa.seed)->capture_default_str();
  sweep->add_option("--threads", wa.threads);
  sweep->add_option("--out", wa.out, "CSV path (default stdout)");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Run the oracle suite");
  validate->add_option("--seed", va.seed)->capture_default_str();
  validate->add_option("--histogram-csv", va.histogram_csv, "write the per-step KL histogram");
  validate->add_option("--schedule-exponent", va.exponent, "power-law exponent (mutation hook)")
      ->capture_default_str();
  validate->add_option("--tie-break", va.tie_break, "smallest or largest (mutation hook)")
      ->check(CLI::IsMember({"smallest", "largest"}))
      ->capture_default_str();
  validate->add_flag("--quick", va.quick, "reduced trial counts");
  validate->add_option("--threads", va.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kUsage;
  }

  if (*compress) return guarded([&] { return run_compress(ca); });
  if (*decompress) return guarded([&] { return run_decompress(da); });
  if (*fit) return guarded([&] { return run_fit(fa); });
  if (*synth) return guarded([&] { return run_synth(sa); });
  if (*bias) return guarded([&] { return run_bias(ba); });
  if (*sweep) return guarded([&] { return run_sweep(wa); });
  if (*validate) return guarded([&] { return run_validate(va); });
  return kUsage;
}
