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

// Studies and self-checks behind the command-line tool: synthetic targets,
// the bias-versus-beams study, the hyperparameter sweep, and the validation
// suite. All randomness is taken from the shared stream at reserved steps,
// so every number here is a function of the seed.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "irec/aux_chain.hpp"
#include "irec/bitstream.hpp"
#include "irec/errors.hpp"
#include "irec/gauss.hpp"
#include "irec/pipeline.hpp"
#include "irec/rec_codec.hpp"
#include "irec/sample_stream.hpp"
#include "irec/toy_model.hpp"

namespace irec {

// Stream steps reserved for the harness. The codec only uses steps < K.
inline constexpr std::uint32_t kSynthTargetStep = 0xFFFF0000u;
inline constexpr std::uint32_t kRandomTargetStep = 0xFFFF0010u;
inline constexpr std::uint32_t kChainConfigStep = 0xFFFF0300u;
inline constexpr std::uint32_t kMomentStep = 0xFFFF0400u;
inline constexpr std::uint32_t kDirectStep = 0xFFFF0500u;

// ---- Synthetic targets ----

// Random diagonal Gaussian with exactly `kl` nats (to within 1e-12 relative,
// never above) against N(0, I): means 0.5 * scale * g with g ~ N(0, 1),
// log-stds ~ U[-1, 0]; scale is found by bisection.
inline DiagGaussian synthetic_target(double kl, std::uint32_t dims, Seed64 seed,
                                     std::uint32_t index) {
  if (dims == 0) throw UsageError("synthetic_target: dims must be >= 1");
  if (!(kl > 0.0) || !std::isfinite(kl)) throw UsageError("synthetic_target: KL must be positive");
  const Vector g = draw_vector(seed, index, kSynthTargetStep, 0, dims);
  Vector stddev(dims);
  for (std::uint32_t i = 0; i < dims; ++i) {
    stddev[i] = std::exp(-draw_uniform(seed, index, kSynthTargetStep, 1 + i));
  }
  const DiagGaussian p = DiagGaussian::standard(dims);
  auto kl_at = [&](double scale) {
    Vector mean(dims);
    for (std::uint32_t i = 0; i < dims; ++i) mean[i] = 0.5 * scale * g[i];
    return kl_divergence(DiagGaussian(mean, stddev), p);
  };
  if (kl_at(0.0) > kl) {
    throw UsageError("synthetic_target: the variance term alone exceeds the requested KL");
  }
  double lo = 0.0, hi = 1.0;
  while (kl_at(hi) <= kl) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericError("synthetic_target: cannot reach the requested KL");
  }
  for (int it = 0; it < 200 && hi - lo > lo * 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kl_at(mid) <= kl ? lo : hi) = mid;
  }
  Vector mean(dims);
  for (std::uint32_t i = 0; i < dims; ++i) mean[i] = 0.5 * lo * g[i];
  return DiagGaussian(std::move(mean), std::move(stddev));
}

// Broader random targets for the chain identity: means 2 g, log-stds
// U[-1.5, 0.5]. Redrawn until the KL is at least `min_kl`, since a relative
// tolerance is meaningless near zero.
inline DiagGaussian random_target(std::uint32_t dims, Seed64 seed, std::uint32_t index,
                                  double min_kl = 1.0) {
  const DiagGaussian p = DiagGaussian::standard(dims);
  for (std::uint32_t attempt = 0; attempt < 1000; ++attempt) {
    const std::uint32_t slot = attempt * (dims + 1);
    const Vector g = draw_vector(seed, index, kRandomTargetStep, slot, dims);
    Vector mean(dims), stddev(dims);
    for (std::uint32_t i = 0; i < dims; ++i) {
      mean[i] = 2.0 * g[i];
      stddev[i] = std::exp(-1.5 + 2.0 * draw_uniform(seed, index, kRandomTargetStep, slot + 1 + i));
    }
    DiagGaussian q(std::move(mean), std::move(stddev));
    if (kl_divergence(q, p) >= min_kl) return q;
  }
  throw NumericError("random_target: no draw reached the minimum KL");
}

// ---- Small statistics helpers ----

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.stderr_ = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return r;
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---- Bias versus beams ----

struct BiasRow {
  std::uint32_t beams = 0;
  double mean_log_ratio = 0.0;
  double stderr_ = 0.0;
  double kl = 0.0;
};

struct BiasStudySpec {
  std::vector<std::uint32_t> beams{1, 5, 20};
  double kl = 30.0;
  std::uint32_t dims = 16;
  std::uint32_t trials = 200;
  double omega = 3.0;
  double epsilon = 0.2;
  Seed64 seed{0};
  unsigned threads = 0;

  void validate() const {
    if (beams.empty()) throw UsageError("bias study: beam list is empty");
    if (trials < 30) throw UsageError("bias study: need at least 30 trials");
  }
};

// Every trial draws one synthetic target and encodes it once per beam count
// with the same shared randomness, so the rows differ only through B.
inline std::vector<BiasRow> bias_study(const BiasStudySpec& opts) {
  opts.validate();
  const std::size_t nb = opts.beams.size();
  std::vector<std::vector<double>> ratios(nb, std::vector<double>(opts.trials));
  detail::parallel_for(opts.trials, opts.threads, [&](std::size_t t) {
    const auto trial = static_cast<std::uint32_t>(t);
    const DiagGaussian q = synthetic_target(opts.kl, opts.dims, opts.seed, trial);
    const AuxSchedule s =
        build_schedule(kl_divergence(q, DiagGaussian::standard(opts.dims)), opts.omega, opts.epsilon);
    for (std::size_t b = 0; b < nb; ++b) {
      const RecConfig cfg{opts.omega, opts.epsilon, opts.beams[b], false};
      ratios[b][t] = encode(q, s, cfg, opts.seed, trial).log_ratio;
    }
  });
  std::vector<BiasRow> rows;
  for (std::size_t b = 0; b < nb; ++b) {
    const MeanStderr ms = mean_stderr(ratios[b]);
    rows.push_back({opts.beams[b], ms.mean, ms.stderr_, opts.kl});
  }
  return rows;
}

inline std::string bias_csv(const std::vector<BiasRow>& rows) {
  std::string out = "beams,mean_log_ratio,stderr,kl\n";
  for (const auto& r : rows) {
    out += std::to_string(r.beams) + "," + format_double(r.mean_log_ratio) + "," +
           format_double(r.stderr_) + "," + format_double(r.kl) + "\n";
  }
  return out;
}

// ---- Hyperparameter sweep ----

struct SweepSpec {
  std::vector<double> omega_grid{3.0, 4.0, 5.0};
  std::vector<double> epsilon_grid{0.2};
  std::vector<std::uint32_t> beam_grid{1, 5, 20};
  std::uint32_t trials = 30;
  // Synthetic problem.
  double kl = 30.0;
  std::uint32_t dims = 16;
  // Image problem; used instead of the synthetic one when both are set.
  std::optional<ImageGray8> image;
  std::optional<LinearGaussianModel> model;
  Seed64 seed{0};
  unsigned threads = 0;

  void validate() const {
    if (omega_grid.empty() || epsilon_grid.empty() || beam_grid.empty()) {
      throw UsageError("sweep: every grid needs at least one value");
    }
    if (trials < 30) throw UsageError("sweep: need at least 30 trials");
    if (image.has_value() != model.has_value()) {
      throw UsageError("sweep: the image problem needs both an image and a model");
    }
  }
};

struct SweepRow {
  double omega = 0.0;
  double epsilon = 0.0;
  std::uint32_t beams = 0;
  double overhead_ratio = 0.0;  // NaN when every trial was rejected
  double seconds = 0.0;
  std::uint32_t failures = 0;
};

// Overhead of one synthetic trial, relative to KL in bits: the transmitted
// payload plus the shortfall of log q(z)/p(z) below KL (the extra cost the
// residual pays for a biased z), minus one.
inline double synthetic_overhead(std::uint64_t payload_bits, double kl, double log_ratio) {
  const double ideal = kl / std::numbers::ln2;
  return (static_cast<double>(payload_bits) + (kl - log_ratio) / std::numbers::ln2) / ideal - 1.0;
}

inline std::vector<SweepRow> sweep(const SweepSpec& opts) {
  opts.validate();
  std::vector<SweepRow> rows;
  const bool image_mode = opts.image.has_value();
  double elbo_bits = 0.0;
  if (image_mode) elbo_bits = negative_elbo_bits(*opts.image, *opts.model).total();

  std::vector<DiagGaussian> targets;
  if (!image_mode) {
    for (std::uint32_t t = 0; t < opts.trials; ++t) {
      targets.push_back(synthetic_target(opts.kl, opts.dims, opts.seed, t));
    }
  }

  for (double omega : opts.omega_grid) {
    for (double eps : opts.epsilon_grid) {
      for (std::uint32_t beams : opts.beam_grid) {
        const auto t0 = std::chrono::steady_clock::now();
        const RecConfig cfg{omega, eps, beams, false};
        std::vector<double> overhead(opts.trials, std::numeric_limits<double>::quiet_NaN());
        std::vector<char> failed(opts.trials, 0);
        auto run = [&](std::size_t t) {
          try {
            if (image_mode) {
              const Seed64 seed{opts.seed.value + t};
              const CompressionResult r = compress_lossless(*opts.image, *opts.model, cfg, seed,
                                                            PipelineOptions{1});
              overhead[t] = static_cast<double>(r.total_bits()) / elbo_bits - 1.0;
            } else {
              const DiagGaussian& q = targets[t];
              const double kl = kl_divergence(q, DiagGaussian::standard(opts.dims));
              const AuxSchedule s = build_schedule(kl, omega, eps);
              const EncodeResult enc = encode(q, s, cfg, opts.seed, static_cast<std::uint32_t>(t));
              const std::uint64_t bits = payload_bits(s.K, s.M) + 8 * varint_length(s.K);
              overhead[t] = synthetic_overhead(bits, kl, enc.log_ratio);
            }
          } catch (const ConfigError&) {
            failed[t] = 1;
          }
        };
        detail::parallel_for(opts.trials, opts.threads, run);
        SweepRow row{omega, eps, beams, 0.0, 0.0, 0};
        std::vector<double> ok;
        for (std::size_t t = 0; t < opts.trials; ++t) {
          if (failed[t]) {
            ++row.failures;
          } else {
            ok.push_back(overhead[t]);
          }
        }
        row.overhead_ratio =
            ok.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_stderr(ok).mean;
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back(row);
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.omega != b.omega) return a.omega < b.omega;
    if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
    return a.beams < b.beams;
  });
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "omega,epsilon,beams,overhead_ratio,seconds,failures\n";
  for (const auto& r : rows) {
    out += format_double(r.omega) + "," + format_double(r.epsilon) + "," +
           std::to_string(r.beams) + "," + format_double(r.overhead_ratio) + "," +
           format_double(r.seconds) + "," + std::to_string(r.failures) + "\n";
  }
  return out;
}

// ---- Oracle checks ----

struct ChainIdentityResult {
  double analytic = 0.0;
  double monte_carlo = 0.0;
  double relative_error() const { return std::abs(monte_carlo - analytic) / analytic; }
};

// Sum over steps of the MC per-step KL against the closed-form total.
inline ChainIdentityResult chain_identity(const DiagGaussian& q, double omega, double epsilon,
                                          std::uint32_t trials, Seed64 seed,
                                          double exponent = kPowerLawExponent) {
  const double kl = kl_divergence(q, DiagGaussian::standard(q.dims()));
  const AuxSchedule s = build_schedule(kl, omega, epsilon, exponent);
  ChainIdentityResult r{kl, 0.0};
  for (double v : chain_kl_profile(q, s, trials, seed)) r.monte_carlo += v;
  return r;
}

struct MomentResult {
  double closed_mean = 0.0, closed_var = 0.0;
  double mc_mean = 0.0, mc_var = 0.0;
  double se_mean = 0.0, se_var = 0.0;
  std::uint32_t K = 0, k = 0;

  bool within(double n_se) const {
    return std::abs(mc_mean - closed_mean) <= n_se * se_mean &&
           std::abs(mc_var - closed_var) <= n_se * se_var;
  }
};

// One random univariate chain configuration: target, K and a prefix
// a_1..a_k drawn from the chain itself. Then samples z from the running
// posterior and a_{k+1} from p(a_{k+1} | prefix, z), and compares the
// moments with the closed-form target for a_{k+1}.
inline MomentResult moment_check(std::uint32_t config, std::uint32_t samples, Seed64 seed) {
  if (samples < 2) throw UsageError("moment_check: need at least 2 samples");
  auto u = [&](std::uint32_t slot) { return draw_uniform(seed, config, kChainConfigStep, slot); };
  const double mean = 3.0 * draw_scalar(seed, {config, kChainConfigStep, 100, 0});
  const double stddev = std::exp(-2.5 + 3.0 * u(0));
  const auto K = static_cast<std::uint32_t>(2 + std::floor(11.0 * u(1)));
  const auto k = static_cast<std::uint32_t>(std::floor(K * u(2)));
  const AuxSchedule s = build_schedule_for_steps(K, 3.0, 0.2);
  ChainState st = initial_state(DiagGaussian({mean}, {stddev}));
  for (std::uint32_t j = 0; j < k; ++j) {
    const DiagGaussian t = aux_target(st, s);
    const double a = t.mean(0) + t.std(0) * draw_scalar(seed, {config, kChainConfigStep, 200 + j, 0});
    st = posterior_update(st, s, std::vector<double>{a});
  }
  const DiagGaussian closed = aux_target(st, s);

  const double z_sd = std::sqrt(st.rho_sq[0]);
  double sum = 0.0;
  std::vector<double> draws(samples);
  double pair[2];
  for (std::uint32_t n = 0; n < samples; ++n) {
    draw_vector_into(seed, config, kMomentStep, n, pair);
    const double z = st.nu[0] + z_sd * pair[0];
    const DiagGaussian cond = conditional_prior(st, s, std::vector<double>{z});
    draws[n] = cond.mean(0) + cond.std(0) * pair[1];
    sum += draws[n];
  }
  const double nd = samples;
  const double m = sum / nd;
  double m2 = 0.0, m4 = 0.0;
  for (double x : draws) {
    const double d = (x - m) * (x - m);
    m2 += d;
    m4 += d * d;
  }
  const double var = m2 / (nd - 1.0);
  m4 /= nd;
  MomentResult r;
  r.closed_mean = closed.mean(0);
  r.closed_var = closed.variance(0);
  r.mc_mean = m;
  r.mc_var = var;
  r.se_mean = std::sqrt(var / nd);
  r.se_var = std::sqrt(std::max(m4 - (m2 / nd) * (m2 / nd), 0.0) / nd);
  r.K = K;
  r.k = k;
  return r;
}

// The univariate fidelity benchmark: q = N(0.5, 0.8^2) against N(0, 1).
inline DiagGaussian fidelity_target() { return DiagGaussian({0.5}, {0.8}); }

// Decoded z for `count` independent seeds base, base+1, ... in stochastic
// single-beam mode.
inline std::vector<double> stochastic_samples(std::uint32_t count, std::uint64_t base_seed,
                                              double omega = 3.0, double epsilon = 0.2,
                                              unsigned threads = 0) {
  const DiagGaussian q = fidelity_target();
  const AuxSchedule s = build_schedule(kl_divergence(q, DiagGaussian::standard(1)), omega, epsilon);
  const RecConfig cfg{omega, epsilon, 1, true};
  std::vector<double> z(count);
  detail::parallel_for(count, threads, [&](std::size_t i) {
    const Seed64 seed{base_seed + i};
    const EncodeResult enc = encode(q, s, cfg, seed, 0);
    z[i] = decode(enc.indices, s, cfg, seed, 0, 1)[0];
  });
  return z;
}

// Direct draws from the fidelity target out of the shared stream.
inline std::vector<double> direct_samples(std::uint32_t count, Seed64 seed) {
  const DiagGaussian q = fidelity_target();
  std::vector<double> out(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    out[i] = q.mean(0) + q.std(0) * draw_scalar(seed, {i, kDirectStep, 0, 0});
  }
  return out;
}

struct StepKl {
  std::uint32_t target = 0;
  std::uint32_t step = 0;
  double mean_kl = 0.0;
};

struct StepKlStudy {
  std::vector<StepKl> steps;
  double threshold = 0.0;  // omega * (1 + epsilon)
  double fraction_at_or_below() const {
    if (steps.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& s : steps) n += s.mean_kl <= threshold ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(steps.size());
  }
};

// Per-step mean KL over many synthetic targets.
inline StepKlStudy step_kl_study(double kl, std::uint32_t dims, std::uint32_t targets,
                                 std::uint32_t trials, double omega, double epsilon,
                                 double exponent, Seed64 seed, unsigned threads = 0) {
  std::vector<std::vector<double>> profiles(targets);
  detail::parallel_for(targets, threads, [&](std::size_t t) {
    const DiagGaussian q = synthetic_target(kl, dims, seed, static_cast<std::uint32_t>(t));
    const AuxSchedule s =
        build_schedule(kl_divergence(q, DiagGaussian::standard(dims)), omega, epsilon, exponent);
    profiles[t] = chain_kl_profile(q, s, trials, Seed64{seed.value ^ 0x5bd1e995u});
  });
  StepKlStudy out;
  out.threshold = omega * (1.0 + epsilon);
  for (std::uint32_t t = 0; t < targets; ++t) {
    for (std::uint32_t k = 0; k < profiles[t].size(); ++k) {
      out.steps.push_back({t, k + 1, profiles[t][k]});
    }
  }
  return out;
}

// Histogram of per-step mean KL in bins of `width` nats.
inline std::string step_kl_histogram_csv(const StepKlStudy& study, double width = 0.25) {
  double top = 0.0;
  for (const auto& s : study.steps) top = std::max(top, s.mean_kl);
  const auto bins = static_cast<std::size_t>(std::floor(top / width)) + 1;
  std::vector<std::uint32_t> count(bins, 0);
  for (const auto& s : study.steps) {
    count[std::min(bins - 1, static_cast<std::size_t>(std::floor(s.mean_kl / width)))]++;
  }
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < bins; ++b) {
    out += format_double(b * width) + "," + format_double((b + 1) * width) + "," +
           std::to_string(count[b]) + "\n";
  }
  return out;
}

inline std::string step_kl_csv(const StepKlStudy& study) {
  std::string out = "target,step,mean_kl\n";
  for (const auto& s : study.steps) {
    out += std::to_string(s.target) + "," + std::to_string(s.step) + "," +
           format_double(s.mean_kl) + "\n";
  }
  return out;
}

// ---- Validation suite ----

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidateOptions {
  Seed64 seed{1};
  // Mutation hooks: a correct build uses the defaults.
  double exponent = kPowerLawExponent;
  detail::TieBreak tie = detail::TieBreak::kSmallestTuple;

  std::uint32_t chain_targets = 20;      // of each kind, univariate and 16-dim
  std::uint32_t chain_trials = 100000;
  std::uint32_t moment_configs = 50;
  std::uint32_t moment_samples = 100000;
  std::uint32_t ks_seeds = 10000;
  std::uint32_t histogram_targets = 20;
  std::uint32_t histogram_trials = 500;
  std::string histogram_csv_path;  // written when non-empty
  unsigned threads = 0;
};

inline CheckResult check_chain_identity(const ValidateOptions& o) {
  double worst = 0.0;
  std::vector<double> errs(2 * std::size_t{o.chain_targets});
  detail::parallel_for(errs.size(), o.threads, [&](std::size_t i) {
    const std::uint32_t dims = i < o.chain_targets ? 1 : 16;
    const DiagGaussian q = random_target(dims, o.seed, static_cast<std::uint32_t>(i));
    errs[i] = chain_identity(q, 3.0, 0.2, o.chain_trials, Seed64{o.seed.value + 1 + i}, o.exponent)
                  .relative_error();
  });
  for (double e : errs) worst = std::max(worst, e);
  return {"chain-kl-identity", worst <= 0.02,
          "worst relative error " + format_double(worst) + " over " +
              std::to_string(errs.size()) + " targets (limit 0.02)"};
}

inline CheckResult check_moments(const ValidateOptions& o) {
  std::vector<char> ok(o.moment_configs);
  detail::parallel_for(ok.size(), o.threads, [&](std::size_t c) {
    ok[c] = moment_check(static_cast<std::uint32_t>(c), o.moment_samples, o.seed).within(3.0);
  });
  const auto passed = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
  return {"conditional-moments", passed == ok.size(),
          std::to_string(passed) + "/" + std::to_string(ok.size()) +
              " configurations within 3 standard errors"};
}

inline CheckResult check_distribution(const ValidateOptions& o) {
  const auto z = stochastic_samples(o.ks_seeds, o.seed.value * 1000003u, 3.0, 0.2, o.threads);
  const double d = ks_distance(z, direct_samples(o.ks_seeds, o.seed));
  return {"stochastic-ks", d <= 0.05, "KS distance " + format_double(d) + " (limit 0.05)"};
}

inline CheckResult check_step_kl(const ValidateOptions& o) {
  const StepKlStudy study = step_kl_study(30.0, 16, o.histogram_targets, o.histogram_trials, 3.0,
                                          0.2, o.exponent, o.seed, o.threads);
  if (!o.histogram_csv_path.empty()) {
    const std::string csv = step_kl_histogram_csv(study);
    detail::write_file(o.histogram_csv_path,
                       {reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()});
  }
  const double f = study.fraction_at_or_below();
  return {"step-kl-histogram", f >= 0.8,
          format_double(100.0 * f) + "% of per-step mean KLs <= " +
              format_double(study.threshold) + " nats (need >= 80%)"};
}

// Encoding is reproducible, decoding matches the encoder's z, and ties are
// broken towards the lexicographically smallest index tuple: for q = p every
// candidate has the same weight, so index 0 must win.
inline CheckResult check_determinism(const ValidateOptions& o) {
  const RecConfig cfg = lossless_defaults();
  const DiagGaussian q = synthetic_target(10.0, 8, o.seed, 0);
  const AuxSchedule s = build_schedule(kl_divergence(q, DiagGaussian::standard(8)), 3.0, 0.2);
  const EncodeResult a = detail::encode_impl(q, s, cfg, o.seed, 7, o.tie);
  const EncodeResult b = detail::encode_impl(q, s, cfg, o.seed, 7, o.tie);
  if (!(a.indices == b.indices) || a.z != b.z) {
    return {"determinism", false, "repeated encodes differ"};
  }
  if (decode(a.indices, s, cfg, o.seed, 7, 8) != a.z) {
    return {"determinism", false, "decoded z differs from the encoder's z"};
  }
  const DiagGaussian flat = DiagGaussian::standard(4);
  const AuxSchedule s1 = build_schedule(0.0, 3.0, 0.2);
  const EncodeResult tie = detail::encode_impl(flat, s1, cfg, o.seed, 0, o.tie);
  if (tie.indices.indices != std::vector<std::uint32_t>{0}) {
    return {"determinism", false,
            "tie broken towards index " + std::to_string(tie.indices.indices.at(0)) +
                ", expected 0"};
  }
  return {"determinism", true, "repeatable, decoder-consistent, ties to smallest tuple"};
}

inline std::vector<CheckResult> run_validation(const ValidateOptions& o) {
  return {check_chain_identity(o), check_moments(o), check_distribution(o), check_step_kl(o),
          check_determinism(o)};
}

}  // namespace irec
