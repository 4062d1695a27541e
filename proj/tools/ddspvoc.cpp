// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/errors.hpp"
#include "ddspvoc/grad.hpp"
#include "ddspvoc/io.hpp"
#include "ddspvoc/loss.hpp"
#include "ddspvoc/metrics.hpp"
#include "ddspvoc/vocoder.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ddspvoc;

constexpr int kExitUsage = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;

// Seed resolution order: --seed flag, DDSPVOC_SEED environment variable,
// then zero.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  const char* env = std::getenv("DDSPVOC_SEED");
  if (env == nullptr || *env == '\0') return 0;
  std::uint64_t value = 0;
  const char* end = env + std::string_view(env).size();
  const auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw FormatError(std::string("DDSPVOC_SEED is not an unsigned integer: ") +
                      env);
  }
  return value;
}

// Same write-to-temp, rename-on-success discipline as the binary writers.
void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw FormatError("cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw FormatError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw FormatError("cannot move " + tmp.string() + " to " + path.string());
  }
}

// Synthesis geometry implied by a feature file: the frequency-domain frame
// responses cover two hops, so fft = 2 * hop, which must be a power of two.
SynthConfig synth_config_for(const AcousticFeatures& features,
                             std::uint64_t seed, F0Interp interp) {
  const int hop = features.config.hop;
  if (hop < 2 || (hop & (hop - 1)) != 0) {
    throw FormatError("feature hop " + std::to_string(hop) +
                      " unsupported for synthesis: 2*hop must be a power of "
                      "two");
  }
  SynthConfig cfg;
  cfg.frame.sample_rate = features.config.sample_rate;
  cfg.frame.hop = hop;
  cfg.frame.fft_size = 2 * hop;
  cfg.frame.window_len = 2 * hop;
  cfg.noise_seed = seed;
  cfg.f0_interp = interp;
  return cfg;
}

double voiced_fraction(const AcousticFeatures& features) {
  if (features.f0.empty()) return 0.0;
  std::size_t voiced = 0;
  for (double f : features.f0) voiced += f > 0.0 ? 1 : 0;
  return static_cast<double>(voiced) / static_cast<double>(features.f0.size());
}

std::string format_db(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

struct FrameFlags {
  int sample_rate = 16000;
  int fft_size = 256;
  int hop = 128;
  int window_len = 256;
  CLI::Option* sample_rate_opt = nullptr;

  void attach(CLI::App* cmd) {
    sample_rate_opt = cmd->add_option("--sample-rate", sample_rate,
                                      "Sample rate in Hz (default: 16000; "
                                      "defaults to the input file's rate)");
    cmd->add_option("--fft", fft_size, "FFT size (default: 256)");
    cmd->add_option("--hop", hop, "Hop size in samples (default: 128)");
    cmd->add_option("--window", window_len, "Window length (default: 256)");
  }

  // Analysis frame geometry; follows the input rate unless --sample-rate
  // was given, in which case a mismatch is an error.
  FrameConfig resolve(int wave_rate) const {
    FrameConfig cfg;
    cfg.sample_rate = sample_rate;
    cfg.fft_size = fft_size;
    cfg.hop = hop;
    cfg.window_len = window_len;
    if (sample_rate_opt->count() == 0) {
      cfg.sample_rate = wave_rate;
    } else if (cfg.sample_rate != wave_rate) {
      throw FormatError("input is " + std::to_string(wave_rate) +
                        " Hz but --sample-rate asked for " +
                        std::to_string(cfg.sample_rate) + " Hz");
    }
    cfg.validate();
    return cfg;
  }
};

AcousticFeatures run_analysis(const Waveform& wave, const FrameConfig& cfg,
                              double f0_min, double f0_max) {
  F0Config f0cfg;
  f0cfg.f0_min = f0_min;
  f0cfg.f0_max = f0_max;
  return analyze(wave, cfg, f0cfg);
}

void report_features(const AcousticFeatures& features) {
  std::printf("frames: %zu\n", features.num_frames());
  std::printf("voiced: %.1f%%\n", 100.0 * voiced_fraction(features));
}

Waveform run_streaming_synthesis(const AcousticFeatures& features,
                                 const SynthConfig& cfg) {
  const MelFilterbank fb80 = make_envelope_bank(cfg.frame);
  const MelFilterbank fb12 = make_periodicity_bank(cfg.frame);
  const FrameFilters filters = make_frame_filters(features, fb80, fb12);
  StreamingSynthesizer stream(cfg);
  std::vector<double> samples;
  for (std::size_t t = 0; t < features.num_frames(); ++t) {
    const auto chunk = stream.push(features.f0[t], filters.periodic_mag.row(t),
                                   filters.aperiodic_mag.row(t));
    samples.insert(samples.end(), chunk.begin(), chunk.end());
  }
  const auto tail = stream.flush();
  samples.insert(samples.end(), tail.begin(), tail.end());

  // Drop the warm-up prefix and the trailing spill, leaving the nominal
  // (T - 1) * hop samples, exactly as the offline path does.
  const std::size_t skip =
      static_cast<std::size_t>(stream.latency_hops()) *
      static_cast<std::size_t>(cfg.frame.hop);
  const std::size_t n_out =
      (features.num_frames() - 1) * static_cast<std::size_t>(cfg.frame.hop);
  Waveform out;
  out.sample_rate = cfg.frame.sample_rate;
  out.samples.assign(samples.begin() + skip, samples.begin() + skip + n_out);
  return out;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-phase source-filter vocoder: feature extraction, "
               "synthesis, feature fitting, and evaluation"};
  app.require_subcommand(1);

  // ---- analyze ----
  auto* analyze_cmd =
      app.add_subcommand("analyze", "Extract F0, periodicity and log-mel "
                                    "envelope features from a WAV file");
  std::string an_in, an_out;
  double an_f0_min = 50.0, an_f0_max = 500.0;
  FrameFlags an_frame;
  analyze_cmd->add_option("--in", an_in, "Input WAV")->required();
  analyze_cmd->add_option("--out", an_out, "Output feature file")->required();
  analyze_cmd->add_option("--f0-min", an_f0_min, "Lowest F0 candidate in Hz");
  analyze_cmd->add_option("--f0-max", an_f0_max, "Highest F0 candidate in Hz");
  an_frame.attach(analyze_cmd);

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand(
      "synth", "Synthesize a WAV from a feature file");
  std::string sy_feat, sy_out, sy_interp = "hold";
  std::uint64_t sy_seed = 0;
  bool sy_streaming = false, sy_pcm16 = false;
  synth_cmd->add_option("--feat", sy_feat, "Input feature file")->required();
  synth_cmd->add_option("--out", sy_out, "Output WAV")->required();
  auto* sy_seed_opt =
      synth_cmd->add_option("--seed", sy_seed, "Noise seed (default: "
                                               "DDSPVOC_SEED or 0)");
  synth_cmd->add_option("--f0-interp", sy_interp,
                        "F0 interpolation across each frame: hold | linear")
      ->check(CLI::IsMember({"hold", "linear"}));
  synth_cmd->add_flag("--streaming", sy_streaming,
                      "Drive the causal streaming path frame by frame");
  synth_cmd->add_flag("--pcm16", sy_pcm16, "Write 16-bit PCM instead of "
                                           "float32");

  // ---- copysynth ----
  auto* copy_cmd = app.add_subcommand(
      "copysynth", "Analyze a WAV and resynthesize it in one step");
  std::string cp_in, cp_out;
  double cp_f0_min = 50.0, cp_f0_max = 500.0;
  std::uint64_t cp_seed = 0;
  bool cp_pcm16 = false;
  FrameFlags cp_frame;
  copy_cmd->add_option("--in", cp_in, "Input WAV")->required();
  copy_cmd->add_option("--out", cp_out, "Output WAV")->required();
  auto* cp_seed_opt =
      copy_cmd->add_option("--seed", cp_seed, "Noise seed (default: "
                                              "DDSPVOC_SEED or 0)");
  copy_cmd->add_option("--f0-min", cp_f0_min, "Lowest F0 candidate in Hz");
  copy_cmd->add_option("--f0-max", cp_f0_max, "Highest F0 candidate in Hz");
  copy_cmd->add_flag("--pcm16", cp_pcm16, "Write 16-bit PCM instead of "
                                          "float32");
  cp_frame.attach(copy_cmd);

  // ---- fit ----
  auto* fit_cmd = app.add_subcommand(
      "fit", "Refine features by gradient descent on the multi-resolution "
             "spectral loss against a target WAV");
  std::string ft_target, ft_init, ft_out, ft_history;
  int ft_steps = 50;
  double ft_lr = 1e-2, ft_beta1 = 0.9, ft_beta2 = 0.999;
  std::uint64_t ft_seed = 0;
  std::vector<int> ft_windows = {512, 1024, 2048};
  std::vector<double> ft_weights = {25.7, 51.3, 102.5};
  fit_cmd->add_option("--target", ft_target, "Target WAV")->required();
  fit_cmd->add_option("--init", ft_init, "Initial feature file")->required();
  fit_cmd->add_option("--out", ft_out, "Output feature file")->required();
  fit_cmd->add_option("--history", ft_history,
                      "Optional CSV of per-step losses");
  fit_cmd->add_option("--steps", ft_steps, "Optimization steps (default: 50)");
  fit_cmd->add_option("--lr", ft_lr, "Learning rate (default: 0.01)");
  fit_cmd->add_option("--beta1", ft_beta1, "First-moment decay (default: 0.9)");
  fit_cmd->add_option("--beta2", ft_beta2,
                      "Second-moment decay (default: 0.999)");
  auto* ft_seed_opt =
      fit_cmd->add_option("--seed", ft_seed, "Noise seed (default: "
                                             "DDSPVOC_SEED or 0)");
  fit_cmd->add_option("--loss-windows", ft_windows,
                      "Loss FFT sizes (default: 512,1024,2048)")
      ->delimiter(',');
  fit_cmd->add_option("--loss-weights", ft_weights,
                      "Loss term weights (default: 25.7,51.3,102.5)")
      ->delimiter(',');

  // ---- mix ----
  auto* mix_cmd = app.add_subcommand(
      "mix", "Add noise to a clean WAV at a chosen signal-to-noise ratio");
  std::string mx_clean, mx_noise, mx_out;
  double mx_snr = 0.0;
  bool mx_pcm16 = false;
  mix_cmd->add_option("--clean", mx_clean, "Clean WAV")->required();
  mix_cmd->add_option("--noise", mx_noise, "Noise WAV (at least as long)")
      ->required();
  mix_cmd->add_option("--snr", mx_snr, "Target SNR in dB")->required();
  mix_cmd->add_option("--out", mx_out, "Output WAV")->required();
  mix_cmd->add_flag("--pcm16", mx_pcm16, "Write 16-bit PCM instead of "
                                         "float32");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand(
      "eval", "Report MCD, spectrogram SSIM and measured SNR between an "
              "estimate and a reference WAV");
  std::string ev_ref, ev_est, ev_csv;
  FrameFlags ev_frame;
  eval_cmd->add_option("--ref", ev_ref, "Reference WAV")->required();
  eval_cmd->add_option("--est", ev_est, "Estimate WAV")->required();
  eval_cmd->add_option("--csv", ev_csv, "Optional CSV output path");
  ev_frame.attach(eval_cmd);

  // ---- bench ----
  auto* bench_cmd = app.add_subcommand(
      "bench", "Measure the streaming synthesizer's real-time factor");
  std::string bn_feat;
  int bn_iters = 5;
  std::uint64_t bn_seed = 0;
  bench_cmd->add_option("--feat", bn_feat, "Input feature file")->required();
  bench_cmd->add_option("--iters", bn_iters, "Timed repetitions (default: 5)");
  auto* bn_seed_opt =
      bench_cmd->add_option("--seed", bn_seed, "Noise seed (default: "
                                               "DDSPVOC_SEED or 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*analyze_cmd) {
      const Waveform wave = read_wav(an_in);
      const FrameConfig cfg = an_frame.resolve(wave.sample_rate);
      const AcousticFeatures features =
          run_analysis(wave, cfg, an_f0_min, an_f0_max);
      write_features(an_out, features);
      report_features(features);
    } else if (*synth_cmd) {
      const AcousticFeatures features = read_features(sy_feat);
      const F0Interp interp =
          sy_interp == "linear" ? F0Interp::kLinear : F0Interp::kHold;
      const SynthConfig cfg = synth_config_for(
          features, resolve_seed(sy_seed_opt, sy_seed), interp);
      const Waveform wave = sy_streaming
                                ? run_streaming_synthesis(features, cfg)
                                : synthesize(features, cfg);
      write_wav(sy_out, wave,
                sy_pcm16 ? WavEncoding::kPcm16 : WavEncoding::kFloat32);
      std::printf("wrote %zu samples (%.2f s)\n", wave.samples.size(),
                  wave.duration_seconds());
    } else if (*copy_cmd) {
      const Waveform wave = read_wav(cp_in);
      const FrameConfig cfg = cp_frame.resolve(wave.sample_rate);
      const AcousticFeatures features =
          run_analysis(wave, cfg, cp_f0_min, cp_f0_max);
      const SynthConfig synth_cfg = synth_config_for(
          features, resolve_seed(cp_seed_opt, cp_seed), F0Interp::kHold);
      const Waveform out = synthesize(features, synth_cfg);
      write_wav(cp_out, out,
                cp_pcm16 ? WavEncoding::kPcm16 : WavEncoding::kFloat32);
      report_features(features);
      std::printf("wrote %zu samples (%.2f s)\n", out.samples.size(),
                  out.duration_seconds());
    } else if (*fit_cmd) {
      const Waveform target = read_wav(ft_target);
      const AcousticFeatures init = read_features(ft_init);
      if (init.config.sample_rate != target.sample_rate) {
        throw FormatError("feature file is " +
                          std::to_string(init.config.sample_rate) +
                          " Hz but the target WAV is " +
                          std::to_string(target.sample_rate) + " Hz");
      }
      if (init.num_frames() < 2) {
        throw FormatError("fit needs at least two feature frames");
      }
      const std::size_t need =
          (init.num_frames() - 1) *
          static_cast<std::size_t>(init.config.hop);
      if (target.samples.size() < need) {
        throw FormatError(
            "target WAV has " + std::to_string(target.samples.size()) +
            " samples but the features cover " + std::to_string(need));
      }
      Waveform reference;
      reference.sample_rate = target.sample_rate;
      reference.samples.assign(target.samples.begin(),
                               target.samples.begin() +
                                   static_cast<std::ptrdiff_t>(need));
      const SynthConfig synth_cfg = synth_config_for(
          init, resolve_seed(ft_seed_opt, ft_seed), F0Interp::kHold);
      LossConfig loss_cfg;
      loss_cfg.windows = ft_windows;
      loss_cfg.weights = ft_weights;
      FitConfig fit_cfg;
      fit_cfg.steps = ft_steps;
      fit_cfg.learning_rate = ft_lr;
      fit_cfg.beta1 = ft_beta1;
      fit_cfg.beta2 = ft_beta2;
      const FitResult result =
          fit_features(init, reference, synth_cfg, loss_cfg, fit_cfg);
      write_features(ft_out, result.features);
      if (!ft_history.empty()) {
        std::string csv = "step,loss";
        for (int w : loss_cfg.windows) {
          csv += ",win" + std::to_string(w);
        }
        csv += "\n";
        char buf[64];
        for (const FitStep& s : result.history) {
          csv += std::to_string(s.step);
          std::snprintf(buf, sizeof(buf), ",%.9g", s.loss);
          csv += buf;
          for (double term : s.resolution_terms) {
            std::snprintf(buf, sizeof(buf), ",%.9g", term);
            csv += buf;
          }
          csv += "\n";
        }
        write_text_atomic(ft_history, csv);
      }
      if (result.history.empty()) {
        std::printf("loss: unchanged (0 steps)\n");
      } else {
        std::printf("loss: %.6g -> %.6g (%zu steps)\n",
                    result.history.front().loss, result.history.back().loss,
                    result.history.size());
      }
    } else if (*mix_cmd) {
      const Waveform clean = read_wav(mx_clean);
      const Waveform noise = read_wav(mx_noise);
      if (clean.sample_rate != noise.sample_rate) {
        throw FormatError("clean is " + std::to_string(clean.sample_rate) +
                          " Hz but noise is " +
                          std::to_string(noise.sample_rate) + " Hz");
      }
      if (noise.samples.size() < clean.samples.size()) {
        throw FormatError("noise file is shorter than the clean file (" +
                          std::to_string(noise.samples.size()) + " < " +
                          std::to_string(clean.samples.size()) + " samples)");
      }
      if (clean.samples.empty()) {
        throw FormatError("clean file " + mx_clean + " is empty");
      }
      const Waveform out = mix_at_snr(clean, noise, mx_snr);
      write_wav(mx_out, out,
                mx_pcm16 ? WavEncoding::kPcm16 : WavEncoding::kFloat32);
      std::printf("measured_snr_db: %s\n",
                  format_db(measured_snr(out, clean)).c_str());
    } else if (*eval_cmd) {
      Waveform ref = read_wav(ev_ref);
      Waveform est = read_wav(ev_est);
      if (ref.sample_rate != est.sample_rate) {
        throw FormatError("reference is " + std::to_string(ref.sample_rate) +
                          " Hz but estimate is " +
                          std::to_string(est.sample_rate) + " Hz");
      }
      const std::size_t n =
          std::min(ref.samples.size(), est.samples.size());
      if (ref.samples.size() != est.samples.size()) {
        std::fprintf(stderr, "note: lengths differ, comparing the first %zu "
                             "samples\n", n);
        ref.samples.resize(n);
        est.samples.resize(n);
      }
      const FrameConfig cfg = ev_frame.resolve(ref.sample_rate);
      if (num_frames_for(n, cfg) < 7) {
        throw FormatError("signals are too short to evaluate (need at least "
                          "7 frames)");
      }
      const double mcd = mcd_dtw(est, ref, cfg);
      const double ssim = spectrogram_ssim(est, ref, cfg);
      const double snr = measured_snr(est, ref);
      std::printf("mcd_db: %.2f\n", mcd);
      std::printf("ssim: %.3f\n", ssim);
      std::printf("snr_db: %s\n", format_db(snr).c_str());
      if (!ev_csv.empty()) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "mcd_db,ssim,snr_db\n%.6f,%.6f,%s\n",
                      mcd, ssim,
                      std::isinf(snr) ? (snr > 0 ? "inf" : "-inf")
                                      : std::to_string(snr).c_str());
        write_text_atomic(ev_csv, buf);
      }
    } else if (*bench_cmd) {
      if (bn_iters < 1) {
        throw FormatError("--iters must be at least 1");
      }
      const AcousticFeatures features = read_features(bn_feat);
      if (features.num_frames() < 2) {
        throw FormatError("bench needs at least two feature frames");
      }
      const SynthConfig cfg = synth_config_for(
          features, resolve_seed(bn_seed_opt, bn_seed), F0Interp::kHold);
      const MelFilterbank fb80 = make_envelope_bank(cfg.frame);
      const MelFilterbank fb12 = make_periodicity_bank(cfg.frame);
      const FrameFilters filters = make_frame_filters(features, fb80, fb12);
      const double audio_seconds =
          static_cast<double>((features.num_frames() - 1) * cfg.frame.hop) /
          cfg.frame.sample_rate;
      std::vector<double> rtfs;
      std::vector<double> frame_ms;
      double sink = 0.0;
      for (int iter = 0; iter < bn_iters; ++iter) {
        StreamingSynthesizer stream(cfg);
        std::vector<double> push_ms;
        push_ms.reserve(features.num_frames());
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t t = 0; t < features.num_frames(); ++t) {
          const auto p0 = std::chrono::steady_clock::now();
          const auto chunk =
              stream.push(features.f0[t], filters.periodic_mag.row(t),
                          filters.aperiodic_mag.row(t));
          const auto p1 = std::chrono::steady_clock::now();
          push_ms.push_back(
              std::chrono::duration<double, std::milli>(p1 - p0).count());
          for (double s : chunk) sink += s;
        }
        for (double s : stream.flush()) sink += s;
        const auto t1 = std::chrono::steady_clock::now();
        const double wall = std::chrono::duration<double>(t1 - t0).count();
        rtfs.push_back(wall / audio_seconds);
        frame_ms.push_back(median(push_ms));
      }
      std::printf("audio_seconds: %.2f\n", audio_seconds);
      std::printf("rtf: %.4f\n", median(rtfs));
      std::printf("frame_latency_ms_p50: %.4f\n", median(frame_ms));
      std::printf("checksum: %.6g\n", sink);
    }
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFormat;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
