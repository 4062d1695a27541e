// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/vocoder.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "ddspvoc/fft.hpp"

namespace ddspvoc {
namespace {

// Pulse positions for one hop segment starting at seg_start, advancing the
// shared phase accumulator. Unvoiced segments (f_start <= 0) leave the
// phase untouched. Both impulse_train and the streaming engine go through
// this function so their event sequences cannot drift apart.
std::vector<long long> pulse_positions(double f_start, double f_end,
                                       F0Interp interp, const FrameConfig& frame,
                                       long long seg_start, double* phase) {
  std::vector<long long> positions;
  if (f_start <= 0.0) return positions;
  const double f_last = f_end > 0.0 ? f_end : f_start;
  for (int i = 0; i < frame.hop; ++i) {
    double f = f_start;
    if (interp == F0Interp::kLinear) {
      f = f_start + (f_last - f_start) * (static_cast<double>(i) / frame.hop);
    }
    *phase += f / frame.sample_rate;
    if (*phase >= 1.0) {
      *phase -= 1.0;
      positions.push_back(seg_start + i);
    }
  }
  return positions;
}

// One Box-Muller pair from 53-bit uniforms; u1 is kept strictly positive
// so the log never sees zero. Hand-rolled because std::normal_distribution
// is not bit-reproducible across standard libraries.
std::pair<double, double> gauss_pair(std::mt19937_64& gen) {
  const double u1 = (static_cast<double>(gen() >> 11) + 1.0) * 0x1p-53;
  const double u2 = static_cast<double>(gen() >> 11) * 0x1p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

std::vector<std::complex<double>> as_complex(std::span<const double> mag) {
  std::vector<std::complex<double>> out(mag.size());
  for (std::size_t i = 0; i < mag.size(); ++i) out[i] = mag[i];
  return out;
}

void check_row(std::span<const double> row, std::size_t bins, const char* name) {
  if (row.size() != bins) {
    throw std::invalid_argument(std::string("StreamingSynthesizer: ") + name +
                                " row must have fft_size/2 + 1 entries");
  }
  for (double v : row) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument(std::string("StreamingSynthesizer: ") + name +
                                  " magnitudes must be finite and >= 0");
    }
  }
}

}  // namespace

void SynthConfig::validate() const {
  frame.validate();
  if (frame.fft_size != 2 * frame.hop) {
    throw std::invalid_argument(
        "SynthConfig: fft_size must equal 2*hop (zero-phase responses span "
        "one hop per side and the grain window needs half overlap)");
  }
}

Matrix linear_envelope(const AcousticFeatures& features,
                       const MelFilterbank& fb80) {
  const std::size_t t = features.num_frames();
  Matrix mel(t, features.envelope_logmel.cols());
  for (std::size_t i = 0; i < mel.size(); ++i) {
    mel.data()[i] = std::exp(features.envelope_logmel.data()[i]);
  }
  return mel_to_linear(mel, fb80);
}

Matrix upsample_periodicity(const Matrix& periodicity, const MelFilterbank& fb12,
                            int num_bins) {
  if (fb12.num_bins() != num_bins) {
    throw std::invalid_argument(
        "upsample_periodicity: filterbank bin count mismatch");
  }
  if (periodicity.cols() != static_cast<std::size_t>(fb12.num_bands())) {
    throw std::invalid_argument(
        "upsample_periodicity: band count does not match the filterbank");
  }
  const Matrix& w = fb12.weights();
  std::vector<double> colsum(num_bins, 0.0);
  for (std::size_t b = 0; b < w.rows(); ++b) {
    for (int k = 0; k < num_bins; ++k) colsum[k] += w(b, k);
  }
  Matrix out(periodicity.rows(), num_bins, 0.0);
  for (std::size_t t = 0; t < periodicity.rows(); ++t) {
    for (std::size_t b = 0; b < w.rows(); ++b) {
      const double p = periodicity(t, b);
      for (int k = 0; k < num_bins; ++k) {
        out(t, k) += w(b, k) * p;
      }
    }
    for (int k = 0; k < num_bins; ++k) out(t, k) /= colsum[k];
  }
  return out;
}

FrameFilters make_frame_filters(const AcousticFeatures& features,
                                const MelFilterbank& fb80,
                                const MelFilterbank& fb12) {
  features.validate();
  const Matrix envelope = linear_envelope(features, fb80);
  const Matrix up = upsample_periodicity(features.periodicity, fb12,
                                         fb80.num_bins());
  FrameFilters filters;
  filters.periodic_mag = Matrix(envelope.rows(), envelope.cols());
  filters.aperiodic_mag = Matrix(envelope.rows(), envelope.cols());
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    const double e = envelope.data()[i];
    const double p = up.data()[i];
    filters.periodic_mag.data()[i] = e * p;
    filters.aperiodic_mag.data()[i] = e * (1.0 - p);
  }
  return filters;
}

std::vector<double> noise_grain_window(int fft_size) {
  if (fft_size < 2) {
    throw std::invalid_argument("noise_grain_window: fft_size must be >= 2");
  }
  std::vector<double> w(fft_size);
  for (int j = 0; j < fft_size; ++j) {
    w[j] = std::sin(std::numbers::pi * j / fft_size);
  }
  return w;
}

std::vector<ImpulseEvent> impulse_train(std::span<const double> f0,
                                        const SynthConfig& cfg) {
  cfg.validate();
  std::vector<ImpulseEvent> events;
  double phase = 0.0;
  for (std::size_t t = 0; t < f0.size(); ++t) {
    const double f_end =
        (t + 1 < f0.size() && f0[t + 1] > 0.0) ? f0[t + 1] : f0[t];
    const auto positions =
        pulse_positions(f0[t], f_end, cfg.f0_interp, cfg.frame,
                        static_cast<long long>(t) * cfg.frame.hop, &phase);
    if (positions.empty()) continue;
    const double amp =
        std::sqrt(static_cast<double>(cfg.frame.hop) / positions.size());
    for (long long m : positions) events.push_back({m, amp, t});
  }
  return events;
}

StreamingSynthesizer::StreamingSynthesizer(const SynthConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  latency_ = cfg_.f0_interp == F0Interp::kLinear ? 2 : 1;
  half_ = cfg_.frame.fft_size / 2;
  grain_window_ = noise_grain_window(cfg_.frame.fft_size);
  rng_.seed(cfg_.noise_seed);
  base_ = -static_cast<long long>(latency_) * cfg_.frame.hop;
}

void StreamingSynthesizer::record_to(SynthTrace* trace) {
  if (frames_pushed_ != 0) {
    throw std::invalid_argument(
        "StreamingSynthesizer: record_to must precede the first push");
  }
  trace_ = trace;
  if (trace_ != nullptr) {
    trace_->impulses.clear();
    trace_->noise_spectra.clear();
    trace_->num_frames = 0;
    trace_->num_bins = static_cast<std::size_t>(cfg_.frame.num_bins());
  }
}

void StreamingSynthesizer::scatter_kernel(long long center, double amplitude,
                                          std::span<const double> taps,
                                          std::vector<double>* buf) {
  const int fft = cfg_.frame.fft_size;
  const long long hi = center + half_;
  if (hi - base_ > static_cast<long long>(buf->size())) {
    periodic_buf_.resize(static_cast<std::size_t>(hi - base_), 0.0);
    noise_buf_.resize(static_cast<std::size_t>(hi - base_), 0.0);
  }
  for (int j = 0; j < fft; ++j) {
    const int offset = j < half_ ? j : j - fft;
    const long long idx = center + offset - base_;
    assert(idx >= 0);
    (*buf)[static_cast<std::size_t>(idx)] += amplitude * taps[j];
  }
}

void StreamingSynthesizer::generate_pulses(std::size_t segment, double f_start,
                                           double f_end,
                                           std::span<const double> periodic_mag) {
  const auto positions = pulse_positions(
      f_start, f_end, cfg_.f0_interp, cfg_.frame,
      static_cast<long long>(segment) * cfg_.frame.hop, &phase_);
  if (positions.empty()) return;
  const double amp =
      std::sqrt(static_cast<double>(cfg_.frame.hop) / positions.size());
  const auto taps = irfft(as_complex(periodic_mag), cfg_.frame.fft_size);
  for (long long m : positions) {
    scatter_kernel(m, amp, taps, &periodic_buf_);
    if (trace_ != nullptr) trace_->impulses.push_back({m, amp, segment});
  }
}

void StreamingSynthesizer::place_grain(std::size_t frame,
                                       std::span<const double> aperiodic_mag) {
  const int fft = cfg_.frame.fft_size;
  const std::size_t bins = aperiodic_mag.size();
  // Fixed draw budget per frame (fft/2 Box-Muller pairs) keeps the stream
  // reproducible no matter which frames are voiced.
  std::vector<double> z(fft);
  for (int p = 0; p < fft / 2; ++p) {
    const auto [a, b] = gauss_pair(rng_);
    z[2 * p] = a;
    z[2 * p + 1] = b;
  }
  std::vector<std::complex<double>> spectrum(bins);
  const double edge_sigma = std::sqrt(static_cast<double>(fft));
  const double mid_sigma = std::sqrt(fft / 2.0);
  spectrum[0] = edge_sigma * z[0];
  for (std::size_t k = 1; k + 1 < bins; ++k) {
    spectrum[k] = std::complex<double>(z[2 * k - 1], z[2 * k]) * mid_sigma;
  }
  spectrum[bins - 1] = edge_sigma * z[fft - 1];
  if (trace_ != nullptr) {
    trace_->noise_spectra.insert(trace_->noise_spectra.end(), spectrum.begin(),
                                 spectrum.end());
    trace_->num_frames = frame + 1;
  }
  for (std::size_t k = 0; k < bins; ++k) spectrum[k] *= aperiodic_mag[k];
  const auto grain = irfft(spectrum, fft);
  const long long start =
      static_cast<long long>(frame) * cfg_.frame.hop - half_;
  const long long hi = start + fft;
  if (hi - base_ > static_cast<long long>(noise_buf_.size())) {
    periodic_buf_.resize(static_cast<std::size_t>(hi - base_), 0.0);
    noise_buf_.resize(static_cast<std::size_t>(hi - base_), 0.0);
  }
  for (int j = 0; j < fft; ++j) {
    const long long idx = start + j - base_;
    assert(idx >= 0);
    noise_buf_[static_cast<std::size_t>(idx)] += grain_window_[j] * grain[j];
  }
}

StreamingSynthesizer::Chunk StreamingSynthesizer::emit_hops(int hops) {
  const std::size_t n = static_cast<std::size_t>(hops) * cfg_.frame.hop;
  if (periodic_buf_.size() < n) {
    periodic_buf_.resize(n, 0.0);
    noise_buf_.resize(n, 0.0);
  }
  Chunk chunk;
  chunk.periodic.assign(periodic_buf_.begin(), periodic_buf_.begin() + n);
  chunk.aperiodic.assign(noise_buf_.begin(), noise_buf_.begin() + n);
  chunk.mix.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    chunk.mix[i] = chunk.periodic[i] + chunk.aperiodic[i];
  }
  periodic_buf_.erase(periodic_buf_.begin(), periodic_buf_.begin() + n);
  noise_buf_.erase(noise_buf_.begin(), noise_buf_.begin() + n);
  base_ += static_cast<long long>(n);
  return chunk;
}

StreamingSynthesizer::Chunk StreamingSynthesizer::push_parts(
    double f0, std::span<const double> periodic_mag,
    std::span<const double> aperiodic_mag) {
  if (flushed_) {
    throw std::invalid_argument("StreamingSynthesizer: push after flush");
  }
  const std::size_t bins = static_cast<std::size_t>(cfg_.frame.num_bins());
  check_row(periodic_mag, bins, "periodic");
  check_row(aperiodic_mag, bins, "aperiodic");
  if (!std::isfinite(f0) || f0 < 0.0) {
    throw std::invalid_argument(
        "StreamingSynthesizer: f0 must be finite and >= 0");
  }
  const std::size_t t = frames_pushed_++;
  if (cfg_.f0_interp == F0Interp::kHold) {
    generate_pulses(t, f0, f0, periodic_mag);
  } else if (t >= 1) {
    generate_pulses(t - 1, prev_f0_, f0, prev_periodic_mag_);
  }
  if (cfg_.f0_interp == F0Interp::kLinear) {
    prev_f0_ = f0;
    prev_periodic_mag_.assign(periodic_mag.begin(), periodic_mag.end());
  }
  place_grain(t, aperiodic_mag);
  return emit_hops(1);
}

std::vector<double> StreamingSynthesizer::push(
    double f0, std::span<const double> periodic_mag,
    std::span<const double> aperiodic_mag) {
  return push_parts(f0, periodic_mag, aperiodic_mag).mix;
}

StreamingSynthesizer::Chunk StreamingSynthesizer::flush_parts() {
  if (flushed_ || frames_pushed_ == 0) {
    flushed_ = true;
    return Chunk{};
  }
  flushed_ = true;
  if (cfg_.f0_interp == F0Interp::kLinear) {
    // No lookahead frame exists for the last segment; hold its F0.
    generate_pulses(frames_pushed_ - 1, prev_f0_, prev_f0_, prev_periodic_mag_);
  }
  return emit_hops(latency_);
}

std::vector<double> StreamingSynthesizer::flush() { return flush_parts().mix; }

SynthResult synthesize_filters(std::span<const double> f0,
                               const FrameFilters& filters,
                               const SynthConfig& cfg, SynthTrace* trace) {
  cfg.validate();
  const std::size_t t_frames = f0.size();
  const std::size_t bins = static_cast<std::size_t>(cfg.frame.num_bins());
  if (filters.periodic_mag.rows() != t_frames ||
      filters.aperiodic_mag.rows() != t_frames) {
    throw std::invalid_argument(
        "synthesize_filters: filter frame count does not match F0 track");
  }
  if (t_frames > 0 && (filters.periodic_mag.cols() != bins ||
                       filters.aperiodic_mag.cols() != bins)) {
    throw std::invalid_argument(
        "synthesize_filters: filters must have fft_size/2 + 1 bins");
  }

  StreamingSynthesizer stream(cfg);
  if (trace != nullptr) stream.record_to(trace);
  const int latency = stream.latency_hops();
  const std::size_t hop = static_cast<std::size_t>(cfg.frame.hop);
  std::vector<double> mix, periodic, aperiodic;
  mix.reserve((t_frames + latency) * hop);
  periodic.reserve((t_frames + latency) * hop);
  aperiodic.reserve((t_frames + latency) * hop);
  auto append = [&](const StreamingSynthesizer::Chunk& c) {
    mix.insert(mix.end(), c.mix.begin(), c.mix.end());
    periodic.insert(periodic.end(), c.periodic.begin(), c.periodic.end());
    aperiodic.insert(aperiodic.end(), c.aperiodic.begin(), c.aperiodic.end());
  };
  for (std::size_t t = 0; t < t_frames; ++t) {
    append(stream.push_parts(f0[t], filters.periodic_mag.row(t),
                             filters.aperiodic_mag.row(t)));
  }
  append(stream.flush_parts());

  // Drop the warm-up hops preceding sample zero, keep (T - 1) whole hops.
  const std::size_t start = static_cast<std::size_t>(latency) * hop;
  const std::size_t n_out = t_frames > 0 ? (t_frames - 1) * hop : 0;
  SynthResult result;
  auto slice = [&](const std::vector<double>& full) {
    Waveform w;
    w.sample_rate = cfg.frame.sample_rate;
    w.samples.assign(full.begin() + start, full.begin() + start + n_out);
    return w;
  };
  result.mix = slice(mix);
  result.periodic = slice(periodic);
  result.aperiodic = slice(aperiodic);
  return result;
}

SynthResult synthesize_parts(const AcousticFeatures& features,
                             const SynthConfig& cfg) {
  cfg.validate();
  features.validate();
  if (features.config.sample_rate != cfg.frame.sample_rate ||
      features.config.hop != cfg.frame.hop) {
    throw std::invalid_argument(
        "synthesize_parts: feature sample_rate/hop disagree with the synth "
        "config");
  }
  const MelFilterbank fb80 = make_envelope_bank(cfg.frame);
  const MelFilterbank fb12 = make_periodicity_bank(cfg.frame);
  const FrameFilters filters = make_frame_filters(features, fb80, fb12);
  return synthesize_filters(features.f0, filters, cfg, nullptr);
}

Waveform synthesize(const AcousticFeatures& features, const SynthConfig& cfg) {
  return synthesize_parts(features, cfg).mix;
}

}  // namespace ddspvoc
