// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "ddspvoc/fft.hpp"

namespace ddspvoc {

namespace {

// Absolute dip threshold for the normalized difference function; the first
// local minimum below it wins over the global minimum, which suppresses
// octave-down errors on strongly periodic input.
constexpr double kDipThreshold = 0.15;
constexpr double kAnalysisWindowSeconds = 0.032;

std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n) - 2;
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct LagRange {
  int window;   // correlation window in samples (32 ms)
  int lag_min;  // floor(sample_rate / f0_max)
  int lag_max;  // ceil(sample_rate / f0_min)
};

LagRange lag_range(const FrameConfig& cfg, const F0Config& f0cfg) {
  LagRange r;
  r.window = static_cast<int>(std::lround(kAnalysisWindowSeconds * cfg.sample_rate));
  r.lag_min = std::max(2, static_cast<int>(cfg.sample_rate / f0cfg.f0_max));
  r.lag_max = static_cast<int>(std::ceil(cfg.sample_rate / f0cfg.f0_min));
  return r;
}

// Copies the analysis segment for frame t: `length` samples starting half a
// correlation window before the frame center, reflect-padded at the edges.
void fill_segment(const Waveform& wave, long long center, int window,
                  int length, std::vector<double>* seg) {
  seg->resize(length);
  const long long start = center - window / 2;
  for (int i = 0; i < length; ++i) {
    (*seg)[i] = wave.samples[reflect_index(start + i, wave.samples.size())];
  }
}

}  // namespace

void F0Config::validate(int sample_rate) const {
  if (f0_min <= 0.0 || f0_max <= f0_min) {
    throw std::invalid_argument("F0Config: need 0 < f0_min < f0_max");
  }
  if (f0_max >= sample_rate / 2.0) {
    throw std::invalid_argument("F0Config: f0_max must stay below Nyquist");
  }
  if (voicing_threshold < 0.0 || voicing_threshold > 1.0) {
    throw std::invalid_argument("F0Config: voicing_threshold must be in [0, 1]");
  }
}

void AcousticFeatures::validate() const {
  const std::size_t t = f0.size();
  if (periodicity.rows() != t || envelope_logmel.rows() != t) {
    throw std::invalid_argument("AcousticFeatures: frame counts disagree");
  }
  if (periodicity.cols() != kPeriodicityBands ||
      envelope_logmel.cols() != kEnvelopeBands) {
    throw std::invalid_argument("AcousticFeatures: unexpected band counts");
  }
  for (double v : f0) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("AcousticFeatures: F0 must be finite and >= 0");
    }
  }
  for (std::size_t i = 0; i < periodicity.size(); ++i) {
    const double v = periodicity.data()[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument("AcousticFeatures: periodicity outside [0, 1]");
    }
  }
  for (std::size_t i = 0; i < envelope_logmel.size(); ++i) {
    if (!std::isfinite(envelope_logmel.data()[i])) {
      throw std::invalid_argument("AcousticFeatures: non-finite envelope value");
    }
  }
}

F0Track extract_f0(const Waveform& wave, const FrameConfig& cfg,
                   const F0Config& f0cfg) {
  cfg.validate();
  wave.validate();
  f0cfg.validate(cfg.sample_rate);
  if (wave.samples.empty()) {
    throw std::invalid_argument("extract_f0: empty waveform");
  }

  const LagRange lr = lag_range(cfg, f0cfg);
  const std::size_t num_frames = num_frames_for(wave.samples.size(), cfg);
  F0Track track;
  track.f0.assign(num_frames, 0.0);
  track.confidence.assign(num_frames, 0.0);

  std::vector<double> seg;
  std::vector<double> diff(lr.lag_max + 1);
  std::vector<double> norm(lr.lag_max + 1);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const long long center = static_cast<long long>(t) * cfg.hop;
    fill_segment(wave, center, lr.window, lr.window + lr.lag_max, &seg);

    // Difference function and its cumulative mean normalization.
    diff[0] = 0.0;
    norm[0] = 1.0;
    double running = 0.0;
    for (int lag = 1; lag <= lr.lag_max; ++lag) {
      double d = 0.0;
      for (int n = 0; n < lr.window; ++n) {
        const double delta = seg[n] - seg[n + lag];
        d += delta * delta;
      }
      diff[lag] = d;
      running += d;
      norm[lag] = running > 0.0 ? d * lag / running : 1.0;
    }

    // First clear dip wins; otherwise fall back to the global minimum.
    int best = -1;
    for (int lag = lr.lag_min; lag <= lr.lag_max; ++lag) {
      const double left = norm[lag - 1];
      const double right = lag < lr.lag_max ? norm[lag + 1] : norm[lag];
      if (norm[lag] < kDipThreshold && norm[lag] <= left && norm[lag] <= right) {
        best = lag;
        break;
      }
    }
    if (best < 0) {
      best = lr.lag_min;
      for (int lag = lr.lag_min + 1; lag <= lr.lag_max; ++lag) {
        if (norm[lag] < norm[best]) best = lag;
      }
    }

    // Parabolic refinement of the dip position and value.
    double offset = 0.0;
    double value = norm[best];
    if (best > 1 && best < lr.lag_max) {
      const double a = norm[best - 1], b = norm[best], c = norm[best + 1];
      const double denom = a - 2.0 * b + c;
      if (std::abs(denom) > 1e-30) {
        offset = std::clamp(0.5 * (a - c) / denom, -1.0, 1.0);
        value = b - 0.25 * (a - c) * offset;
      }
    }

    const double confidence = std::clamp(1.0 - value, 0.0, 1.0);
    track.confidence[t] = confidence;
    if (confidence >= f0cfg.voicing_threshold) {
      const double lag = best + offset;
      track.f0[t] =
          std::clamp(cfg.sample_rate / lag, f0cfg.f0_min, f0cfg.f0_max);
    }
  }
  return track;
}

Matrix extract_periodicity(const Waveform& wave, std::span<const double> f0,
                           const FrameConfig& cfg, const MelFilterbank& fb12) {
  cfg.validate();
  wave.validate();
  if (wave.samples.empty()) {
    throw std::invalid_argument("extract_periodicity: empty waveform");
  }
  const std::size_t num_frames = num_frames_for(wave.samples.size(), cfg);
  if (f0.size() != num_frames) {
    throw std::invalid_argument("extract_periodicity: F0 track length mismatch");
  }
  const int bands = fb12.num_bands();

  const F0Config default_f0cfg;
  const LagRange lr = lag_range(cfg, default_f0cfg);
  const int seg_len = next_pow2(lr.window + lr.lag_max + 2);
  const Fft plan(seg_len);
  const double bin_hz = static_cast<double>(cfg.sample_rate) / seg_len;

  Matrix out(num_frames, bands, 0.0);
  std::vector<double> seg;
  std::vector<std::complex<double>> spectrum(seg_len);
  std::vector<std::complex<double>> banded(seg_len);
  std::vector<double> y(seg_len);
  for (std::size_t t = 0; t < num_frames; ++t) {
    if (f0[t] <= 0.0) continue;  // unvoiced rows stay zero
    const double lag = cfg.sample_rate / f0[t];
    const int lag_lo = static_cast<int>(lag);
    const double frac = lag - lag_lo;
    if (lag_lo + 1 + lr.window >= seg_len) continue;  // out of tracker range

    const long long center = static_cast<long long>(t) * cfg.hop;
    fill_segment(wave, center, lr.window, seg_len, &seg);
    for (int i = 0; i < seg_len; ++i) spectrum[i] = seg[i];
    plan.transform(spectrum, false);

    for (int b = 0; b < bands; ++b) {
      const double lo = fb12.lower_edge_hz(b);
      const double hi = fb12.upper_edge_hz(b);
      for (int k = 0; k < seg_len; ++k) {
        const double f = std::min(k, seg_len - k) * bin_hz;
        banded[k] = (f > lo && f <= hi) ? spectrum[k] : 0.0;
      }
      plan.transform(banded, true);
      for (int i = 0; i < seg_len; ++i) y[i] = banded[i].real();

      // Normalized autocorrelation at the two bracketing integer lags.
      double r[2] = {0.0, 0.0};
      for (int step = 0; step < 2; ++step) {
        const int l = lag_lo + step;
        double cross = 0.0, e0 = 0.0, el = 0.0;
        for (int n = 0; n < lr.window; ++n) {
          cross += y[n] * y[n + l];
          e0 += y[n] * y[n];
          el += y[n + l] * y[n + l];
        }
        const double denom = std::sqrt(e0 * el);
        r[step] = denom > 0.0 ? cross / denom : 0.0;
      }
      out(t, b) = std::clamp((1.0 - frac) * r[0] + frac * r[1], 0.0, 1.0);
    }
  }
  return out;
}

Matrix extract_envelope(const Waveform& wave, const FrameConfig& cfg,
                        const MelFilterbank& fb80) {
  const Matrix mel = mel_project(magnitude(stft(wave, cfg)), fb80);
  Matrix out(mel.rows(), mel.cols());
  for (std::size_t i = 0; i < mel.size(); ++i) {
    out.data()[i] = std::log(std::max(mel.data()[i], kLogFloor));
  }
  return out;
}

AcousticFeatures analyze(const Waveform& wave, const FrameConfig& cfg,
                         const F0Config& f0cfg, const MelFilterbank& fb80,
                         const MelFilterbank& fb12) {
  AcousticFeatures features;
  features.config = cfg;
  features.f0 = extract_f0(wave, cfg, f0cfg).f0;
  features.periodicity = extract_periodicity(wave, features.f0, cfg, fb12);
  features.envelope_logmel = extract_envelope(wave, cfg, fb80);
  features.validate();
  return features;
}

MelFilterbank make_envelope_bank(const FrameConfig& cfg) {
  return make_mel_filterbank(cfg, kEnvelopeBands, 0.0, cfg.sample_rate / 2.0);
}

MelFilterbank make_periodicity_bank(const FrameConfig& cfg) {
  return make_mel_filterbank(cfg, kPeriodicityBands, 0.0, cfg.sample_rate / 2.0);
}

AcousticFeatures analyze(const Waveform& wave, const FrameConfig& cfg,
                         const F0Config& f0cfg) {
  return analyze(wave, cfg, f0cfg, make_envelope_bank(cfg),
                 make_periodicity_bank(cfg));
}

}  // namespace ddspvoc
