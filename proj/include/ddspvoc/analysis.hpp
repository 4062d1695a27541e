// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_ANALYSIS_HPP_
#define DDSPVOC_ANALYSIS_HPP_

#include <span>
#include <vector>

#include "ddspvoc/signal.hpp"
#include "ddspvoc/types.hpp"

namespace ddspvoc {

// Fixed feature geometry: 80 log-mel envelope bands, 12 periodicity bands,
// one F0 value -> 93 values per frame.
inline constexpr int kEnvelopeBands = 80;
inline constexpr int kPeriodicityBands = 12;
inline constexpr int kFeatureDims = kEnvelopeBands + kPeriodicityBands + 1;

// Floor applied inside every log-magnitude computation.
inline constexpr double kLogFloor = 1e-5;

struct F0Config {
  double f0_min = 50.0;
  double f0_max = 500.0;
  // A frame is voiced when the periodicity confidence of the best lag
  // reaches this value; below it F0 is reported as 0.
  double voicing_threshold = 0.5;

  void validate(int sample_rate) const;
};

// Per-frame acoustic description of an utterance: F0 in Hz (0 = unvoiced),
// per-band periodicity in [0, 1], and log-mel spectral envelope.
struct AcousticFeatures {
  std::vector<double> f0;   // T
  Matrix periodicity;       // T x kPeriodicityBands
  Matrix envelope_logmel;   // T x kEnvelopeBands
  FrameConfig config;

  std::size_t num_frames() const { return f0.size(); }

  // Shape and range checks: matching frame counts, fixed band counts,
  // finite envelope, periodicity within [0, 1], non-negative finite F0.
  void validate() const;
};

struct F0Track {
  std::vector<double> f0;          // Hz, 0 when unvoiced
  std::vector<double> confidence;  // [0, 1]
};

// F0 tracking over 32 ms windows centered on each hop: cumulative
// mean-normalized difference function, first dip below an absolute
// threshold, parabolic refinement of the chosen lag.
F0Track extract_f0(const Waveform& wave, const FrameConfig& cfg,
                   const F0Config& f0cfg);

// Per-band periodicity: each frame is band-passed in the frequency domain
// (bins outside the band's triangle support zeroed, DC always dropped) and
// the normalized autocorrelation is read at lag sample_rate/f0, linearly
// interpolated between integer lags and clamped to [0, 1]. Unvoiced frames
// produce zero rows.
Matrix extract_periodicity(const Waveform& wave, std::span<const double> f0,
                           const FrameConfig& cfg, const MelFilterbank& fb12);

// log(max(mel_project(|STFT|), kLogFloor)).
Matrix extract_envelope(const Waveform& wave, const FrameConfig& cfg,
                        const MelFilterbank& fb80);

AcousticFeatures analyze(const Waveform& wave, const FrameConfig& cfg,
                         const F0Config& f0cfg, const MelFilterbank& fb80,
                         const MelFilterbank& fb12);

// Canonical banks for the fixed feature layout: full band (0 Hz to
// Nyquist), kEnvelopeBands and kPeriodicityBands triangles. Analysis and
// synthesis must agree on these, so build them through one place.
MelFilterbank make_envelope_bank(const FrameConfig& cfg);
MelFilterbank make_periodicity_bank(const FrameConfig& cfg);

// analyze() with the canonical banks.
AcousticFeatures analyze(const Waveform& wave, const FrameConfig& cfg,
                         const F0Config& f0cfg = F0Config{});

}  // namespace ddspvoc

#endif  // DDSPVOC_ANALYSIS_HPP_
