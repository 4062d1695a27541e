// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_METRICS_HPP_
#define DDSPVOC_METRICS_HPP_

#include <cstddef>
#include <numbers>
#include <utility>
#include <vector>

#include "ddspvoc/signal.hpp"
#include "ddspvoc/types.hpp"

namespace ddspvoc {

// Mel-cepstral distortion in the common Kubichek form: the per-frame
// Euclidean distance over cepstral coefficients is scaled by
// 10 * sqrt(2) / ln(10) to express it in dB.
inline constexpr double kMcdScale =
    10.0 * std::numbers::sqrt2 / std::numbers::ln10;

// Cepstral coefficients kept per frame (c1..c13; c0 carries only gain and
// is dropped so the distance is loudness-invariant).
inline constexpr int kMccCoeffs = 13;

// Mel-cepstral coefficient sequence: frames x num_coeffs, c0 excluded.
struct MccSequence {
  Matrix frames;
  int sample_rate = 0;
  int hop = 0;
};

// Orthonormal DCT-II of each log-mel envelope frame, keeping coefficients
// 1..num_coeffs. Amplitude scaling of the waveform moves only c0, so the
// result is gain-invariant (up to the log floor).
MccSequence mcc(const Waveform& wave, const FrameConfig& cfg,
                int num_coeffs = kMccCoeffs);

// Monotone alignment path between two sequences: starts at (0, 0), ends at
// (rows-1, cols-1), steps are (1,0), (0,1) or (1,1).
struct DtwPath {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
  double mean_cost = 0.0;  // total_cost / pairs.size()
};

// Full dynamic-programming alignment over a dense local-cost matrix
// (rows x cols, costs[i][j] = distance between frame i of one sequence and
// frame j of the other). No band constraint. Ties prefer the diagonal.
DtwPath dtw_align(const Matrix& costs);

// Mel-cepstral distortion between two coefficient sequences: DTW over
// per-frame Euclidean distances, then kMcdScale times the path mean.
double mcd_from_mcc(const MccSequence& estimate, const MccSequence& reference);

// mcd_from_mcc over mcc() of both waveforms. Lengths may differ; the
// alignment absorbs offsets.
double mcd_dtw(const Waveform& estimate, const Waveform& reference,
               const FrameConfig& cfg);

// Structural similarity between the two log-mel spectrograms, treated as
// images: both are normalized jointly to [0, 1], then mean SSIM over 7x7
// uniform windows (valid positions only, stabilizers C1 = 0.01^2,
// C2 = 0.03^2). Identical inputs give exactly 1. Requires equal lengths
// and at least 7 frames.
double spectrogram_ssim(const Waveform& estimate, const Waveform& reference,
                        const FrameConfig& cfg);

// clean + g * noise with g chosen so the clean-to-scaled-noise energy ratio
// equals snr_db. Noise must be at least as long as clean and is truncated
// to its length. snr_db >= 100 is treated as infinitely clean and returns
// the clean signal unchanged. Zero-energy inputs raise NumericError.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise,
                    double snr_db);

// 10*log10 of clean energy over residual (mix - clean) energy; +infinity
// when the residual is exactly zero.
double measured_snr(const Waveform& mix, const Waveform& clean);

}  // namespace ddspvoc

#endif  // DDSPVOC_METRICS_HPP_
