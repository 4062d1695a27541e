// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_LOSS_HPP_
#define DDSPVOC_LOSS_HPP_

#include <optional>
#include <vector>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/types.hpp"

namespace ddspvoc {

// Shape of the adversarial generator term. kLeastSquares penalizes
// (score - 1)^2 per band; kLinear keeps the raw (score - 1), which can go
// negative for scores below one.
enum class AdvForm { kLeastSquares, kLinear };

struct LossConfig {
  // Multi-resolution spectral comparison: window sizes, their weights, and
  // the shared hop (8 ms at 16 kHz).
  std::vector<int> windows = {512, 1024, 2048};
  std::vector<double> weights = {25.7, 51.3, 102.5};
  int loss_hop = 128;

  // Scale factors for the F0 and periodicity regression terms.
  double alpha = 1.0;
  double beta = 1.0;

  AdvForm adv_form = AdvForm::kLeastSquares;
  int num_bands = 16;  // sub-band discriminator count

  void validate() const;
};

// log(max(|STFT|, kLogFloor)) frames at the given analysis window; the
// window doubles as the FFT size, so it must be a power of two >= 2.
Matrix log_mag(const Waveform& wave, int window, int loss_hop);

// Weighted sum over resolutions of |F_est - F_ref|_1 / |F_est|_1 where F
// is the log-magnitude spectrogram. The normalizer is the estimate's own
// norm, so the loss is deliberately asymmetric in its arguments.
double mrs_loss(const Waveform& estimate, const Waveform& reference,
                const LossConfig& cfg);

// Per-resolution terms of mrs_loss, in configuration order.
std::vector<double> mrs_resolution_terms(const Waveform& estimate,
                                         const Waveform& reference,
                                         const LossConfig& cfg);

// Mean of squared element differences.
double feature_mse(const Matrix& a, const Matrix& b);
double feature_mse(std::span<const double> a, std::span<const double> b);

// Contiguous partition of `n_bins` bins into K bands; the first
// n_bins mod K bands are one bin larger.
struct BandPartition {
  std::vector<int> starts;
  std::vector<int> sizes;
  int total_bins = 0;
  int num_bands() const { return static_cast<int>(sizes.size()); }
};
BandPartition make_band_partition(int n_bins, int num_bands);

// One score per sub-band discriminator.
struct DiscriminatorScores {
  std::vector<double> scores;
};

// Generator-side adversarial term: sum over bands of the per-band penalty
// divided by that band's bin count.
double adv_generator_loss(const DiscriminatorScores& scores,
                          const BandPartition& partition, const LossConfig& cfg);

struct GeneratorLossBreakdown {
  double f0_term = 0.0;          // alpha * mse(F0)
  double periodicity_term = 0.0; // beta * mse(periodicity)
  double mrs_term = 0.0;
  double adv_term = 0.0;
  double total = 0.0;
};

// Full generator objective. The adversarial term is included only when
// scores are supplied; the band partition is derived from the waveform's
// bin count and cfg.num_bands.
GeneratorLossBreakdown generator_loss(const AcousticFeatures& estimate,
                                      const AcousticFeatures& reference,
                                      const Waveform& s_hat, const Waveform& s,
                                      const std::optional<DiscriminatorScores>& scores,
                                      const LossConfig& cfg);

}  // namespace ddspvoc

#endif  // DDSPVOC_LOSS_HPP_
