// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "ddspvoc/errors.hpp"
#include "ddspvoc/signal.hpp"

namespace ddspvoc {

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace

void LossConfig::validate() const {
  if (windows.empty() || windows.size() != weights.size()) {
    throw std::invalid_argument(
        "LossConfig: windows and weights must be non-empty and equal-sized");
  }
  for (int w : windows) {
    if (w < 2 || !is_pow2(w)) {
      throw std::invalid_argument("LossConfig: windows must be powers of two >= 2");
    }
  }
  for (double v : weights) {
    if (!(v > 0.0)) {
      throw std::invalid_argument("LossConfig: weights must be positive");
    }
  }
  if (loss_hop < 1) {
    throw std::invalid_argument("LossConfig: loss_hop must be positive");
  }
  if (num_bands < 1) {
    throw std::invalid_argument("LossConfig: num_bands must be positive");
  }
}

Matrix log_mag(const Waveform& wave, int window, int loss_hop) {
  if (window < 2) {
    throw std::invalid_argument("log_mag: window shorter than 2 samples");
  }
  FrameConfig cfg;
  cfg.sample_rate = wave.sample_rate;
  cfg.fft_size = window;
  cfg.window_len = window;
  cfg.hop = loss_hop;
  const MagnitudeSpectrogram mag = magnitude(stft(wave, cfg));
  Matrix out(mag.frames.rows(), mag.frames.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = std::log(std::max(mag.frames.data()[i], kLogFloor));
  }
  return out;
}

std::vector<double> mrs_resolution_terms(const Waveform& estimate,
                                         const Waveform& reference,
                                         const LossConfig& cfg) {
  cfg.validate();
  if (estimate.samples.size() != reference.samples.size() ||
      estimate.sample_rate != reference.sample_rate) {
    throw std::invalid_argument("mrs_loss: waveforms must match in length and rate");
  }
  std::vector<double> terms(cfg.windows.size(), 0.0);
  for (std::size_t i = 0; i < cfg.windows.size(); ++i) {
    const Matrix fe = log_mag(estimate, cfg.windows[i], cfg.loss_hop);
    const Matrix fr = log_mag(reference, cfg.windows[i], cfg.loss_hop);
    double diff_l1 = 0.0;
    double est_l1 = 0.0;
    for (std::size_t j = 0; j < fe.size(); ++j) {
      diff_l1 += std::abs(fe.data()[j] - fr.data()[j]);
      est_l1 += std::abs(fe.data()[j]);
    }
    if (!(est_l1 > 0.0)) {
      throw NumericError("mrs_loss: vanishing normalizer at window " +
                         std::to_string(cfg.windows[i]));
    }
    terms[i] = cfg.weights[i] * diff_l1 / est_l1;
  }
  return terms;
}

double mrs_loss(const Waveform& estimate, const Waveform& reference,
                const LossConfig& cfg) {
  double total = 0.0;
  for (double t : mrs_resolution_terms(estimate, reference, cfg)) total += t;
  return total;
}

double feature_mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("feature_mse: size mismatch");
  }
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double feature_mse(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("feature_mse: shape mismatch");
  }
  return feature_mse(std::span<const double>(a.data(), a.size()),
                     std::span<const double>(b.data(), b.size()));
}

BandPartition make_band_partition(int n_bins, int num_bands) {
  if (n_bins < 1 || num_bands < 1 || num_bands > n_bins) {
    throw std::invalid_argument("make_band_partition: need 1 <= bands <= bins");
  }
  BandPartition p;
  p.total_bins = n_bins;
  const int base = n_bins / num_bands;
  const int extra = n_bins % num_bands;
  int start = 0;
  for (int k = 0; k < num_bands; ++k) {
    const int size = base + (k < extra ? 1 : 0);
    p.starts.push_back(start);
    p.sizes.push_back(size);
    start += size;
  }
  return p;
}

double adv_generator_loss(const DiscriminatorScores& scores,
                          const BandPartition& partition, const LossConfig& cfg) {
  if (static_cast<int>(scores.scores.size()) != partition.num_bands()) {
    throw std::invalid_argument(
        "adv_generator_loss: score count does not match partition");
  }
  double total = 0.0;
  for (int k = 0; k < partition.num_bands(); ++k) {
    const double d = scores.scores[k] - 1.0;
    const double penalty = cfg.adv_form == AdvForm::kLeastSquares ? d * d : d;
    total += penalty / partition.sizes[k];
  }
  return total;
}

GeneratorLossBreakdown generator_loss(const AcousticFeatures& estimate,
                                      const AcousticFeatures& reference,
                                      const Waveform& s_hat, const Waveform& s,
                                      const std::optional<DiscriminatorScores>& scores,
                                      const LossConfig& cfg) {
  cfg.validate();
  if (estimate.num_frames() != reference.num_frames()) {
    throw std::invalid_argument("generator_loss: feature frame counts disagree");
  }
  GeneratorLossBreakdown out;
  out.f0_term = cfg.alpha * feature_mse(std::span<const double>(estimate.f0),
                                        std::span<const double>(reference.f0));
  out.periodicity_term =
      cfg.beta * feature_mse(estimate.periodicity, reference.periodicity);
  out.mrs_term = mrs_loss(s_hat, s, cfg);
  if (scores.has_value()) {
    FrameConfig frame_cfg = estimate.config;
    const BandPartition partition =
        make_band_partition(frame_cfg.num_bins(), cfg.num_bands);
    out.adv_term = adv_generator_loss(*scores, partition, cfg);
  }
  out.total = out.f0_term + out.periodicity_term + out.mrs_term + out.adv_term;
  return out;
}

}  // namespace ddspvoc
