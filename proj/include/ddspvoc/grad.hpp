// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_GRAD_HPP_
#define DDSPVOC_GRAD_HPP_

#include <functional>
#include <span>
#include <vector>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/loss.hpp"
#include "ddspvoc/types.hpp"
#include "ddspvoc/vocoder.hpp"

namespace ddspvoc {

// Multi-resolution spectral loss and its gradient with respect to every
// sample of the estimate. The loss value matches mrs_loss bit-for-bit; at
// estimate == reference both the loss and the gradient are exactly zero.
struct WaveformGrad {
  double loss = 0.0;
  std::vector<double> resolution_terms;
  std::vector<double> d_samples;
};

WaveformGrad mrs_waveform_grad(const Waveform& estimate,
                               const Waveform& reference,
                               const LossConfig& cfg);

// Cotangents of the acoustic features. F0 is deliberately absent: pulse
// timing is non-differentiable, so the pitch track is held fixed.
struct FeatureGradients {
  Matrix d_envelope_logmel;  // frames x kEnvelopeBands
  Matrix d_periodicity;      // frames x kPeriodicityBands
};

struct SynthGradResult {
  double loss = 0.0;
  std::vector<double> resolution_terms;
  Waveform estimate;  // forward synthesis output
  FeatureGradients grads;
};

// End-to-end reverse pass: synthesize from the features, compare against
// the reference with the multi-resolution loss, and pull the gradient back
// through both excitation paths onto the log-mel envelope and the band
// periodicity. The reference must be (num_frames - 1) * hop samples long.
// Throws NumericError when the forward pass goes non-finite.
SynthGradResult mrs_grad(const AcousticFeatures& features,
                         const Waveform& reference,
                         const SynthConfig& synth_cfg,
                         const LossConfig& loss_cfg);

// Central-difference probe of an analytic gradient: perturbs `probes`
// randomly chosen coordinates of x by +-step and returns the worst
// relative error |analytic - numeric| / max(|analytic|, |numeric|, scale)
// seen, with scale = 1e-8. f must be a pure function of its argument.
double finite_diff_check(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> analytic_grad,
    int probes, double step, unsigned seed);

struct FitConfig {
  int steps = 50;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct FitStep {
  int step = 0;     // 1-based
  double loss = 0.0;  // loss at the parameters before this step's update
  std::vector<double> resolution_terms;
};

struct FitResult {
  AcousticFeatures features;
  std::vector<FitStep> history;
};

// First-order moment-estimate descent on the envelope and periodicity (F0
// stays fixed): per-coordinate running mean and variance of the gradient
// with bias correction, periodicity clamped into [0, 1] after every step.
// Throws NumericError naming the step when the loss turns non-finite.
FitResult fit_features(const AcousticFeatures& init, const Waveform& reference,
                       const SynthConfig& synth_cfg, const LossConfig& loss_cfg,
                       const FitConfig& fit_cfg);

}  // namespace ddspvoc

#endif  // DDSPVOC_GRAD_HPP_
