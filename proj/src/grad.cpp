// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/grad.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "ddspvoc/errors.hpp"
#include "ddspvoc/fft.hpp"
#include "ddspvoc/signal.hpp"

namespace ddspvoc {
namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Adjoint scale of the one-sided inverse transform used for zero-phase
// responses: interior bins contribute twice (their mirror image), edges once.
double half_spectrum_scale(std::size_t k, std::size_t num_bins, int fft_size) {
  const bool edge = k == 0 || k + 1 == num_bins;
  return (edge ? 1.0 : 2.0) / static_cast<double>(fft_size);
}

void check_finite_matrix(const Matrix& m, const char* what) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) {
      throw NumericError(std::string(what) + ": non-finite value");
    }
  }
}

}  // namespace

WaveformGrad mrs_waveform_grad(const Waveform& estimate,
                               const Waveform& reference,
                               const LossConfig& cfg) {
  cfg.validate();
  if (estimate.samples.size() != reference.samples.size() ||
      estimate.sample_rate != reference.sample_rate) {
    throw std::invalid_argument(
        "mrs_waveform_grad: waveforms must match in length and rate");
  }
  const std::size_t n = estimate.samples.size();
  WaveformGrad out;
  out.d_samples.assign(n, 0.0);

  for (std::size_t i = 0; i < cfg.windows.size(); ++i) {
    const int window = cfg.windows[i];
    FrameConfig fc;
    fc.sample_rate = estimate.sample_rate;
    fc.fft_size = window;
    fc.window_len = window;
    fc.hop = cfg.loss_hop;

    // Forward, mirroring log_mag exactly so the loss value matches
    // mrs_loss bit for bit.
    const ComplexSpectrogram spec = stft(estimate, fc);
    const MagnitudeSpectrogram mag = magnitude(spec);
    Matrix fe(mag.frames.rows(), mag.frames.cols());
    for (std::size_t j = 0; j < fe.size(); ++j) {
      fe.data()[j] = std::log(std::max(mag.frames.data()[j], kLogFloor));
    }
    const Matrix fr = log_mag(reference, window, cfg.loss_hop);
    double diff_l1 = 0.0;
    double est_l1 = 0.0;
    for (std::size_t j = 0; j < fe.size(); ++j) {
      diff_l1 += std::abs(fe.data()[j] - fr.data()[j]);
      est_l1 += std::abs(fe.data()[j]);
    }
    if (!(est_l1 > 0.0)) {
      throw NumericError("mrs_loss: vanishing normalizer at window " +
                         std::to_string(window));
    }
    const double term = cfg.weights[i] * diff_l1 / est_l1;
    if (!std::isfinite(term)) {
      throw NumericError("mrs_waveform_grad: non-finite loss at window " +
                         std::to_string(window));
    }
    out.resolution_terms.push_back(term);

    // Backward: d term / d log-magnitude, through the floor and the
    // magnitude onto the complex frames, then through the window and the
    // reflect padding onto the samples.
    const double lambda = cfg.weights[i];
    const double d_num = lambda / est_l1;
    const double d_den = lambda * diff_l1 / (est_l1 * est_l1);
    const std::vector<double> win = make_window(fc.window, fc.window_len);
    const std::size_t bins = mag.frames.cols();
    const int pad = fc.window_len / 2;
    std::vector<std::complex<double>> d_spec(bins);
    for (std::size_t t = 0; t < mag.frames.rows(); ++t) {
      bool any = false;
      for (std::size_t k = 0; k < bins; ++k) {
        const std::size_t idx = t * bins + k;
        const double m_v = mag.frames.data()[idx];
        const double d_fh =
            d_num * sgn(fe.data()[idx] - fr.data()[idx]) - d_den * sgn(fe.data()[idx]);
        if (m_v > kLogFloor && d_fh != 0.0) {
          d_spec[k] = (d_fh / (m_v * m_v)) * spec.at(t, k);
          any = true;
        } else {
          d_spec[k] = 0.0;
        }
      }
      if (!any) continue;
      const std::vector<double> d_frame = rfft_adjoint(d_spec, fc.fft_size);
      const long long start = static_cast<long long>(t) * fc.hop - pad;
      for (int m = 0; m < fc.window_len; ++m) {
        out.d_samples[reflect_index(start + m, n)] += win[m] * d_frame[m];
      }
    }
  }
  for (double term : out.resolution_terms) out.loss += term;
  return out;
}

SynthGradResult mrs_grad(const AcousticFeatures& features,
                         const Waveform& reference,
                         const SynthConfig& synth_cfg,
                         const LossConfig& loss_cfg) {
  synth_cfg.validate();
  loss_cfg.validate();
  features.validate();
  const std::size_t t_frames = features.num_frames();
  if (t_frames < 2) {
    throw std::invalid_argument("mrs_grad: needs at least two frames");
  }
  if (features.config.sample_rate != synth_cfg.frame.sample_rate ||
      features.config.hop != synth_cfg.frame.hop) {
    throw std::invalid_argument(
        "mrs_grad: feature sample_rate/hop disagree with the synth config");
  }
  const std::size_t hop = static_cast<std::size_t>(synth_cfg.frame.hop);
  const std::size_t n_out = (t_frames - 1) * hop;
  if (reference.samples.size() != n_out ||
      reference.sample_rate != synth_cfg.frame.sample_rate) {
    throw std::invalid_argument(
        "mrs_grad: reference must be (num_frames - 1) * hop samples at the "
        "synth sample rate");
  }

  // Forward.
  const MelFilterbank fb80 = make_envelope_bank(synth_cfg.frame);
  const MelFilterbank fb12 = make_periodicity_bank(synth_cfg.frame);
  const Matrix envelope = linear_envelope(features, fb80);
  const Matrix up = upsample_periodicity(features.periodicity, fb12,
                                         fb80.num_bins());
  check_finite_matrix(envelope, "mrs_grad: envelope");
  FrameFilters filters;
  filters.periodic_mag = Matrix(envelope.rows(), envelope.cols());
  filters.aperiodic_mag = Matrix(envelope.rows(), envelope.cols());
  for (std::size_t j = 0; j < envelope.size(); ++j) {
    filters.periodic_mag.data()[j] = envelope.data()[j] * up.data()[j];
    filters.aperiodic_mag.data()[j] = envelope.data()[j] * (1.0 - up.data()[j]);
  }
  SynthTrace trace;
  const SynthResult parts =
      synthesize_filters(features.f0, filters, synth_cfg, &trace);
  for (double v : parts.mix.samples) {
    if (!std::isfinite(v)) {
      throw NumericError("mrs_grad: synthesis produced non-finite samples");
    }
  }

  WaveformGrad wg = mrs_waveform_grad(parts.mix, reference, loss_cfg);
  const std::vector<double>& dy = wg.d_samples;

  // Backward through the two excitation paths onto the frame responses.
  const int fft = synth_cfg.frame.fft_size;
  const int half = fft / 2;
  const std::size_t bins = static_cast<std::size_t>(synth_cfg.frame.num_bins());
  Matrix d_pm(t_frames, bins, 0.0);
  Matrix d_am(t_frames, bins, 0.0);

  // Periodic branch: pulses of one frame share its zero-phase response, so
  // gather d response-taps over the frame's pulses, then map taps back to
  // the half spectrum.
  std::vector<double> d_taps(fft);
  for (std::size_t i = 0; i < trace.impulses.size();) {
    const std::size_t t = trace.impulses[i].frame;
    std::fill(d_taps.begin(), d_taps.end(), 0.0);
    bool any = false;
    for (; i < trace.impulses.size() && trace.impulses[i].frame == t; ++i) {
      const long long m = trace.impulses[i].position;
      const double a = trace.impulses[i].amplitude;
      for (int j = 0; j < fft; ++j) {
        const long long idx = m + (j < half ? j : j - fft);
        if (idx >= 0 && idx < static_cast<long long>(n_out)) {
          d_taps[j] += a * dy[static_cast<std::size_t>(idx)];
          any = true;
        }
      }
    }
    if (!any) continue;
    const auto g = rfft(d_taps, fft);
    for (std::size_t k = 0; k < bins; ++k) {
      d_pm(t, k) += half_spectrum_scale(k, bins, fft) * g[k].real();
    }
  }

  // Noise branch: the grain is the windowed inverse transform of the drawn
  // spectrum scaled per bin, so each bin's gradient is the real part of the
  // draw against the spectrum of the windowed sample cotangents.
  const std::vector<double> grain_win = noise_grain_window(fft);
  std::vector<double> du(fft);
  for (std::size_t t = 0; t < t_frames; ++t) {
    const long long start = static_cast<long long>(t) * hop - half;
    bool any = false;
    for (int j = 0; j < fft; ++j) {
      const long long idx = start + j;
      if (idx >= 0 && idx < static_cast<long long>(n_out)) {
        du[j] = grain_win[j] * dy[static_cast<std::size_t>(idx)];
        any = any || du[j] != 0.0;
      } else {
        du[j] = 0.0;
      }
    }
    if (!any) continue;
    const auto g = rfft(du, fft);
    for (std::size_t k = 0; k < bins; ++k) {
      const std::complex<double> x = trace.noise_at(t, k);
      d_am(t, k) = half_spectrum_scale(k, bins, fft) *
                   (x.real() * g[k].real() + x.imag() * g[k].imag());
    }
  }

  // Through the envelope/periodicity split.
  Matrix d_env(t_frames, bins);
  Matrix d_up(t_frames, bins);
  for (std::size_t j = 0; j < d_env.size(); ++j) {
    d_env.data()[j] = d_pm.data()[j] * up.data()[j] +
                      d_am.data()[j] * (1.0 - up.data()[j]);
    d_up.data()[j] = (d_pm.data()[j] - d_am.data()[j]) * envelope.data()[j];
  }

  SynthGradResult result;
  result.loss = wg.loss;
  result.resolution_terms = std::move(wg.resolution_terms);
  result.estimate = parts.mix;
  result.grads.d_periodicity = Matrix(t_frames, kPeriodicityBands, 0.0);
  result.grads.d_envelope_logmel = Matrix(t_frames, kEnvelopeBands, 0.0);

  // Transpose of the normalized triangle interpolation.
  const Matrix& w12 = fb12.weights();
  std::vector<double> colsum(bins, 0.0);
  for (std::size_t b = 0; b < w12.rows(); ++b) {
    for (std::size_t k = 0; k < bins; ++k) colsum[k] += w12(b, k);
  }
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t b = 0; b < w12.rows(); ++b) {
      double acc = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        acc += w12(b, k) / colsum[k] * d_up(t, k);
      }
      result.grads.d_periodicity(t, b) = acc;
    }
  }

  // Transpose of the pseudo-inverse through the non-negativity clamp
  // (envelope > 0 exactly where the pre-clamp value was positive), then the
  // exp map back to log-mel.
  const Matrix& pinv = fb80.pseudo_inverse();  // bins x kEnvelopeBands
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(kEnvelopeBands); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        if (envelope(t, k) > 0.0) {
          acc += pinv(k, i) * d_env(t, k);
        }
      }
      result.grads.d_envelope_logmel(t, i) =
          acc * std::exp(features.envelope_logmel(t, i));
    }
  }
  return result;
}

double finite_diff_check(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, std::span<const double> analytic_grad,
    int probes, double step, unsigned seed) {
  if (x.size() != analytic_grad.size()) {
    throw std::invalid_argument(
        "finite_diff_check: gradient length does not match x");
  }
  if (probes < 1 || step <= 0.0 || x.empty()) {
    throw std::invalid_argument("finite_diff_check: bad probe parameters");
  }
  std::mt19937 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  std::vector<double> work(x.begin(), x.end());
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t i = pick(gen);
    work[i] = x[i] + step;
    const double fp = f(work);
    work[i] = x[i] - step;
    const double fm = f(work);
    work[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * step);
    const double rel =
        std::abs(analytic_grad[i] - numeric) /
        std::max({std::abs(analytic_grad[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

void FitConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("FitConfig: steps must be >= 0");
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("FitConfig: learning_rate must be positive");
  }
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw std::invalid_argument("FitConfig: decay rates must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("FitConfig: epsilon must be positive");
  }
}

FitResult fit_features(const AcousticFeatures& init, const Waveform& reference,
                       const SynthConfig& synth_cfg, const LossConfig& loss_cfg,
                       const FitConfig& fit_cfg) {
  fit_cfg.validate();
  FitResult out;
  out.features = init;
  const std::size_t env_n = init.envelope_logmel.size();
  const std::size_t per_n = init.periodicity.size();
  std::vector<double> m1(env_n + per_n, 0.0);
  std::vector<double> m2(env_n + per_n, 0.0);

  for (int step = 1; step <= fit_cfg.steps; ++step) {
    SynthGradResult r;
    try {
      r = mrs_grad(out.features, reference, synth_cfg, loss_cfg);
    } catch (const NumericError& e) {
      throw NumericError("fit_features: diverged at step " +
                         std::to_string(step) + ": " + e.what());
    }
    out.history.push_back({step, r.loss, r.resolution_terms});

    const double bc1 = 1.0 - std::pow(fit_cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(fit_cfg.beta2, step);
    auto update = [&](double* param, const double* grad, std::size_t count,
                      std::size_t moment_offset) {
      for (std::size_t j = 0; j < count; ++j) {
        const double g = grad[j];
        double& m = m1[moment_offset + j];
        double& v = m2[moment_offset + j];
        m = fit_cfg.beta1 * m + (1.0 - fit_cfg.beta1) * g;
        v = fit_cfg.beta2 * v + (1.0 - fit_cfg.beta2) * g * g;
        param[j] -= fit_cfg.learning_rate * (m / bc1) /
                    (std::sqrt(v / bc2) + fit_cfg.epsilon);
      }
    };
    update(out.features.envelope_logmel.data(),
           r.grads.d_envelope_logmel.data(), env_n, 0);
    update(out.features.periodicity.data(), r.grads.d_periodicity.data(),
           per_n, env_n);
    for (std::size_t j = 0; j < per_n; ++j) {
      double& p = out.features.periodicity.data()[j];
      p = std::clamp(p, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace ddspvoc
