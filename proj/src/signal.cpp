// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/signal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "ddspvoc/fft.hpp"

namespace ddspvoc {

namespace {

constexpr double kPinvLambda = 1e-8;
constexpr double kOverlapFloor = 1e-12;

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace

// Reflected ("bounce") index into [0, n) without repeating edge samples.
std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * static_cast<long long>(n) - 2;
  long long m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

void FrameConfig::validate() const {
  if (sample_rate <= 0) {
    throw std::invalid_argument("FrameConfig: sample_rate must be positive");
  }
  if (!is_pow2(fft_size) || fft_size < 2) {
    throw std::invalid_argument("FrameConfig: fft_size must be a power of two >= 2");
  }
  if (hop < 1 || hop > window_len) {
    throw std::invalid_argument("FrameConfig: need 1 <= hop <= window_len");
  }
  if (window_len > fft_size) {
    throw std::invalid_argument("FrameConfig: window_len must not exceed fft_size");
  }
  const std::vector<double> w = make_window(window, window_len);
  double sum = 0.0;
  for (double v : w) sum += v;
  if (sum <= 0.0) {
    throw std::invalid_argument("FrameConfig: degenerate window (zero sum)");
  }
}

std::size_t num_frames_for(std::size_t num_samples, const FrameConfig& cfg) {
  return num_samples / static_cast<std::size_t>(cfg.hop) + 1;
}

void Waveform::validate() const {
  if (sample_rate <= 0) {
    throw std::invalid_argument("Waveform: sample_rate must be positive");
  }
  for (double s : samples) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("Waveform: non-finite sample");
    }
  }
}

std::vector<double> make_window(WindowKind kind, int window_len) {
  if (window_len < 1) {
    throw std::invalid_argument("make_window: window_len must be positive");
  }
  switch (kind) {
    case WindowKind::kHann: {
      std::vector<double> w(window_len);
      for (int n = 0; n < window_len; ++n) {
        w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / window_len);
      }
      return w;
    }
  }
  throw std::invalid_argument("make_window: unsupported window kind");
}

ComplexSpectrogram stft(const Waveform& wave, const FrameConfig& cfg) {
  cfg.validate();
  wave.validate();
  if (wave.samples.empty()) {
    throw std::invalid_argument("stft: empty waveform");
  }
  const std::size_t n = wave.samples.size();
  const std::size_t num_frames = num_frames_for(n, cfg);
  const int pad = cfg.window_len / 2;
  const std::vector<double> w = make_window(cfg.window, cfg.window_len);
  const Fft plan(cfg.fft_size);

  ComplexSpectrogram spec;
  spec.num_frames = num_frames;
  spec.num_bins = static_cast<std::size_t>(cfg.num_bins());
  spec.config = cfg;
  spec.num_samples = n;
  spec.data.resize(num_frames * spec.num_bins);

  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (std::size_t t = 0; t < num_frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{0.0, 0.0});
    const long long start =
        static_cast<long long>(t) * cfg.hop - static_cast<long long>(pad);
    for (int j = 0; j < cfg.window_len; ++j) {
      buf[j] = w[j] * wave.samples[reflect_index(start + j, n)];
    }
    plan.transform(buf, false);
    for (std::size_t k = 0; k < spec.num_bins; ++k) spec.at(t, k) = buf[k];
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const FrameConfig& cfg = spec.config;
  cfg.validate();
  if (spec.num_frames == 0) {
    throw std::invalid_argument("istft: empty spectrogram");
  }
  if (spec.num_bins != static_cast<std::size_t>(cfg.num_bins())) {
    throw std::invalid_argument("istft: bin count does not match config");
  }
  const std::vector<double> w = make_window(cfg.window, cfg.window_len);

  // Reject configurations whose overlapped squared window vanishes in the
  // steady state; the weighted overlap-add below would divide by ~zero for
  // fully covered samples.
  for (int j = 0; j < cfg.hop; ++j) {
    double den = 0.0;
    for (int k = j; k < cfg.window_len; k += cfg.hop) den += w[k] * w[k];
    if (den <= 1e-6) {
      throw std::invalid_argument(
          "istft: window/hop combination has vanishing overlap coverage");
    }
  }

  const std::size_t out_len =
      spec.num_samples > 0
          ? spec.num_samples
          : static_cast<std::size_t>(spec.num_frames - 1) * cfg.hop;
  const int pad = cfg.window_len / 2;
  const std::size_t acc_len =
      (spec.num_frames - 1) * static_cast<std::size_t>(cfg.hop) + cfg.window_len;
  std::vector<double> num(acc_len, 0.0);
  std::vector<double> den(acc_len, 0.0);

  const Fft plan(cfg.fft_size);
  const int half = cfg.fft_size / 2;
  std::vector<std::complex<double>> buf(cfg.fft_size);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    buf[0] = {spec.at(t, 0).real(), 0.0};
    buf[half] = {spec.at(t, half).real(), 0.0};
    for (int k = 1; k < half; ++k) {
      buf[k] = spec.at(t, k);
      buf[cfg.fft_size - k] = std::conj(spec.at(t, k));
    }
    plan.transform(buf, true);
    const std::size_t start = t * static_cast<std::size_t>(cfg.hop);
    for (int j = 0; j < cfg.window_len; ++j) {
      num[start + j] += w[j] * buf[j].real();
      den[start + j] += w[j] * w[j];
    }
  }

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples.resize(out_len, 0.0);
  for (std::size_t m = 0; m < out_len; ++m) {
    const std::size_t p = m + static_cast<std::size_t>(pad);
    if (p < acc_len && den[p] > kOverlapFloor) {
      out.samples[m] = num[p] / den[p];
    }
  }
  return out;
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram mag;
  mag.config = spec.config;
  mag.frames = Matrix(spec.num_frames, spec.num_bins);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    for (std::size_t k = 0; k < spec.num_bins; ++k) {
      mag.frames(t, k) = std::abs(spec.at(t, k));
    }
  }
  return mag;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

namespace {

// Height of band `i`'s triangle (grid points g[i-1], g[i], g[i+1]) at f.
double triangle_value(const std::vector<double>& g, int i, double f) {
  if (f <= g[i - 1] || f >= g[i + 1]) return 0.0;
  if (f <= g[i]) return (f - g[i - 1]) / (g[i] - g[i - 1]);
  return (g[i + 1] - f) / (g[i + 1] - g[i]);
}

// Integral of the triangle over [a, b]; the triangle is linear on either
// side of its peak, so trapezoids over the split sub-intervals are exact.
double triangle_integral(const std::vector<double>& g, int i, double a, double b) {
  a = std::max(a, g[i - 1]);
  b = std::min(b, g[i + 1]);
  if (b <= a) return 0.0;
  double total = 0.0;
  const double split = std::clamp(g[i], a, b);
  if (split > a) {
    total += (split - a) * 0.5 *
             (triangle_value(g, i, a) + triangle_value(g, i, split));
  }
  if (b > split) {
    total += (b - split) * 0.5 *
             (triangle_value(g, i, split) + triangle_value(g, i, b));
  }
  return total;
}

}  // namespace

MelFilterbank make_mel_filterbank(const FrameConfig& cfg, int n_mels,
                                  double f_min, double f_max) {
  cfg.validate();
  if (n_mels < 1) {
    throw std::invalid_argument("make_mel_filterbank: n_mels must be >= 1");
  }
  const double nyquist = cfg.sample_rate / 2.0;
  if (f_min < 0.0 || f_max <= f_min || f_max > nyquist) {
    throw std::invalid_argument(
        "make_mel_filterbank: need 0 <= f_min < f_max <= sample_rate/2");
  }

  MelFilterbank fb;
  fb.f_min_ = f_min;
  fb.f_max_ = f_max;
  fb.sample_rate_ = cfg.sample_rate;
  fb.grid_hz_.resize(n_mels + 2);
  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  for (int i = 0; i < n_mels + 2; ++i) {
    fb.grid_hz_[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }

  const int num_bins = cfg.num_bins();
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
  fb.weights_ = Matrix(n_mels, num_bins);
  for (int i = 1; i <= n_mels; ++i) {
    for (int k = 0; k < num_bins; ++k) {
      const double cell_lo = (k - 0.5) * bin_hz;
      const double cell_hi = (k + 0.5) * bin_hz;
      fb.weights_(i - 1, k) =
          triangle_integral(fb.grid_hz_, i, cell_lo, cell_hi) / bin_hz;
    }
  }

  // Every band keeps support by construction (triangles have positive
  // width and the cells tile the axis); verify the converse coverage
  // needed for inversion: no silent bin inside [f_min, f_max].
  for (int k = 0; k < num_bins; ++k) {
    const double f = k * bin_hz;
    if (f < f_min || f > f_max) continue;
    double col = 0.0;
    for (int i = 0; i < n_mels; ++i) col += fb.weights_(i, k);
    if (col <= 0.0) {
      throw std::invalid_argument(
          "make_mel_filterbank: bin " + std::to_string(k) +
          " inside [f_min, f_max] has no band coverage");
    }
  }

  // Regularized pseudo-inverse: W^T (W W^T + lambda I)^{-1}, computed via
  // an LDLT solve of the band Gram matrix.
  using Rm = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Rm> a(fb.weights_.data(), n_mels, num_bins);
  Eigen::MatrixXd gram = a * a.transpose();
  gram.diagonal().array() += kPinvLambda;
  const Eigen::MatrixXd solved = gram.ldlt().solve(Eigen::MatrixXd(a));
  fb.pinv_ = Matrix(num_bins, n_mels);
  for (int k = 0; k < num_bins; ++k) {
    for (int i = 0; i < n_mels; ++i) fb.pinv_(k, i) = solved(i, k);
  }
  return fb;
}

Matrix mel_project(const Matrix& bin_frames, const MelFilterbank& fb) {
  if (bin_frames.cols() != static_cast<std::size_t>(fb.num_bins())) {
    throw std::invalid_argument("mel_project: bin count does not match bank");
  }
  const std::size_t rows = bin_frames.rows();
  const int bands = fb.num_bands();
  const int bins = fb.num_bins();
  Matrix out(rows, bands);
  for (std::size_t t = 0; t < rows; ++t) {
    for (int m = 0; m < bands; ++m) {
      double acc = 0.0;
      for (int k = 0; k < bins; ++k) {
        acc += fb.weights()(m, k) * bin_frames(t, k);
      }
      out(t, m) = acc;
    }
  }
  return out;
}

Matrix mel_project(const MagnitudeSpectrogram& mag, const MelFilterbank& fb) {
  return mel_project(mag.frames, fb);
}

Matrix mel_to_linear(const Matrix& mel_frames, const MelFilterbank& fb) {
  if (mel_frames.cols() != static_cast<std::size_t>(fb.num_bands())) {
    throw std::invalid_argument("mel_to_linear: band count does not match bank");
  }
  for (std::size_t i = 0; i < mel_frames.size(); ++i) {
    if (mel_frames.data()[i] < 0.0) {
      throw std::invalid_argument("mel_to_linear: negative band energy");
    }
  }
  const std::size_t rows = mel_frames.rows();
  const int bands = fb.num_bands();
  const int bins = fb.num_bins();
  Matrix out(rows, bins);
  for (std::size_t t = 0; t < rows; ++t) {
    for (int k = 0; k < bins; ++k) {
      double acc = 0.0;
      for (int m = 0; m < bands; ++m) {
        acc += fb.pseudo_inverse()(k, m) * mel_frames(t, m);
      }
      out(t, k) = std::max(acc, 0.0);
    }
  }
  return out;
}

}  // namespace ddspvoc
