// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "ddspvoc/fft.hpp"
#include "ddspvoc/signal.hpp"
#include "ddspvoc/types.hpp"

namespace {

using namespace ddspvoc;

Waveform random_wave(std::size_t n, unsigned seed, int sample_rate = 16000) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = dist(gen);
  return w;
}

// Reference reflect indexing, written independently of the library: walk
// the index back into range one bounce at a time.
std::size_t reflect_ref(long long i, std::size_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= static_cast<long long>(n)) {
    if (i < 0) i = -i;
    if (i >= static_cast<long long>(n)) i = 2 * (static_cast<long long>(n) - 1) - i;
  }
  return static_cast<std::size_t>(i);
}

// O(N^2) DFT oracle for one centered frame.
std::vector<std::complex<double>> naive_frame_dft(const Waveform& wave,
                                                  const FrameConfig& cfg,
                                                  std::size_t frame) {
  const std::vector<double> w = make_window(cfg.window, cfg.window_len);
  const int pad = cfg.window_len / 2;
  std::vector<double> x(cfg.fft_size, 0.0);
  for (int j = 0; j < cfg.window_len; ++j) {
    const long long idx =
        static_cast<long long>(frame) * cfg.hop - pad + j;
    x[j] = w[j] * wave.samples[reflect_ref(idx, wave.samples.size())];
  }
  std::vector<std::complex<double>> bins(cfg.num_bins());
  for (int k = 0; k < cfg.num_bins(); ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (int n = 0; n < cfg.fft_size; ++n) {
      const double angle = -2.0 * std::numbers::pi * k * n / cfg.fft_size;
      acc += x[n] * std::complex<double>{std::cos(angle), std::sin(angle)};
    }
    bins[k] = acc;
  }
  return bins;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(std::max(den, 1e-300));
}

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace

TEST_CASE("fft matches naive dft and inverts") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int n : {2, 8, 256, 1024}) {
    std::vector<std::complex<double>> x(n);
    for (auto& v : x) v = {dist(gen), dist(gen)};
    std::vector<std::complex<double>> fwd = x;
    Fft plan(n);
    plan.transform(fwd, false);
    for (int k = 0; k < n; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (int m = 0; m < n; ++m) {
        const double angle = -2.0 * std::numbers::pi * k * m / n;
        acc += x[m] * std::complex<double>{std::cos(angle), std::sin(angle)};
      }
      CHECK(std::abs(fwd[k] - acc) < 1e-9 * std::max(1.0, std::abs(acc)));
    }
    std::vector<std::complex<double>> back = fwd;
    plan.transform(back, true);
    for (int m = 0; m < n; ++m) CHECK(std::abs(back[m] - x[m]) < 1e-12);
  }
}

TEST_CASE("rfft/irfft round trip") {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> x(256);
  for (auto& v : x) v = dist(gen);
  const auto bins = rfft(x, 256);
  REQUIRE(bins.size() == 129);
  const auto back = irfft(bins, 256);
  for (int n = 0; n < 256; ++n) CHECK(back[n] == doctest::Approx(x[n]).epsilon(1e-12));
}

TEST_CASE("hann window coefficients and overlap constancy") {
  const auto w4 = make_window(WindowKind::kHann, 4);
  REQUIRE(w4.size() == 4);
  CHECK(w4[0] == doctest::Approx(0.0));
  CHECK(w4[1] == doctest::Approx(0.5));
  CHECK(w4[2] == doctest::Approx(1.0));
  CHECK(w4[3] == doctest::Approx(0.5));

  // Direct-summation overlap oracle at the default hop: shifted copies of
  // the window must sum to the same constant at every steady-state offset.
  const auto w = make_window(WindowKind::kHann, 256);
  for (int j = 0; j < 128; ++j) {
    const double sum = w[j] + w[j + 128];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }

  // Length-1 window is produced but unusable: framing rejects it.
  const auto w1 = make_window(WindowKind::kHann, 1);
  REQUIRE(w1.size() == 1);
  CHECK(w1[0] == doctest::Approx(0.0));
  FrameConfig degenerate;
  degenerate.fft_size = 2;
  degenerate.window_len = 1;
  degenerate.hop = 1;
  CHECK_THROWS_AS(degenerate.validate(), std::invalid_argument);
}

TEST_CASE("stft matches naive centered-frame dft") {
  const FrameConfig cfg;
  const Waveform wave = random_wave(700, 21);
  const auto spec = stft(wave, cfg);
  REQUIRE(spec.num_frames == 700 / 128 + 1);
  REQUIRE(spec.num_bins == 129);
  for (std::size_t t : {std::size_t{0}, std::size_t{2}, spec.num_frames - 1}) {
    const auto ref = naive_frame_dft(wave, cfg, t);
    for (int k = 0; k < 129; ++k) {
      CHECK(std::abs(spec.at(t, k) - ref[k]) < 1e-9);
    }
  }
}

TEST_CASE("stft frame count for one second") {
  const FrameConfig cfg;
  const auto spec = stft(random_wave(16000, 3), cfg);
  CHECK(spec.num_frames == 126);
  CHECK(spec.num_samples == 16000);
}

TEST_CASE("stft linearity") {
  const FrameConfig cfg;
  const Waveform x = random_wave(5000, 31);
  const Waveform y = random_wave(5000, 32);
  Waveform z = x;
  const double a = 0.7, b = -1.3;
  for (std::size_t i = 0; i < z.samples.size(); ++i) {
    z.samples[i] = a * x.samples[i] + b * y.samples[i];
  }
  const auto sx = stft(x, cfg);
  const auto sy = stft(y, cfg);
  const auto sz = stft(z, cfg);
  for (std::size_t i = 0; i < sz.data.size(); ++i) {
    CHECK(std::abs(sz.data[i] - (a * sx.data[i] + b * sy.data[i])) < 1e-9);
  }
}

TEST_CASE("istft round trip is exact to solver precision") {
  const FrameConfig cfg;
  for (unsigned seed : {101u, 102u, 103u}) {
    for (std::size_t n : {std::size_t{16000}, std::size_t{16010}, std::size_t{777}}) {
      const Waveform x = random_wave(n, seed);
      const Waveform y = istft(stft(x, cfg));
      REQUIRE(y.samples.size() == n);
      CHECK(rel_l2(y.samples, x.samples) < 1e-6);
      // Energy conservation through the round trip.
      const double ex = energy(x.samples);
      const double ey = energy(y.samples);
      CHECK(std::abs(ey - ex) / ex < 1e-10);
    }
  }
}

TEST_CASE("istft of single-frame spectrogram follows the overlap-add contract") {
  FrameConfig cfg;
  const std::size_t n = 100;  // < hop, so exactly one frame
  const Waveform x = random_wave(n, 55);
  const auto spec = stft(x, cfg);
  REQUIRE(spec.num_frames == 1);
  const Waveform y = istft(spec);
  REQUIRE(y.samples.size() == n);
  // One frame, so the weighted overlap-add reduces to
  // window * frame / window^2 sample-by-sample over the retained range.
  const auto w = make_window(cfg.window, cfg.window_len);
  const auto full = irfft(std::span<const std::complex<double>>(spec.data), 256);
  const int pad = cfg.window_len / 2;
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t p = m + pad;
    const double expected = w[p] > 0.0 ? full[p] / w[p] : 0.0;
    CHECK(y.samples[m] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("istft of all-zero spectrogram is silence") {
  ComplexSpectrogram spec;
  spec.config = FrameConfig{};
  spec.num_frames = 10;
  spec.num_bins = 129;
  spec.num_samples = 10 * 128;
  spec.data.assign(spec.num_frames * spec.num_bins, {0.0, 0.0});
  const Waveform y = istft(spec);
  REQUIRE(y.samples.size() == 1280);
  for (double s : y.samples) CHECK(s == 0.0);
}

TEST_CASE("istft rejects configurations without overlap coverage") {
  FrameConfig cfg;
  cfg.hop = 256;  // hann with no overlap dies at the window zeros
  ComplexSpectrogram spec;
  spec.config = cfg;
  spec.num_frames = 4;
  spec.num_bins = 129;
  spec.num_samples = 1024;
  spec.data.assign(spec.num_frames * spec.num_bins, {0.0, 0.0});
  CHECK_THROWS_AS(istft(spec), std::invalid_argument);
}

TEST_CASE("stft input validation") {
  const FrameConfig cfg;
  Waveform empty;
  CHECK_THROWS_AS(stft(empty, cfg), std::invalid_argument);
  FrameConfig bad = cfg;
  bad.fft_size = 300;
  CHECK_THROWS_AS(stft(random_wave(1000, 1), bad), std::invalid_argument);
  FrameConfig hop_gt_window = cfg;
  hop_gt_window.hop = 512;
  CHECK_THROWS_AS(stft(random_wave(1000, 1), hop_gt_window),
                  std::invalid_argument);
}

TEST_CASE("mel scale anchors") {
  CHECK(hz_to_mel(0.0) == doctest::Approx(0.0));
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
  CHECK(mel_to_hz(hz_to_mel(440.0)) == doctest::Approx(440.0).epsilon(1e-12));
}

TEST_CASE("mel filterbank geometry") {
  const FrameConfig cfg;
  const auto fb = make_mel_filterbank(cfg, 80, 0.0, 8000.0);
  REQUIRE(fb.num_bands() == 80);
  REQUIRE(fb.num_bins() == 129);

  // Every band keeps support and every covered bin has coverage.
  for (int m = 0; m < 80; ++m) {
    double row = 0.0;
    double row_max = 0.0;
    for (int k = 0; k < 129; ++k) {
      CHECK(fb.weights()(m, k) >= 0.0);
      row += fb.weights()(m, k);
      row_max = std::max(row_max, fb.weights()(m, k));
    }
    CHECK(row > 0.0);
    CHECK(row_max <= 1.0 + 1e-12);
  }
  for (int k = 0; k < 129; ++k) {
    double col = 0.0;
    for (int m = 0; m < 80; ++m) col += fb.weights()(m, k);
    CHECK(col > 0.0);
  }

  // Centers are strictly increasing and equally spaced in mel.
  const double step = hz_to_mel(8000.0) / 81.0;
  for (int m = 0; m < 80; ++m) {
    CHECK(hz_to_mel(fb.center_hz(m)) == doctest::Approx((m + 1) * step).epsilon(1e-9));
    if (m > 0) CHECK(fb.center_hz(m) > fb.center_hz(m - 1));
  }
}

TEST_CASE("mel_project matches brute force") {
  const FrameConfig cfg;
  const auto fb = make_mel_filterbank(cfg, 80, 0.0, 8000.0);
  std::mt19937 gen(99);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  Matrix frames(4, 129);
  for (std::size_t i = 0; i < frames.size(); ++i) frames.data()[i] = dist(gen);
  const Matrix mel = mel_project(frames, fb);
  REQUIRE(mel.rows() == 4);
  REQUIRE(mel.cols() == 80);
  for (std::size_t t = 0; t < 4; ++t) {
    for (int m = 0; m < 80; ++m) {
      double acc = 0.0;
      for (int k = 0; k < 129; ++k) acc += fb.weights()(m, k) * frames(t, k);
      CHECK(mel(t, m) == acc);
    }
  }
}

TEST_CASE("mel_to_linear round trip on smooth envelopes") {
  const FrameConfig cfg;
  const auto fb = make_mel_filterbank(cfg, 80, 0.0, 8000.0);
  std::mt19937 gen(123);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix mel(6, 80);
  for (std::size_t t = 0; t < 6; ++t) {
    // Smooth random log-envelope: low-order random cosine mixture.
    double a[4];
    for (auto& v : a) v = 0.5 * dist(gen);
    for (int m = 0; m < 80; ++m) {
      double lg = 0.0;
      for (int h = 0; h < 4; ++h) {
        lg += a[h] * std::cos(2.0 * std::numbers::pi * (h + 1) * m / 80.0);
      }
      mel(t, m) = std::exp(lg);
    }
  }
  const Matrix linear = mel_to_linear(mel, fb);
  REQUIRE(linear.cols() == 129);
  for (std::size_t i = 0; i < linear.size(); ++i) CHECK(linear.data()[i] >= 0.0);
  const Matrix back = mel_project(linear, fb);
  for (std::size_t t = 0; t < 6; ++t) {
    double num = 0.0, den = 0.0;
    for (int m = 0; m < 80; ++m) {
      num += (back(t, m) - mel(t, m)) * (back(t, m) - mel(t, m));
      den += mel(t, m) * mel(t, m);
    }
    CHECK(std::sqrt(num / den) < 0.05);
  }
}

TEST_CASE("single active band maps to a concentrated linear support") {
  const FrameConfig cfg;
  const auto fb = make_mel_filterbank(cfg, 80, 0.0, 8000.0);
  const int band = 40;
  Matrix mel(1, 80, 0.0);
  mel(0, band) = 1.0;
  const Matrix linear = mel_to_linear(mel, fb);
  const double bin_hz = 16000.0 / 256.0;
  double inside = 0.0, total = 0.0;
  for (int k = 0; k < 129; ++k) {
    total += linear(0, k);
    const double f = k * bin_hz;
    if (f >= fb.lower_edge_hz(band) - 2.0 * bin_hz &&
        f <= fb.upper_edge_hz(band) + 2.0 * bin_hz) {
      inside += linear(0, k);
    }
  }
  REQUIRE(total > 0.0);
  CHECK(inside / total > 0.95);
}

TEST_CASE("mel_to_linear rejects negative input") {
  const FrameConfig cfg;
  const auto fb = make_mel_filterbank(cfg, 12, 0.0, 8000.0);
  Matrix mel(1, 12, 1.0);
  mel(0, 3) = -0.5;
  CHECK_THROWS_AS(mel_to_linear(mel, fb), std::invalid_argument);
}

TEST_CASE("filterbank rejects bad ranges") {
  const FrameConfig cfg;
  CHECK_THROWS_AS(make_mel_filterbank(cfg, 0, 0.0, 8000.0), std::invalid_argument);
  CHECK_THROWS_AS(make_mel_filterbank(cfg, 10, -1.0, 8000.0), std::invalid_argument);
  CHECK_THROWS_AS(make_mel_filterbank(cfg, 10, 0.0, 9000.0), std::invalid_argument);
  CHECK_THROWS_AS(make_mel_filterbank(cfg, 10, 4000.0, 4000.0), std::invalid_argument);
}
