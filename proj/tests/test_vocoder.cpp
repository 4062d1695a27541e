// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/fft.hpp"
#include "ddspvoc/vocoder.hpp"

namespace {

using namespace ddspvoc;

AcousticFeatures flat_features(std::size_t frames, double f0_hz,
                               double periodicity, double log_env) {
  AcousticFeatures f;
  f.f0.assign(frames, f0_hz);
  f.periodicity = Matrix(frames, kPeriodicityBands, periodicity);
  f.envelope_logmel = Matrix(frames, kEnvelopeBands, log_env);
  return f;
}

AcousticFeatures random_features(std::size_t frames, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> env(-6.0, 0.5);
  std::uniform_real_distribution<double> per(0.0, 1.0);
  std::uniform_real_distribution<double> pitch(80.0, 300.0);
  std::bernoulli_distribution voiced(0.7);
  AcousticFeatures f;
  f.f0.resize(frames);
  f.periodicity = Matrix(frames, kPeriodicityBands);
  f.envelope_logmel = Matrix(frames, kEnvelopeBands);
  for (std::size_t t = 0; t < frames; ++t) {
    f.f0[t] = voiced(gen) ? pitch(gen) : 0.0;
    for (std::size_t b = 0; b < kPeriodicityBands; ++b) {
      f.periodicity(t, b) = per(gen);
    }
    for (std::size_t b = 0; b < kEnvelopeBands; ++b) {
      f.envelope_logmel(t, b) = env(gen);
    }
  }
  return f;
}

double rms(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return x.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(x.size()));
}

Waveform sawtooth(double f0, double seconds, int sample_rate, double amp) {
  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = static_cast<std::size_t>(seconds * sample_rate);
  w.samples.resize(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    phase += f0 / sample_rate;
    phase -= std::floor(phase);
    w.samples[i] = amp * (2.0 * phase - 1.0);
  }
  return w;
}

}  // namespace

TEST_CASE("synth config requires fft_size == 2*hop") {
  SynthConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.frame.fft_size = 512;
  cfg.frame.window_len = 512;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("zero-phase kernels are symmetric") {
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> mag(0.0, 2.0);
  std::vector<std::complex<double>> spectrum(129);
  for (auto& v : spectrum) v = mag(gen);
  const auto h = irfft(spectrum, 256);
  REQUIRE(h.size() == 256);
  for (int n = 1; n < 256; ++n) {
    CHECK(h[n] == doctest::Approx(h[256 - n]).epsilon(1e-12));
  }
}

TEST_CASE("pulse train at an exact divisor of the sample rate") {
  SynthConfig cfg;  // 16 kHz, hop 128
  std::vector<double> f0(126, 250.0);  // period exactly 64 samples
  const auto events = impulse_train(f0, cfg);
  REQUIRE(events.size() == 252);
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].position == 63 + 64 * static_cast<long long>(i));
    CHECK(events[i].amplitude == doctest::Approx(8.0));  // sqrt(128/2)
    CHECK(events[i].frame == static_cast<std::size_t>(events[i].position / 128));
  }
}

TEST_CASE("pulse train count tracks F0 for non-divisor rates") {
  SynthConfig cfg;
  std::vector<double> f0(126, 220.0);
  const auto events = impulse_train(f0, cfg);
  // Total phase advanced: 126*128 samples * 220/16000 per sample.
  const double expected = 126.0 * 128.0 * 220.0 / 16000.0;
  CHECK(std::abs(static_cast<double>(events.size()) - expected) <= 1.0);
  // Per-segment excitation is unit RMS: sum of squared amplitudes == hop.
  std::vector<double> seg_power(126, 0.0);
  for (const auto& e : events) {
    seg_power[e.frame] += e.amplitude * e.amplitude;
  }
  for (double p : seg_power) {
    CHECK(p == doctest::Approx(128.0));
  }
}

TEST_CASE("unvoiced segments freeze the pulse phase") {
  SynthConfig cfg;
  std::vector<double> f0(30, 200.0);
  for (int t = 10; t < 20; ++t) f0[t] = 0.0;
  const auto events = impulse_train(f0, cfg);
  int before = 0, inside = 0, after = 0;
  for (const auto& e : events) {
    if (e.position < 10 * 128) ++before;
    else if (e.position < 20 * 128) ++inside;
    else ++after;
  }
  CHECK(before > 10);
  CHECK(inside == 0);
  CHECK(after > 10);
}

TEST_CASE("periodicity upsampling preserves constants and bounds") {
  const FrameConfig frame;
  const auto fb12 = make_periodicity_bank(frame);
  Matrix constant(3, kPeriodicityBands, 0.37);
  const Matrix up = upsample_periodicity(constant, fb12, frame.num_bins());
  REQUIRE(up.cols() == 129);
  for (std::size_t i = 0; i < up.size(); ++i) {
    CHECK(up.data()[i] == doctest::Approx(0.37).epsilon(1e-12));
  }
  std::mt19937 gen(9);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  Matrix random(4, kPeriodicityBands);
  for (std::size_t i = 0; i < random.size(); ++i) random.data()[i] = dist(gen);
  const Matrix up2 = upsample_periodicity(random, fb12, frame.num_bins());
  for (std::size_t i = 0; i < up2.size(); ++i) {
    CHECK(up2.data()[i] >= -1e-12);
    CHECK(up2.data()[i] <= 1.0 + 1e-12);
  }
}

TEST_CASE("frame filters split the envelope by periodicity") {
  const FrameConfig frame;
  const auto fb80 = make_envelope_bank(frame);
  const auto fb12 = make_periodicity_bank(frame);
  const AcousticFeatures f = random_features(6, 21);
  const FrameFilters filters = make_frame_filters(f, fb80, fb12);
  const Matrix envelope = linear_envelope(f, fb80);
  REQUIRE(filters.periodic_mag.rows() == 6);
  REQUIRE(filters.periodic_mag.cols() == 129);
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    CHECK(filters.periodic_mag.data()[i] >= 0.0);
    CHECK(filters.aperiodic_mag.data()[i] >= 0.0);
    CHECK(filters.periodic_mag.data()[i] + filters.aperiodic_mag.data()[i] ==
          doctest::Approx(envelope.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("synthesis output length and branch isolation") {
  SynthConfig cfg;
  const AcousticFeatures f = random_features(25, 5);
  const SynthResult parts = synthesize_parts(f, cfg);
  REQUIRE(parts.mix.size() == 24 * 128);
  REQUIRE(parts.periodic.size() == parts.mix.size());
  REQUIRE(parts.aperiodic.size() == parts.mix.size());
  for (std::size_t i = 0; i < parts.mix.size(); ++i) {
    CHECK(parts.mix.samples[i] ==
          parts.periodic.samples[i] + parts.aperiodic.samples[i]);
  }
  const Waveform mix = synthesize(f, cfg);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    CHECK(mix.samples[i] == parts.mix.samples[i]);
  }
}

TEST_CASE("pure periodicity silences the noise branch and vice versa") {
  SynthConfig cfg;
  const AcousticFeatures tonal = flat_features(20, 150.0, 1.0, -1.0);
  const SynthResult a = synthesize_parts(tonal, cfg);
  CHECK(rms(a.periodic.samples) > 0.01);
  for (double v : a.aperiodic.samples) CHECK(v == 0.0);

  const AcousticFeatures noisy = flat_features(20, 0.0, 0.0, -1.0);
  const SynthResult b = synthesize_parts(noisy, cfg);
  CHECK(rms(b.aperiodic.samples) > 0.01);
  for (double v : b.periodic.samples) CHECK(v == 0.0);
}

TEST_CASE("synthesis is deterministic in the seed") {
  SynthConfig cfg;
  cfg.noise_seed = 1234;
  const AcousticFeatures f = random_features(20, 6);
  const Waveform a = synthesize(f, cfg);
  const Waveform b = synthesize(f, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i] == b.samples[i]);
  }
  SynthConfig other = cfg;
  other.noise_seed = 1235;
  const Waveform c = synthesize(f, other);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(a.samples[i] - c.samples[i]));
  }
  CHECK(max_diff > 1e-6);
}

TEST_CASE("synthesis is linear in the linear-domain envelope") {
  SynthConfig cfg;
  AcousticFeatures f = random_features(20, 7);
  const Waveform base = synthesize(f, cfg);
  for (std::size_t i = 0; i < f.envelope_logmel.size(); ++i) {
    f.envelope_logmel.data()[i] += std::log(2.0);
  }
  const Waveform doubled = synthesize(f, cfg);
  REQUIRE(base.size() == doubled.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(doubled.samples[i] ==
          doctest::Approx(2.0 * base.samples[i]).epsilon(1e-9));
  }
}

TEST_CASE("unit aperiodic response gives unit-RMS noise") {
  SynthConfig cfg;
  StreamingSynthesizer stream(cfg);
  const std::vector<double> pm(129, 0.0);
  const std::vector<double> am(129, 1.0);
  std::vector<double> collected;
  for (int t = 0; t < 200; ++t) {
    const auto chunk = stream.push(0.0, pm, am);
    REQUIRE(chunk.size() == 128);
    if (t >= 2) {  // skip warm-up and the first boundary hop
      collected.insert(collected.end(), chunk.begin(), chunk.end());
    }
  }
  CHECK(rms(collected) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("streaming chunks reassemble the offline render exactly") {
  for (F0Interp interp : {F0Interp::kHold, F0Interp::kLinear}) {
    SynthConfig cfg;
    cfg.noise_seed = 77;
    cfg.f0_interp = interp;
    const AcousticFeatures f = random_features(30, 8);
    const SynthResult offline = synthesize_parts(f, cfg);

    const auto fb80 = make_envelope_bank(cfg.frame);
    const auto fb12 = make_periodicity_bank(cfg.frame);
    const FrameFilters filters = make_frame_filters(f, fb80, fb12);
    StreamingSynthesizer stream(cfg);
    CHECK(stream.latency_hops() == (interp == F0Interp::kLinear ? 2 : 1));
    std::vector<double> mix, periodic, aperiodic;
    for (std::size_t t = 0; t < 30; ++t) {
      const auto chunk = stream.push_parts(f.f0[t], filters.periodic_mag.row(t),
                                           filters.aperiodic_mag.row(t));
      mix.insert(mix.end(), chunk.mix.begin(), chunk.mix.end());
      periodic.insert(periodic.end(), chunk.periodic.begin(),
                      chunk.periodic.end());
      aperiodic.insert(aperiodic.end(), chunk.aperiodic.begin(),
                       chunk.aperiodic.end());
    }
    const auto tail = stream.flush_parts();
    mix.insert(mix.end(), tail.mix.begin(), tail.mix.end());
    periodic.insert(periodic.end(), tail.periodic.begin(), tail.periodic.end());
    aperiodic.insert(aperiodic.end(), tail.aperiodic.begin(),
                     tail.aperiodic.end());

    const std::size_t start = stream.latency_hops() * 128;
    REQUIRE(mix.size() >= start + offline.mix.size());
    for (std::size_t i = 0; i < offline.mix.size(); ++i) {
      CHECK(offline.mix.samples[i] == mix[start + i]);
      CHECK(offline.periodic.samples[i] == periodic[start + i]);
      CHECK(offline.aperiodic.samples[i] == aperiodic[start + i]);
    }
  }
}

TEST_CASE("a frame edit cannot reach output more than the latency back") {
  const std::size_t edit = 15;
  for (F0Interp interp : {F0Interp::kHold, F0Interp::kLinear}) {
    SynthConfig cfg;
    cfg.f0_interp = interp;
    const AcousticFeatures f = random_features(30, 9);
    AcousticFeatures g = f;
    g.f0[edit] = f.f0[edit] > 0.0 ? 0.0 : 180.0;
    for (std::size_t b = 0; b < kEnvelopeBands; ++b) {
      g.envelope_logmel(edit, b) += 0.7;
    }
    for (std::size_t b = 0; b < kPeriodicityBands; ++b) {
      g.periodicity(edit, b) = 1.0 - g.periodicity(edit, b);
    }
    const Waveform a = synthesize(f, cfg);
    const Waveform b = synthesize(g, cfg);
    const std::size_t lookback = interp == F0Interp::kLinear ? 2 : 1;
    const std::size_t safe = (edit - lookback) * 128;
    for (std::size_t i = 0; i < safe; ++i) {
      CHECK(a.samples[i] == b.samples[i]);
    }
    double max_diff = 0.0;
    for (std::size_t i = safe; i < a.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(a.samples[i] - b.samples[i]));
    }
    CHECK(max_diff > 1e-9);
  }
}

TEST_CASE("the trace replays the exact event stream") {
  SynthConfig cfg;
  cfg.noise_seed = 42;
  const AcousticFeatures f = random_features(40, 10);
  const auto fb80 = make_envelope_bank(cfg.frame);
  const auto fb12 = make_periodicity_bank(cfg.frame);
  const FrameFilters filters = make_frame_filters(f, fb80, fb12);
  SynthTrace trace;
  synthesize_filters(f.f0, filters, cfg, &trace);

  const auto events = impulse_train(f.f0, cfg);
  REQUIRE(trace.impulses.size() == events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(trace.impulses[i].position == events[i].position);
    CHECK(trace.impulses[i].amplitude == events[i].amplitude);
    CHECK(trace.impulses[i].frame == events[i].frame);
  }
  REQUIRE(trace.num_frames == 40);
  REQUIRE(trace.num_bins == 129);
  REQUIRE(trace.noise_spectra.size() == 40 * 129);
  for (std::size_t t = 0; t < 40; ++t) {
    CHECK(trace.noise_at(t, 0).imag() == 0.0);
    CHECK(trace.noise_at(t, 128).imag() == 0.0);
  }
}

TEST_CASE("pulse neighborhoods are symmetric for a static filter") {
  SynthConfig cfg;
  const AcousticFeatures f = flat_features(30, 125.0, 1.0, -1.5);
  const Waveform y = synthesize(f, cfg);
  // Period is exactly one hop, so pulses sit at 127 + 128*k; pick one in
  // the middle and compare mirrored samples.
  const std::size_t center = 127 + 128 * 10;
  for (int j = 1; j <= 100; ++j) {
    CHECK(y.samples[center + j] ==
          doctest::Approx(y.samples[center - j]).epsilon(1e-10));
  }
}

TEST_CASE("floor-level envelope renders near silence") {
  SynthConfig cfg;
  const AcousticFeatures f = flat_features(30, 150.0, 0.5, std::log(1e-5));
  const Waveform y = synthesize(f, cfg);
  CHECK(rms(y.samples) < 1e-3);
}

TEST_CASE("copy synthesis preserves the pitch track") {
  const FrameConfig frame;
  const Waveform saw = sawtooth(220.0, 1.0, frame.sample_rate, 0.4);
  const AcousticFeatures f = analyze(saw, frame, F0Config{});
  SynthConfig cfg;
  const Waveform resynth = synthesize(f, cfg);
  const AcousticFeatures g = analyze(resynth, frame, F0Config{});

  std::size_t checked = 0, good = 0;
  for (std::size_t t = 5; t + 5 < g.num_frames(); ++t) {
    if (f.f0[t] <= 0.0) continue;
    ++checked;
    if (g.f0[t] > 0.0 && std::abs(g.f0[t] - 220.0) <= 2.0) ++good;
  }
  REQUIRE(checked > 50);
  CHECK(static_cast<double>(good) / checked >= 0.9);
}

TEST_CASE("stream rejects misuse") {
  SynthConfig cfg;
  StreamingSynthesizer stream(cfg);
  const std::vector<double> ok(129, 0.5);
  const std::vector<double> wrong(64, 0.5);
  CHECK_THROWS_AS(stream.push(100.0, wrong, ok), std::invalid_argument);
  CHECK_THROWS_AS(stream.push(-5.0, ok, ok), std::invalid_argument);
  CHECK_NOTHROW(stream.push(100.0, ok, ok));
  stream.flush();
  CHECK_THROWS_AS(stream.push(100.0, ok, ok), std::invalid_argument);

  const AcousticFeatures f = random_features(5, 11);
  SynthConfig wrong_rate;
  wrong_rate.frame.sample_rate = 8000;
  CHECK_THROWS_AS(synthesize(f, wrong_rate), std::invalid_argument);
}
