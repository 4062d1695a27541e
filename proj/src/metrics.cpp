// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/errors.hpp"

namespace ddspvoc {
namespace {

double energy(std::span<const double> samples) {
  double acc = 0.0;
  for (double s : samples) acc += s * s;
  return acc;
}

}  // namespace

MccSequence mcc(const Waveform& wave, const FrameConfig& cfg, int num_coeffs) {
  cfg.validate();
  if (num_coeffs < 1 || num_coeffs >= kEnvelopeBands) {
    throw std::invalid_argument("mcc: num_coeffs must lie in [1, 79]");
  }
  const MelFilterbank fb80 = make_envelope_bank(cfg);
  const Matrix logmel = extract_envelope(wave, cfg, fb80);
  const std::size_t t_frames = logmel.rows();
  const std::size_t bands = logmel.cols();

  // Orthonormal DCT-II basis for coefficients 1..num_coeffs.
  Matrix basis(static_cast<std::size_t>(num_coeffs), bands);
  const double scale = std::sqrt(2.0 / static_cast<double>(bands));
  for (int k = 1; k <= num_coeffs; ++k) {
    for (std::size_t n = 0; n < bands; ++n) {
      basis(k - 1, n) =
          scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) /
                           (2.0 * static_cast<double>(bands)));
    }
  }
  MccSequence out;
  out.sample_rate = cfg.sample_rate;
  out.hop = cfg.hop;
  out.frames = Matrix(t_frames, static_cast<std::size_t>(num_coeffs));
  for (std::size_t t = 0; t < t_frames; ++t) {
    for (std::size_t k = 0; k < static_cast<std::size_t>(num_coeffs); ++k) {
      double acc = 0.0;
      for (std::size_t n = 0; n < bands; ++n) {
        acc += basis(k, n) * logmel(t, n);
      }
      out.frames(t, k) = acc;
    }
  }
  return out;
}

DtwPath dtw_align(const Matrix& costs) {
  const std::size_t rows = costs.rows();
  const std::size_t cols = costs.cols();
  if (rows == 0 || cols == 0) {
    throw std::invalid_argument("dtw_align: empty cost matrix");
  }
  const double inf = std::numeric_limits<double>::infinity();
  Matrix acc(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double up = i > 0 ? acc(i - 1, j) : inf;
      const double left = j > 0 ? acc(i, j - 1) : inf;
      const double diag = (i > 0 && j > 0) ? acc(i - 1, j - 1) : inf;
      double best = std::min({diag, up, left});
      if (i == 0 && j == 0) best = 0.0;
      acc(i, j) = costs(i, j) + best;
    }
  }

  DtwPath path;
  std::size_t i = rows - 1;
  std::size_t j = cols - 1;
  path.pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    const double up = i > 0 ? acc(i - 1, j) : inf;
    const double left = j > 0 ? acc(i, j - 1) : inf;
    const double diag = (i > 0 && j > 0) ? acc(i - 1, j - 1) : inf;
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    path.pairs.emplace_back(i, j);
  }
  std::reverse(path.pairs.begin(), path.pairs.end());
  path.total_cost = acc(rows - 1, cols - 1);
  path.mean_cost = path.total_cost / static_cast<double>(path.pairs.size());
  return path;
}

double mcd_from_mcc(const MccSequence& estimate, const MccSequence& reference) {
  if (estimate.frames.rows() == 0 || reference.frames.rows() == 0) {
    throw std::invalid_argument("mcd_from_mcc: empty coefficient sequence");
  }
  if (estimate.frames.cols() != reference.frames.cols()) {
    throw std::invalid_argument(
        "mcd_from_mcc: coefficient counts must match");
  }
  const std::size_t rows = estimate.frames.rows();
  const std::size_t cols = reference.frames.rows();
  const std::size_t dims = estimate.frames.cols();
  Matrix costs(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < dims; ++k) {
        const double d = estimate.frames(i, k) - reference.frames(j, k);
        acc += d * d;
      }
      costs(i, j) = std::sqrt(acc);
    }
  }
  return kMcdScale * dtw_align(costs).mean_cost;
}

double mcd_dtw(const Waveform& estimate, const Waveform& reference,
               const FrameConfig& cfg) {
  return mcd_from_mcc(mcc(estimate, cfg), mcc(reference, cfg));
}

double spectrogram_ssim(const Waveform& estimate, const Waveform& reference,
                        const FrameConfig& cfg) {
  cfg.validate();
  if (estimate.samples.size() != reference.samples.size() ||
      estimate.sample_rate != reference.sample_rate) {
    throw std::invalid_argument(
        "spectrogram_ssim: waveforms must match in length and rate");
  }
  const MelFilterbank fb80 = make_envelope_bank(cfg);
  Matrix a = extract_envelope(estimate, cfg, fb80);
  Matrix b = extract_envelope(reference, cfg, fb80);
  constexpr int kWin = 7;
  if (a.rows() < kWin) {
    throw std::invalid_argument("spectrogram_ssim: needs at least 7 frames");
  }

  // Joint normalization to [0, 1] so the stabilizers share one scale and a
  // global gain applied to both signals cancels.
  double lo = a.data()[0];
  double hi = a.data()[0];
  for (std::size_t i = 0; i < a.size(); ++i) {
    lo = std::min(lo, a.data()[i]);
    hi = std::max(hi, a.data()[i]);
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    lo = std::min(lo, b.data()[i]);
    hi = std::max(hi, b.data()[i]);
  }
  if (hi == lo) return 1.0;  // both images are one constant
  const double range = hi - lo;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a.data()[i] = (a.data()[i] - lo) / range;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.data()[i] = (b.data()[i] - lo) / range;
  }

  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  constexpr double kInvArea = 1.0 / (kWin * kWin);
  double sum = 0.0;
  std::size_t windows = 0;
  for (std::size_t t0 = 0; t0 + kWin <= a.rows(); ++t0) {
    for (std::size_t b0 = 0; b0 + kWin <= a.cols(); ++b0) {
      double ma = 0.0, mb = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (int dt = 0; dt < kWin; ++dt) {
        for (int db = 0; db < kWin; ++db) {
          const double va = a(t0 + dt, b0 + db);
          const double vb = b(t0 + dt, b0 + db);
          ma += va;
          mb += vb;
          aa += va * va;
          bb += vb * vb;
          ab += va * vb;
        }
      }
      ma *= kInvArea;
      mb *= kInvArea;
      const double var_a = aa * kInvArea - ma * ma;
      const double var_b = bb * kInvArea - mb * mb;
      const double cov = ab * kInvArea - ma * mb;
      const double num = (2.0 * ma * mb + kC1) * (2.0 * cov + kC2);
      const double den = (ma * ma + mb * mb + kC1) * (var_a + var_b + kC2);
      sum += num / den;
      ++windows;
    }
  }
  return sum / static_cast<double>(windows);
}

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise,
                    double snr_db) {
  if (clean.samples.empty()) {
    throw std::invalid_argument("mix_at_snr: clean signal is empty");
  }
  if (noise.samples.size() < clean.samples.size()) {
    throw std::invalid_argument(
        "mix_at_snr: noise must be at least as long as the clean signal");
  }
  if (clean.sample_rate != noise.sample_rate) {
    throw std::invalid_argument("mix_at_snr: sample rates must match");
  }
  const std::size_t n = clean.samples.size();
  const double e_clean = energy(clean.samples);
  const double e_noise = energy({noise.samples.data(), n});
  if (e_clean <= 0.0) throw NumericError("mix_at_snr: zero-energy clean");
  if (e_noise <= 0.0) throw NumericError("mix_at_snr: zero-energy noise");
  if (snr_db >= 100.0) return clean;  // effectively noiseless

  const double g =
      std::sqrt(e_clean / e_noise) * std::pow(10.0, -snr_db / 20.0);
  Waveform out;
  out.sample_rate = clean.sample_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.samples[i] = clean.samples[i] + g * noise.samples[i];
  }
  return out;
}

double measured_snr(const Waveform& mix, const Waveform& clean) {
  if (mix.samples.size() != clean.samples.size() ||
      mix.sample_rate != clean.sample_rate) {
    throw std::invalid_argument(
        "measured_snr: waveforms must match in length and rate");
  }
  double e_res = 0.0;
  for (std::size_t i = 0; i < mix.samples.size(); ++i) {
    const double d = mix.samples[i] - clean.samples[i];
    e_res += d * d;
  }
  if (e_res == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(energy(clean.samples) / e_res);
}

}  // namespace ddspvoc
