// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_SIGNAL_HPP_
#define DDSPVOC_SIGNAL_HPP_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "ddspvoc/types.hpp"

namespace ddspvoc {

// Window coefficients for `kind` with `window_len` taps. Hann is the
// periodic variant, 0.5 - 0.5*cos(2*pi*n/window_len), which sums to a
// constant when overlapped at half the window length.
std::vector<double> make_window(WindowKind kind, int window_len);

// Reflected ("bounce") index into [0, size) without repeating the edge
// sample; this is the padding rule used by centered framing.
std::size_t reflect_index(long long index, std::size_t size);

// Complex STFT frames, row-major [frame][bin], bins 0..fft_size/2.
// num_samples records the signal length the framing covered so that
// istft can reproduce it exactly.
struct ComplexSpectrogram {
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  std::vector<std::complex<double>> data;
  FrameConfig config;
  std::size_t num_samples = 0;

  std::complex<double>& at(std::size_t frame, std::size_t bin) {
    return data[frame * num_bins + bin];
  }
  std::complex<double> at(std::size_t frame, std::size_t bin) const {
    return data[frame * num_bins + bin];
  }
};

struct MagnitudeSpectrogram {
  Matrix frames;  // T x num_bins
  FrameConfig config;
};

// Centered analysis: the signal is reflect-padded by window_len/2 on each
// side, frame t starts at t*hop in padded coordinates, and
// floor(num_samples/hop) + 1 frames are produced. Throws
// std::invalid_argument on an empty signal or invalid config.
ComplexSpectrogram stft(const Waveform& wave, const FrameConfig& cfg);

// Weighted overlap-add inverse: each inverse-transformed frame is
// multiplied by the window, accumulated at its frame position, and the
// sum is divided by the accumulated squared window. Output length is
// spec.num_samples. Throws std::invalid_argument for configurations whose
// overlapped squared window vanishes somewhere in the steady state.
Waveform istft(const ComplexSpectrogram& spec);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank together with the regularized pseudo-inverse
// used to map band energies back to linear bins. Triangle peaks are
// equally spaced on the mel scale between f_min and f_max; each row is the
// triangle averaged over every bin's frequency cell so that even bands
// narrower than one bin keep support (point sampling would leave rows of
// zeros at 80 bands over 129 bins).
class MelFilterbank {
 public:
  const Matrix& weights() const { return weights_; }          // M x F
  const Matrix& pseudo_inverse() const { return pinv_; }      // F x M
  int num_bands() const { return static_cast<int>(weights_.rows()); }
  int num_bins() const { return static_cast<int>(weights_.cols()); }
  double f_min() const { return f_min_; }
  double f_max() const { return f_max_; }
  int sample_rate() const { return sample_rate_; }

  // Triangle geometry in Hz: peak and support edges of `band`.
  double center_hz(int band) const { return grid_hz_[band + 1]; }
  double lower_edge_hz(int band) const { return grid_hz_[band]; }
  double upper_edge_hz(int band) const { return grid_hz_[band + 2]; }

 private:
  friend MelFilterbank make_mel_filterbank(const FrameConfig&, int, double, double);
  Matrix weights_;
  Matrix pinv_;
  std::vector<double> grid_hz_;  // M + 2 triangle grid points
  double f_min_ = 0.0;
  double f_max_ = 0.0;
  int sample_rate_ = 0;
};

// Builds the filterbank and its Tikhonov-regularized pseudo-inverse
// (lambda = 1e-8). Throws std::invalid_argument for n_mels < 1 or a
// frequency range outside (0, sample_rate/2].
MelFilterbank make_mel_filterbank(const FrameConfig& cfg, int n_mels,
                                  double f_min, double f_max);

// Band energies: frames * weights^T. Shapes must agree with the bank.
Matrix mel_project(const Matrix& bin_frames, const MelFilterbank& fb);
Matrix mel_project(const MagnitudeSpectrogram& mag, const MelFilterbank& fb);

// Least-squares mapping of band energies back to linear bins, clamped at
// zero. Input must be non-negative.
Matrix mel_to_linear(const Matrix& mel_frames, const MelFilterbank& fb);

}  // namespace ddspvoc

#endif  // DDSPVOC_SIGNAL_HPP_
