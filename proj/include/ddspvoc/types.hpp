// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_TYPES_HPP_
#define DDSPVOC_TYPES_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace ddspvoc {

// Dense row-major matrix of doubles. Row index is time (frames), column
// index is frequency (bins or bands) throughout the library.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class WindowKind { kHann };

// Framing parameters shared by analysis and synthesis. The defaults are
// the library-wide operating point: 16 kHz audio, 256-point FFT (129 bins),
// 8 ms hop, window length equal to the FFT size.
struct FrameConfig {
  int sample_rate = 16000;
  int fft_size = 256;
  int hop = 128;
  int window_len = 256;
  WindowKind window = WindowKind::kHann;

  int num_bins() const { return fft_size / 2 + 1; }
  double hop_seconds() const {
    return static_cast<double>(hop) / static_cast<double>(sample_rate);
  }

  // Throws std::invalid_argument when the configuration is unusable:
  // non-positive sizes, hop > window_len, window_len > fft_size,
  // fft_size not a power of two, or a degenerate (all-zero) window.
  void validate() const;
};

// Number of frames produced for a signal of `num_samples` samples under
// centered framing: floor(num_samples / hop) + 1.
std::size_t num_frames_for(std::size_t num_samples, const FrameConfig& cfg);

// Mono waveform. Samples are doubles in nominal [-1, 1]; nothing clips
// until PCM serialization.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }

  // Throws std::invalid_argument on non-positive rate or non-finite samples.
  void validate() const;
};

}  // namespace ddspvoc

#endif  // DDSPVOC_TYPES_HPP_
