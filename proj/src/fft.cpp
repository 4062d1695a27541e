// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ddspvoc {

namespace {

bool is_pow2(int n) { return n >= 1 && (n & (n - 1)) == 0; }

}  // namespace

Fft::Fft(int n) : n_(n) {
  if (!is_pow2(n) || n < 2) {
    throw std::invalid_argument("Fft: size must be a power of two >= 2, got " +
                                std::to_string(n));
  }
  log2n_ = 0;
  while ((1 << log2n_) < n) ++log2n_;
  twiddle_.resize(n / 2);
  for (int k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * k / n;
    twiddle_[k] = {std::cos(angle), std::sin(angle)};
  }
}

void Fft::transform(std::span<std::complex<double>> data, bool inverse) const {
  if (static_cast<int>(data.size()) != n_) {
    throw std::invalid_argument("Fft: buffer size does not match transform size");
  }
  // Bit-reversal permutation.
  for (int i = 1, j = 0; i < n_; ++i) {
    int bit = n_ >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  // Iterative butterflies; stage `len` reads every (n/len)-th twiddle.
  for (int len = 2; len <= n_; len <<= 1) {
    const int stride = n_ / len;
    for (int i = 0; i < n_; i += len) {
      for (int j = 0; j < len / 2; ++j) {
        std::complex<double> w = twiddle_[j * stride];
        if (inverse) w = std::conj(w);
        const std::complex<double> u = data[i + j];
        const std::complex<double> v = data[i + j + len / 2] * w;
        data[i + j] = u + v;
        data[i + j + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / n_;
    for (auto& value : data) value *= scale;
  }
}

std::vector<std::complex<double>> rfft(std::span<const double> x, int fft_size) {
  const Fft plan(fft_size);
  std::vector<std::complex<double>> buf(fft_size);
  const std::size_t count =
      std::min(x.size(), static_cast<std::size_t>(fft_size));
  for (std::size_t n = 0; n < count; ++n) buf[n] = x[n];
  plan.transform(buf, false);
  buf.resize(fft_size / 2 + 1);
  return buf;
}

std::vector<double> irfft(std::span<const std::complex<double>> bins, int fft_size) {
  const int half = fft_size / 2;
  if (static_cast<int>(bins.size()) != half + 1) {
    throw std::invalid_argument("irfft: expected fft_size/2 + 1 bins");
  }
  const Fft plan(fft_size);
  std::vector<std::complex<double>> buf(fft_size);
  buf[0] = {bins[0].real(), 0.0};
  buf[half] = {bins[half].real(), 0.0};
  for (int k = 1; k < half; ++k) {
    buf[k] = bins[k];
    buf[fft_size - k] = std::conj(bins[k]);
  }
  plan.transform(buf, true);
  std::vector<double> out(fft_size);
  for (int n = 0; n < fft_size; ++n) out[n] = buf[n].real();
  return out;
}

std::vector<double> rfft_adjoint(std::span<const std::complex<double>> cotangent,
                                 int fft_size) {
  const int half = fft_size / 2;
  if (static_cast<int>(cotangent.size()) != half + 1) {
    throw std::invalid_argument("rfft_adjoint: expected fft_size/2 + 1 bins");
  }
  // out[m] = sum_k Re(g_k * exp(+i 2 pi k m / n)); feeding conj(g) through a
  // forward transform evaluates exactly that sum in its real part.
  const Fft plan(fft_size);
  std::vector<std::complex<double>> buf(fft_size);
  for (int k = 0; k <= half; ++k) buf[k] = std::conj(cotangent[k]);
  plan.transform(buf, false);
  std::vector<double> out(fft_size);
  for (int m = 0; m < fft_size; ++m) out[m] = buf[m].real();
  return out;
}

}  // namespace ddspvoc
