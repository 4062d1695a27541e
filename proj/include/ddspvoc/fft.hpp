// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_FFT_HPP_
#define DDSPVOC_FFT_HPP_

#include <complex>
#include <span>
#include <vector>

namespace ddspvoc {

// Radix-2 complex FFT for power-of-two sizes. The twiddle table is built
// at construction, so instances are immutable after that and safe to share
// across threads for concurrent transform() calls.
class Fft {
 public:
  // Throws std::invalid_argument unless n is a power of two >= 2.
  explicit Fft(int n);

  int size() const { return n_; }

  // In-place transform of data.size() == n. Inverse applies the 1/n scale.
  void transform(std::span<std::complex<double>> data, bool inverse) const;

 private:
  int n_;
  int log2n_;
  std::vector<std::complex<double>> twiddle_;  // exp(-2*pi*i*k/n), k < n/2
};

// Forward real FFT: returns bins 0..fft_size/2 of the DFT of x zero-padded
// (or truncated) to fft_size samples.
std::vector<std::complex<double>> rfft(std::span<const double> x, int fft_size);

// Inverse of rfft for a Hermitian-implied half spectrum of fft_size/2 + 1
// bins. bins[0] and bins[fft_size/2] are treated as real.
std::vector<double> irfft(std::span<const std::complex<double>> bins, int fft_size);

// Adjoint of rfft viewed as a real-linear map: carries cotangents of the
// one-sided spectrum (real and imaginary parts treated as independent
// coordinates) back to the time domain, so that
//   dot(real(g), real(rfft(x))) + dot(imag(g), imag(rfft(x)))
//     == dot(rfft_adjoint(g, n), x)
// for every x of length n. This is not irfft: there is no 1/n scale and no
// doubling of interior bins.
std::vector<double> rfft_adjoint(std::span<const std::complex<double>> cotangent,
                                 int fft_size);

}  // namespace ddspvoc

#endif  // DDSPVOC_FFT_HPP_
