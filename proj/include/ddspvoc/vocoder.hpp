// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_VOCODER_HPP_
#define DDSPVOC_VOCODER_HPP_

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/signal.hpp"
#include "ddspvoc/types.hpp"

namespace ddspvoc {

// How F0 is read while generating pulses for the hop segment
// [t*hop, (t+1)*hop).
enum class F0Interp {
  kHold,    // constant f0[t] across the segment; one hop of stream latency
  kLinear,  // ramp from f0[t] to f0[t+1]; costs one extra hop of latency
};

// How excitation signals are scaled before filtering. Pulse trains and
// noise share one rule so the periodicity split trades energy one for one.
enum class ExcitationNorm { kPerFrameRms };

struct SynthConfig {
  FrameConfig frame;
  std::uint64_t noise_seed = 0;
  F0Interp f0_interp = F0Interp::kHold;
  ExcitationNorm excitation_norm = ExcitationNorm::kPerFrameRms;

  // Requires a valid frame config with fft_size == 2 * hop: the zero-phase
  // responses span one hop to each side and the noise grain window is
  // power-complementary at half overlap only for that ratio.
  void validate() const;
};

// Zero-phase magnitude responses for the two excitation paths, each
// num_frames x (fft_size/2 + 1):
//   periodic_mag  = envelope .* periodicity upsampled to bins
//   aperiodic_mag = envelope .* (1 - periodicity upsampled to bins)
struct FrameFilters {
  Matrix periodic_mag;
  Matrix aperiodic_mag;
};

// Per-frame spectral envelope on linear bins: exp of the log-mel envelope
// mapped through the filterbank pseudo-inverse, clamped at zero.
Matrix linear_envelope(const AcousticFeatures& features, const MelFilterbank& fb80);

// Per-bin periodicity: triangle-weighted interpolation of the band values,
// normalized by each bin's total triangle weight. Stays within [0, 1].
Matrix upsample_periodicity(const Matrix& periodicity, const MelFilterbank& fb12,
                            int num_bins);

FrameFilters make_frame_filters(const AcousticFeatures& features,
                                const MelFilterbank& fb80,
                                const MelFilterbank& fb12);

// Square root of the periodic Hann window, sin(pi*j/fft_size): the noise
// grain taper. Squares of two copies half an fft apart sum to one, so
// overlapped grains keep constant noise power.
std::vector<double> noise_grain_window(int fft_size);

// One excitation pulse: output sample index, amplitude, and the frame whose
// periodic response shapes it.
struct ImpulseEvent {
  long long position = 0;
  double amplitude = 0.0;
  std::size_t frame = 0;
};

// Pulse train for hop segments t in [0, f0.size()): a phase accumulator
// advances by f0/sample_rate per sample and emits a pulse on each wrap;
// unvoiced segments freeze the phase. Pulses of a segment share the
// amplitude sqrt(hop / count), which makes each voiced segment's excitation
// unit-RMS.
std::vector<ImpulseEvent> impulse_train(std::span<const double> f0,
                                        const SynthConfig& cfg);

// Everything stochastic or position-dependent the synthesis consumed, enough
// to replay its linear signal path exactly: pulse events plus the unfiltered
// per-frame noise spectra (num_frames x num_bins, non-negative-frequency
// half; DC and Nyquist entries are real).
struct SynthTrace {
  std::vector<ImpulseEvent> impulses;
  std::vector<std::complex<double>> noise_spectra;
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;

  std::complex<double> noise_at(std::size_t frame, std::size_t bin) const {
    return noise_spectra[frame * num_bins + bin];
  }
};

struct SynthResult {
  Waveform mix;        // periodic + aperiodic, sample-wise
  Waveform periodic;
  Waveform aperiodic;
};

// Fixed-latency streaming core. Feed one frame per push; every push returns
// exactly `hop` samples, delayed by latency_hops() hops: the first
// latency_hops() pushes return warm-up output from before sample zero, and
// push t >= latency returns samples [(t - latency)*hop, (t - latency + 1)*hop).
// flush() emits the last latency_hops() hops, after which the stream is
// closed. Output is deterministic in (config, noise_seed, inputs) alone.
class StreamingSynthesizer {
 public:
  explicit StreamingSynthesizer(const SynthConfig& cfg);

  int latency_hops() const { return latency_; }
  std::size_t frames_pushed() const { return frames_pushed_; }

  struct Chunk {
    std::vector<double> mix;
    std::vector<double> periodic;
    std::vector<double> aperiodic;
  };

  Chunk push_parts(double f0, std::span<const double> periodic_mag,
                   std::span<const double> aperiodic_mag);
  std::vector<double> push(double f0, std::span<const double> periodic_mag,
                           std::span<const double> aperiodic_mag);
  Chunk flush_parts();
  std::vector<double> flush();

  // Optional event sink; set before the first push. The trace records pulse
  // positions in output coordinates and one noise spectrum per frame.
  void record_to(SynthTrace* trace);

 private:
  void generate_pulses(std::size_t segment, double f_start, double f_end,
                       std::span<const double> periodic_mag);
  void place_grain(std::size_t frame, std::span<const double> aperiodic_mag);
  void scatter_kernel(long long center, double amplitude,
                      std::span<const double> taps, std::vector<double>* buf);
  Chunk emit_hops(int hops);

  SynthConfig cfg_;
  int latency_ = 1;
  int half_ = 0;  // fft_size / 2 == hop
  std::vector<double> grain_window_;
  std::size_t frames_pushed_ = 0;
  bool flushed_ = false;
  double phase_ = 0.0;
  std::mt19937_64 rng_;
  SynthTrace* trace_ = nullptr;

  // Accumulation buffers over absolute sample indices [base_, base_ + size).
  long long base_ = 0;
  std::vector<double> periodic_buf_;
  std::vector<double> noise_buf_;

  // Previous frame, needed only for linear F0 interpolation.
  double prev_f0_ = 0.0;
  std::vector<double> prev_periodic_mag_;
};

// Offline render of (num_frames - 1) * hop samples through the streaming
// core: analysis of N samples yields floor(N/hop) + 1 frames, and this
// inverts that frame count to a whole number of hops.
Waveform synthesize(const AcousticFeatures& features, const SynthConfig& cfg);
SynthResult synthesize_parts(const AcousticFeatures& features,
                             const SynthConfig& cfg);

// Offline render from precomputed filters, optionally recording a trace.
SynthResult synthesize_filters(std::span<const double> f0,
                               const FrameFilters& filters,
                               const SynthConfig& cfg,
                               SynthTrace* trace = nullptr);

}  // namespace ddspvoc

#endif  // DDSPVOC_VOCODER_HPP_
