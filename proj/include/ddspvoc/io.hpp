// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef DDSPVOC_IO_HPP_
#define DDSPVOC_IO_HPP_

#include <filesystem>

#include "ddspvoc/analysis.hpp"
#include "ddspvoc/loss.hpp"
#include "ddspvoc/types.hpp"

namespace ddspvoc {

enum class WavEncoding { kPcm16, kFloat32 };

// Mono RIFF/WAVE reader for PCM16 and IEEE float32. PCM16 samples are
// normalized by 32768. Multichannel files, unknown codecs, and truncated
// chunks raise FormatError.
Waveform read_wav(const std::filesystem::path& path);

// Writes a mono WAV file. PCM16 clamps to [-1, 1], scales by 32768, rounds
// half away from zero, and saturates at the int16 limits. All writers in
// this module go through a temp file in the target directory and rename on
// success, so failures never leave partial output at `path`.
void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::kFloat32);

// Binary feature file, little-endian:
//   magic "DDSPFEAT", u16 version=1, u32 sample_rate, u32 hop, u32 T,
//   u16 envelope_bands=80, u16 periodicity_bands=12,
//   then float32 payload: f0[T], periodicity[T][12], envelope[T][80],
//   all row-major. Values round-trip bit-exactly once quantized to float32.
void write_features(const std::filesystem::path& path,
                    const AcousticFeatures& features);
AcousticFeatures read_features(const std::filesystem::path& path);

// CSV of per-band discriminator scores: one "band,score" row per band with
// 1-based band indices, each band exactly once; a header row is permitted.
DiscriminatorScores read_scores_csv(const std::filesystem::path& path,
                                    int expected_bands);

}  // namespace ddspvoc

#endif  // DDSPVOC_IO_HPP_
