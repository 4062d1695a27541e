// Copyright 2026 ddspvoc authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "ddspvoc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ddspvoc/errors.hpp"

namespace ddspvoc {

namespace {

constexpr char kFeatureMagic[8] = {'D', 'D', 'S', 'P', 'F', 'E', 'A', 'T'};
constexpr std::uint16_t kFeatureVersion = 1;
constexpr std::uint32_t kMaxFrames = 1u << 26;  // allocation sanity bound

// All on-disk integers and floats are little-endian regardless of host.
void put_u16(std::string* out, std::uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string* out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_i16(std::string* out, std::int16_t v) {
  put_u16(out, static_cast<std::uint16_t>(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& what)
      : bytes_(bytes), what_(what) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(u(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
  std::int16_t i16() { return static_cast<std::int16_t>(u16()); }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t pos() const { return pos_; }
  void seek(std::size_t p) { pos_ = p; }

 private:
  std::uint64_t u(int width) {
    need(width);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += width;
    return v;
  }

  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(what_ + ": truncated file");
    }
  }

  const std::string& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

// Write-to-temp, rename-on-success. The temp file lives next to the target
// so the rename stays within one filesystem.
void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw FormatError("cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw FormatError("short write to " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw FormatError("cannot rename " + tmp.string() + " to " + path.string() +
                      ": " + ec.message());
  }
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  Reader r(bytes, "read_wav(" + path.string() + ")");
  if (r.raw(4) != "RIFF") {
    throw FormatError("read_wav(" + path.string() + "): missing RIFF header");
  }
  r.u32();  // declared riff size; trust actual file length instead
  if (r.raw(4) != "WAVE") {
    throw FormatError("read_wav(" + path.string() + "): not a WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  std::size_t data_pos = 0, data_size = 0;
  while (r.remaining() >= 8) {
    const std::string id = r.raw(4);
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) {
        throw FormatError("read_wav(" + path.string() + "): short fmt chunk");
      }
      const std::size_t chunk_start = r.pos();
      format = r.u16();
      channels = r.u16();
      sample_rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      r.seek(chunk_start);
      r.skip(size + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      data_pos = r.pos();
      data_size = size;
      r.skip(size + (size & 1));
    } else {
      r.skip(size + (size & 1));
    }
  }
  if (!have_fmt || data_pos == 0) {
    throw FormatError("read_wav(" + path.string() + "): missing fmt or data chunk");
  }
  if (channels != 1) {
    throw FormatError("read_wav(" + path.string() + "): only mono supported, got " +
                      std::to_string(channels) + " channels");
  }
  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) {
    throw FormatError("read_wav(" + path.string() +
                      "): unsupported encoding (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bit)");
  }
  const std::size_t sample_bytes = pcm16 ? 2 : 4;
  if (data_size == 0 || data_size % sample_bytes != 0) {
    throw FormatError("read_wav(" + path.string() + "): bad data chunk size");
  }

  Waveform wave;
  wave.sample_rate = static_cast<int>(sample_rate);
  wave.samples.resize(data_size / sample_bytes);
  Reader d(bytes, "read_wav(" + path.string() + ")");
  d.seek(data_pos);
  for (auto& s : wave.samples) {
    if (pcm16) {
      s = d.i16() / 32768.0;
    } else {
      const float v = d.f32();
      if (!std::isfinite(v)) {
        throw FormatError("read_wav(" + path.string() + "): non-finite sample");
      }
      s = v;
    }
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding) {
  wave.validate();
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint32_t sample_bytes = pcm16 ? 2 : 4;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(wave.samples.size()) * sample_bytes;

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  put_u32(&out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  put_u32(&out, 16);
  put_u16(&out, pcm16 ? 1 : 3);
  put_u16(&out, 1);  // mono
  put_u32(&out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(&out, static_cast<std::uint32_t>(wave.sample_rate) * sample_bytes);
  put_u16(&out, static_cast<std::uint16_t>(sample_bytes));
  put_u16(&out, pcm16 ? 16 : 32);
  out += "data";
  put_u32(&out, data_size);
  for (double s : wave.samples) {
    if (pcm16) {
      const double clamped = std::clamp(s, -1.0, 1.0);
      const long scaled = std::lround(clamped * 32768.0);
      put_i16(&out, static_cast<std::int16_t>(std::clamp(scaled, -32768L, 32767L)));
    } else {
      put_f32(&out, static_cast<float>(s));
    }
  }
  if (data_size & 1) out.push_back('\0');
  atomic_write(path, out);
}

void write_features(const std::filesystem::path& path,
                    const AcousticFeatures& features) {
  features.validate();
  const std::uint32_t t = static_cast<std::uint32_t>(features.num_frames());
  std::string out;
  out.append(kFeatureMagic, sizeof(kFeatureMagic));
  put_u16(&out, kFeatureVersion);
  put_u32(&out, static_cast<std::uint32_t>(features.config.sample_rate));
  put_u32(&out, static_cast<std::uint32_t>(features.config.hop));
  put_u32(&out, t);
  put_u16(&out, kEnvelopeBands);
  put_u16(&out, kPeriodicityBands);
  for (std::uint32_t i = 0; i < t; ++i) {
    put_f32(&out, static_cast<float>(features.f0[i]));
  }
  for (std::size_t i = 0; i < features.periodicity.size(); ++i) {
    put_f32(&out, static_cast<float>(features.periodicity.data()[i]));
  }
  for (std::size_t i = 0; i < features.envelope_logmel.size(); ++i) {
    put_f32(&out, static_cast<float>(features.envelope_logmel.data()[i]));
  }
  atomic_write(path, out);
}

AcousticFeatures read_features(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  const std::string what = "read_features(" + path.string() + ")";
  Reader r(bytes, what);
  if (r.raw(8) != std::string(kFeatureMagic, sizeof(kFeatureMagic))) {
    throw FormatError(what + ": bad magic");
  }
  const std::uint16_t version = r.u16();
  if (version != kFeatureVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t sample_rate = r.u32();
  const std::uint32_t hop = r.u32();
  const std::uint32_t t = r.u32();
  const std::uint16_t env_bands = r.u16();
  const std::uint16_t per_bands = r.u16();
  if (env_bands != kEnvelopeBands || per_bands != kPeriodicityBands) {
    throw FormatError(what + ": dimension mismatch, expected " +
                      std::to_string(kEnvelopeBands) + "/" +
                      std::to_string(kPeriodicityBands) + " bands, got " +
                      std::to_string(env_bands) + "/" + std::to_string(per_bands));
  }
  if (sample_rate == 0 || hop == 0 || t > kMaxFrames) {
    throw FormatError(what + ": implausible header values");
  }

  AcousticFeatures features;
  features.config.sample_rate = static_cast<int>(sample_rate);
  features.config.hop = static_cast<int>(hop);
  features.f0.resize(t);
  features.periodicity = Matrix(t, kPeriodicityBands);
  features.envelope_logmel = Matrix(t, kEnvelopeBands);
  for (std::uint32_t i = 0; i < t; ++i) features.f0[i] = r.f32();
  for (std::size_t i = 0; i < features.periodicity.size(); ++i) {
    features.periodicity.data()[i] = r.f32();
  }
  for (std::size_t i = 0; i < features.envelope_logmel.size(); ++i) {
    features.envelope_logmel.data()[i] = r.f32();
  }
  if (r.remaining() != 0) {
    throw FormatError(what + ": trailing bytes after payload");
  }
  try {
    features.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(what + ": " + e.what());
  }
  return features;
}

DiscriminatorScores read_scores_csv(const std::filesystem::path& path,
                                    int expected_bands) {
  const std::string bytes = slurp(path);
  const std::string what = "read_scores_csv(" + path.string() + ")";
  DiscriminatorScores out;
  out.scores.assign(expected_bands, 0.0);
  std::vector<bool> seen(expected_bands, false);

  std::istringstream stream(bytes);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(what + ": line " + std::to_string(line_no) +
                        " has no comma");
    }
    const std::string key = line.substr(0, comma);
    const std::string value = line.substr(comma + 1);
    std::size_t used = 0;
    int band;
    try {
      band = std::stoi(key, &used);
    } catch (const std::exception&) {
      if (line_no == 1) continue;  // header row
      throw FormatError(what + ": bad band index on line " + std::to_string(line_no));
    }
    if (used != key.size()) {
      if (line_no == 1) continue;
      throw FormatError(what + ": bad band index on line " + std::to_string(line_no));
    }
    if (band < 1 || band > expected_bands) {
      throw FormatError(what + ": band " + std::to_string(band) +
                        " outside 1.." + std::to_string(expected_bands));
    }
    if (seen[band - 1]) {
      throw FormatError(what + ": duplicate band " + std::to_string(band));
    }
    double score;
    try {
      score = std::stod(value, &used);
    } catch (const std::exception&) {
      throw FormatError(what + ": bad score on line " + std::to_string(line_no));
    }
    if (used != value.size() || !std::isfinite(score)) {
      throw FormatError(what + ": bad score on line " + std::to_string(line_no));
    }
    seen[band - 1] = true;
    out.scores[band - 1] = score;
  }
  for (int k = 0; k < expected_bands; ++k) {
    if (!seen[k]) {
      throw FormatError(what + ": missing band " + std::to_string(k + 1));
    }
  }
  return out;
}

}  // namespace ddspvoc
