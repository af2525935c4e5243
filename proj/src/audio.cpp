#include "vac/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vac/dsp/resample.hpp"
#include "vac/error.hpp"

namespace vac::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) throw Error(ErrorCode::MalformedContainer, "unexpected end of WAV data");
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
    pos_ += 4;
    return v;
  }
  std::string tag() {
    need(4);
    std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::unassigned: return "unassigned";
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  if (text.empty() || text == "unassigned") return Split::unassigned;
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + std::string(text) + "'");
}

std::string Clip::id() const { return source_id + "#" + std::to_string(chunk_index); }

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 12 || r.tag() != "RIFF")
    throw Error(ErrorCode::MalformedContainer, "missing RIFF header");
  r.u32();  // RIFF size; trust the chunk walk instead
  if (r.tag() != "WAVE") throw Error(ErrorCode::MalformedContainer, "missing WAVE form type");

  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  while (r.remaining() >= 8) {
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) throw Error(ErrorCode::MalformedContainer, "chunk '" + id + "' overruns file");
    if (id == "fmt ") {
      if (size < 16) throw Error(ErrorCode::MalformedContainer, "fmt chunk too small");
      auto body = r.take(size);
      ByteReader f(body);
      format = f.u16();
      channels = f.u16();
      rate = f.u32();
      f.u32();  // byte rate
      block_align = f.u16();
      bits = f.u16();
      if (format == kFormatExtensible) {
        if (size < 40) throw Error(ErrorCode::MalformedContainer, "extensible fmt chunk too small");
        f.u16();  // cbSize
        f.u16();  // valid bits
        f.u32();  // channel mask
        format = f.u16();  // first two bytes of the sub-format GUID carry the tag
      }
      have_fmt = true;
    } else if (id == "data") {
      data = r.take(size);
      have_data = true;
    } else {
      r.skip(size);
    }
    if (size % 2 == 1 && r.remaining() > 0) r.skip(1);
  }

  if (!have_fmt || !have_data) throw Error(ErrorCode::MalformedContainer, "missing fmt or data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw Error(ErrorCode::UnsupportedEncoding,
                "format tag " + std::to_string(format) + " with " + std::to_string(bits) + " bits");
  if (channels == 0) throw Error(ErrorCode::MalformedContainer, "zero channels");
  if (channels > 2)
    throw Error(ErrorCode::UnsupportedChannelCount, std::to_string(channels) + " channels");
  if (rate == 0) throw Error(ErrorCode::MalformedContainer, "zero sample rate");
  const std::size_t width = bits / 8;
  if (block_align != width * channels) throw Error(ErrorCode::MalformedContainer, "inconsistent block align");

  const std::size_t frames = data.size() / block_align;
  if (frames == 0) throw Error(ErrorCode::ZeroLengthAudio, "data chunk holds no frames");

  AudioBuffer out;
  out.sample_rate = static_cast<int>(rate);
  out.channels = channels;
  out.samples.resize(frames * channels);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const std::uint8_t* p = data.data() + i * width;
    if (pcm16) {
      const auto raw = static_cast<std::int16_t>(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
      out.samples[i] = static_cast<float>(raw) / 32768.0f;
    } else {
      const std::uint32_t raw = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                                (static_cast<std::uint32_t>(p[2]) << 16) |
                                (static_cast<std::uint32_t>(p[3]) << 24);
      const float v = std::bit_cast<float>(raw);
      if (!std::isfinite(v)) throw Error(ErrorCode::MalformedContainer, "non-finite float sample");
      out.samples[i] = std::clamp(v, -1.0f, 1.0f);
    }
  }
  return out;
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, WavEncoding encoding) {
  const std::size_t width = encoding == WavEncoding::pcm16 ? 2 : 4;
  const auto channels = static_cast<std::uint16_t>(buffer.channels);
  const auto data_size = static_cast<std::uint32_t>(buffer.samples.size() * width);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(buffer.sample_rate * width * channels));
  put_u16(out, static_cast<std::uint16_t>(width * channels));
  put_u16(out, static_cast<std::uint16_t>(width * 8));
  put_tag(out, "data");
  put_u32(out, data_size);
  for (float s : buffer.samples) {
    if (encoding == WavEncoding::pcm16) {
      const double q = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(s));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer, WavEncoding encoding) {
  const auto bytes = encode_wav(buffer, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

AudioBuffer to_canonical(const AudioBuffer& buffer) {
  if (buffer.channels < 1 || buffer.channels > 2)
    throw Error(ErrorCode::UnsupportedChannelCount, std::to_string(buffer.channels) + " channels");
  if (buffer.sample_rate <= 0) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");

  std::vector<float> mono;
  if (buffer.channels == 2) {
    mono.resize(buffer.frames());
    for (std::size_t i = 0; i < mono.size(); ++i)
      mono[i] = 0.5f * (buffer.samples[2 * i] + buffer.samples[2 * i + 1]);
  } else {
    mono = buffer.samples;
  }

  AudioBuffer out;
  out.channels = 1;
  out.sample_rate = kCanonicalRate;
  if (buffer.sample_rate == kCanonicalRate) {
    out.samples = std::move(mono);
  } else {
    out.samples = dsp::resample(mono, buffer.sample_rate, kCanonicalRate);
    for (float& s : out.samples) s = std::clamp(s, -1.0f, 1.0f);
  }
  return out;
}

std::vector<Clip> chunk(const AudioBuffer& canonical, std::string_view source_id, Split split) {
  if (canonical.channels != 1 || canonical.sample_rate != kCanonicalRate)
    throw Error(ErrorCode::InvalidArgument, "chunk expects mono 48 kHz audio");
  const std::size_t count = canonical.samples.size() / kClipSamples;
  if (count == 0)
    throw Error(ErrorCode::TooShort, std::string(source_id) + " has " +
                                         std::to_string(canonical.samples.size()) + " samples, need " +
                                         std::to_string(kClipSamples));
  std::vector<Clip> clips(count);
  for (std::size_t c = 0; c < count; ++c) {
    const auto begin = canonical.samples.begin() + static_cast<std::ptrdiff_t>(c * kClipSamples);
    clips[c].samples.assign(begin, begin + static_cast<std::ptrdiff_t>(kClipSamples));
    clips[c].source_id = std::string(source_id);
    clips[c].chunk_index = c;
    clips[c].split = split;
  }
  return clips;
}

std::vector<Clip> load_clips(const std::filesystem::path& path, std::string_view source_id, Split split) {
  return chunk(to_canonical(load_wav(path)), source_id, split);
}

double rms(std::span<const float> samples) noexcept {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(samples.size()));
}

std::uint64_t content_hash(std::span<const float> samples) noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(samples.data());
  for (std::size_t i = 0; i < samples.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace vac::audio
