#include <gtest/gtest.h>

#include <cstring>

#include "test_support.hpp"
#include "vac/audio.hpp"
#include "vac/error.hpp"

using namespace vac;
using vac::testing::TempDir;

namespace {

// Minimal independent RIFF writer used to cross-check the decoder.
std::vector<std::uint8_t> pcm16_wav(const std::vector<std::int16_t>& samples, int rate, int channels) {
  std::vector<std::uint8_t> out;
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  tag("RIFF");
  put32(36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  put32(16);
  put16(1);
  put16(static_cast<std::uint16_t>(channels));
  put32(static_cast<std::uint32_t>(rate));
  put32(static_cast<std::uint32_t>(rate * channels * 2));
  put16(static_cast<std::uint16_t>(channels * 2));
  put16(16);
  tag("data");
  put32(data_bytes);
  for (auto s : samples) put16(static_cast<std::uint16_t>(s));
  return out;
}

}  // namespace

TEST(AudioDecode, ConstantPcm16ScalesToHalf) {
  const auto bytes = pcm16_wav(std::vector<std::int16_t>(48000, 16384), 48000, 1);
  const auto buf = audio::decode_wav(bytes);
  ASSERT_EQ(buf.samples.size(), 48000u);
  EXPECT_EQ(buf.sample_rate, 48000);
  for (float v : buf.samples) ASSERT_EQ(v, 0.5f);
}

TEST(AudioDecode, MostNegativePcmIsMinusOne) {
  const auto buf = audio::decode_wav(pcm16_wav({-32768, 0, 32767}, 48000, 1));
  EXPECT_EQ(buf.samples[0], -1.0f);
  EXPECT_EQ(buf.samples[1], 0.0f);
}

TEST(AudioDecode, StereoFramesRoundTripThroughWriter) {
  std::vector<std::int16_t> inter(2 * 96000);
  for (std::size_t i = 0; i < inter.size(); ++i) inter[i] = static_cast<std::int16_t>((i * 37) % 20000 - 10000);
  const auto buf = audio::decode_wav(pcm16_wav(inter, 48000, 2));
  EXPECT_EQ(buf.channels, 2);
  EXPECT_EQ(buf.frames(), 96000u);
  const auto again = audio::decode_wav(audio::encode_wav(buf, audio::WavEncoding::pcm16));
  EXPECT_EQ(again.samples, buf.samples);
}

TEST(AudioDecode, Float32RoundTripIsExact) {
  audio::AudioBuffer buf;
  buf.samples = vac::testing::uniform_signal(1000, 3, 0.9);
  TempDir dir;
  audio::write_wav(dir / "f.wav", buf, audio::WavEncoding::float32);
  EXPECT_EQ(audio::load_wav(dir / "f.wav").samples, buf.samples);
}

TEST(AudioDecode, RejectsMalformedAndEmpty) {
  const std::vector<std::uint8_t> junk{'R', 'I', 'F', 'X', 0, 0, 0, 0};
  try {
    audio::decode_wav(junk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedContainer);
  }
  try {
    audio::decode_wav(pcm16_wav({}, 48000, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroLengthAudio);
  }
}

TEST(AudioDecode, RejectsCompressedFormat) {
  auto bytes = pcm16_wav({1, 2, 3, 4}, 48000, 1);
  bytes[20] = 2;  // format tag: ADPCM
  try {
    audio::decode_wav(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedEncoding);
  }
}

TEST(AudioCanonical, StereoAveragesFrames) {
  audio::AudioBuffer b;
  b.channels = 2;
  b.samples = {0.2f, 0.4f, -1.0f, 1.0f};
  const auto m = audio::to_canonical(b);
  ASSERT_EQ(m.channels, 1);
  ASSERT_EQ(m.samples.size(), 2u);
  EXPECT_NEAR(m.samples[0], 0.3f, 1e-7);
  EXPECT_EQ(m.samples[1], 0.0f);
}

TEST(AudioCanonical, MonoCanonicalIsUnchangedAndIdempotent) {
  audio::AudioBuffer b;
  b.samples = vac::testing::uniform_signal(5000, 1);
  EXPECT_EQ(audio::to_canonical(b).samples, b.samples);

  audio::AudioBuffer odd;
  odd.sample_rate = 44100;
  odd.samples = vac::testing::sine(440.0, 44100, 44100.0);
  const auto once = audio::to_canonical(odd);
  const auto twice = audio::to_canonical(once);
  EXPECT_EQ(once.samples, twice.samples);
}

TEST(AudioCanonical, ResampledToneKeepsFrequencyAndRms) {
  audio::AudioBuffer b;
  b.sample_rate = 44100;
  b.samples = vac::testing::sine(440.0, 44100, 44100.0);
  const auto c = audio::to_canonical(b);
  EXPECT_EQ(c.sample_rate, 48000);
  EXPECT_NEAR(c.duration(), b.duration(), 1.0 / 48000.0);
  // 4800-sample window (0.1 s) gives 10 Hz bins: 440 Hz is bin 44.
  const std::span<const float> mid(c.samples.data() + 20000, 4800);
  EXPECT_NEAR(vac::testing::brute_dominant_hz(mid, 48000.0), 440.0, 10.0);
  EXPECT_NEAR(vac::testing::rms(mid) / vac::testing::rms(b.samples), 1.0, 0.05);
}

TEST(AudioCanonical, ResamplingPreservesRmsForHighTones) {
  for (double f : {1000.0, 8000.0, 15000.0, 19000.0}) {
    audio::AudioBuffer b;
    b.sample_rate = 44100;
    b.samples = vac::testing::sine(f, 44100, 44100.0);
    const auto c = audio::to_canonical(b);
    const std::span<const float> mid(c.samples.data() + 4800, 38400);
    EXPECT_NEAR(vac::testing::rms(mid) / vac::testing::rms(b.samples), 1.0, 0.05) << f;
  }
}

TEST(AudioCanonical, RejectsMoreThanTwoChannels) {
  audio::AudioBuffer b;
  b.channels = 3;
  b.samples.assign(9, 0.0f);
  try {
    audio::to_canonical(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedChannelCount);
  }
}

TEST(AudioChunk, ExactAndFlooredCounts) {
  audio::AudioBuffer b;
  b.samples = vac::testing::uniform_signal(432000, 2);
  auto clips = audio::chunk(b, "s");
  ASSERT_EQ(clips.size(), 3u);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    EXPECT_EQ(clips[i].chunk_index, i);
    EXPECT_EQ(clips[i].samples.size(), audio::kClipSamples);
    EXPECT_EQ(clips[i].id(), "s#" + std::to_string(i));
  }
  std::vector<float> joined;
  for (const auto& c : clips) joined.insert(joined.end(), c.samples.begin(), c.samples.end());
  EXPECT_EQ(joined, b.samples);

  b.samples.resize(360000);  // 7.5 s
  clips = audio::chunk(b, "s");
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_TRUE(std::equal(clips[1].samples.begin(), clips[1].samples.end(), b.samples.begin() + 144000));
}

TEST(AudioChunk, TooShortBufferRaises) {
  audio::AudioBuffer b;
  b.samples.assign(139200, 0.1f);  // 2.9 s
  try {
    audio::chunk(b, "s");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooShort);
  }
}

TEST(AudioHash, DistinguishesSingleSampleChange) {
  auto x = vac::testing::uniform_signal(1000, 5);
  const auto h = audio::content_hash(x);
  EXPECT_EQ(h, audio::content_hash(x));
  x[500] = std::nextafter(x[500], 1.0f);
  EXPECT_NE(h, audio::content_hash(x));
}
