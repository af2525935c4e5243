#include <gtest/gtest.h>

#include <fstream>
#include <map>

#include "test_support.hpp"
#include "vac/error.hpp"
#include "vac/features.hpp"
#include "vac/synth.hpp"
#include "vac/train/manifest.hpp"

using namespace vac;
using vac::testing::TempDir;

namespace {

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

// Band at frequency f relative to the median of bands in [f/2, 3f/2], the
// immediate neighbours of f excluded.
double salience(const features::FeatureTensor& t, double f) {
  const auto b = static_cast<std::size_t>(std::ceil(f)) - 1;
  std::vector<double> around;
  for (auto i = static_cast<std::size_t>(f * 0.5); i <= static_cast<std::size_t>(f * 1.5); ++i)
    if (i + 1 < b || i > b + 1) around.push_back(t.data[i]);
  return t.data[b] / median(around);
}

double band_energy(const std::vector<float>& x, std::size_t lo, std::size_t hi) {
  const auto t = features::fft_feature(x);
  double e = 0.0;
  for (std::size_t i = lo; i < hi; ++i) e += static_cast<double>(t.data[i]) * t.data[i];
  return e;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(SynthEngine, FourCylinderPeakAtFiftyHz) {
  synth::EngineSpec spec;
  spec.cylinders = 4;
  spec.rpm = 1500;
  EXPECT_DOUBLE_EQ(spec.firing_frequency(), 50.0);
  const auto audio = synth::synth_engine(spec, 3.0, 7);
  EXPECT_EQ(audio.samples.size(), audio::kClipSamples);
  const auto t = features::fft_feature(audio.samples);
  const auto peak = std::max_element(t.data.begin(), t.data.begin() + 400) - t.data.begin();
  EXPECT_NEAR(static_cast<double>(peak), 49.0, 1.0);
}

TEST(SynthEngine, MisfireAddsSubharmonic) {
  synth::EngineSpec spec;
  spec.rpm = 1500;
  spec.status = 1;
  spec.misfire_cylinder = 2;
  const auto t = features::fft_feature(synth::synth_engine(spec, 3.0, 7).samples);
  EXPECT_GE(salience(t, 12.5), 5.0);
}

TEST(SynthEngine, SubharmonicPresentOnlyForMisfires) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 24; ++i) {
    synth::EngineSpec spec;
    spec.cylinders = vac::kCylinderCounts[static_cast<std::size_t>(i) % 6];
    spec.config = static_cast<std::size_t>(i / 6) % 3;
    spec.fuel = static_cast<std::size_t>(i) % 2;
    spec.rpm = 700.0 + 100.0 * (i % 12);
    spec.status = static_cast<std::size_t>(i / 12) % 2;
    if (spec.status) spec.misfire_cylinder = i % spec.cylinders;
    const auto t = features::fft_feature(synth::synth_engine(spec, 3.0, rng()).samples);
    const double s = salience(t, spec.rpm / 120.0);
    if (spec.status)
      EXPECT_GE(s, 5.0) << i;
    else
      EXPECT_LE(s, 2.0) << i;
  }
}

TEST(SynthEngine, TurboWhineRaisesHighBand) {
  synth::EngineSpec normal;
  synth::EngineSpec turbo = normal;
  turbo.aspiration = 1;
  const double ratio = band_energy(synth::synth_engine(turbo, 3.0, 3).samples, 9000, 15000) /
                       band_energy(synth::synth_engine(normal, 3.0, 3).samples, 9000, 15000);
  EXPECT_GE(ratio, 10.0);
}

TEST(SynthEngine, DeterministicAndBounded) {
  synth::EngineSpec spec;
  spec.fuel = 1;
  spec.config = 2;
  spec.cylinders = 6;
  const auto a = synth::synth_engine(spec, 4.0, 5);
  EXPECT_EQ(a.samples, synth::synth_engine(spec, 4.0, 5).samples);
  EXPECT_NE(a.samples, synth::synth_engine(spec, 4.0, 6).samples);
  EXPECT_EQ(a.samples.size(), 192000u);
  for (float v : a.samples) ASSERT_LE(std::abs(v), 1.0f);
}

TEST(SynthEngine, InvalidSpecsRaise) {
  const auto expect_invalid = [](synth::EngineSpec s, double duration = 3.0) {
    try {
      synth::synth_engine(s, duration, 0);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidSpec);
    }
  };
  synth::EngineSpec s;
  s.cylinders = 7;
  expect_invalid(s);
  s = {};
  s.rpm = 100;
  expect_invalid(s);
  s = {};
  s.status = 1;  // misfire without a cylinder
  expect_invalid(s);
  s = {};
  s.misfire_cylinder = 1;  // cylinder without misfire
  expect_invalid(s);
  expect_invalid(synth::EngineSpec{}, 2.0);
}

TEST(SynthEngine, LabelsRoundTrip) {
  for (const auto& labels : synth::all_label_combinations()) {
    const auto spec = synth::EngineSpec::from_labels(labels, 1200.0);
    EXPECT_EQ(spec.labels(), labels);
  }
  EXPECT_EQ(synth::all_label_combinations().size(), 144u);
}

TEST(SynthCorpus, CountsAndDeterminism) {
  TempDir a, b;
  const auto combos = synth::all_label_combinations();
  const std::vector<std::pair<LabelSet, std::size_t>> counts{{combos[5], 3}};
  const auto ma = synth::synth_corpus(counts, 4, a.path(), {});
  const auto mb = synth::synth_corpus(counts, 4, b.path(), {});
  const auto rows = train::read_manifest(ma);
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.labels, combos[5]);
    ASSERT_TRUE(r.rpm.has_value());
    EXPECT_GE(*r.rpm, 900.0 * 0.9);
    EXPECT_LE(*r.rpm, 900.0 * 1.1);
  }
  for (const auto& r : rows) EXPECT_EQ(read_file(r.file), read_file(b.path() / r.file.filename()));
  EXPECT_EQ(read_file(ma), read_file(mb));
}

TEST(SynthCorpus, FuelHistogram) {
  TempDir dir;
  LabelSet gas = synth::all_label_combinations()[0];
  LabelSet diesel = gas;
  diesel.set(Task::fuel, 1);
  const auto m = train::read_manifest(synth::synth_corpus({{gas, 10}, {diesel, 10}}, 1, dir.path(), {}));
  std::map<std::size_t, int> hist;
  for (const auto& r : m) ++hist[r.labels[Task::fuel]];
  EXPECT_EQ(hist[0], 10);
  EXPECT_EQ(hist[1], 10);
}

TEST(SynthCorpus, BalancedCountsSpreadRemainder) {
  const auto combos = synth::all_label_combinations();
  const auto counts = synth::balanced_counts(combos, 150, 3);
  std::size_t total = 0;
  for (const auto& [labels, n] : counts) {
    EXPECT_TRUE(n == 1 || n == 2);
    total += n;
  }
  EXPECT_EQ(total, 150u);
  EXPECT_EQ(counts.size(), 144u);
}

TEST(SynthCorpus, TurboIsLinearlySeparable) {
  // Features: log energy in 9-15 kHz and in 0-2 kHz; a least-squares linear
  // probe trained on the first half must score >= 95% on the second half.
  std::mt19937_64 rng(2);
  std::vector<std::array<double, 3>> x;
  std::vector<double> y;
  const auto combos = synth::all_label_combinations();
  for (int i = 0; i < 200; ++i) {
    const auto& labels = combos[rng() % combos.size()];
    auto spec = synth::EngineSpec::from_labels(labels, 700.0 + static_cast<double>(rng() % 1500),
                                               labels[Task::misfire] == 1 ? std::optional<int>(1) : std::nullopt);
    const auto audio = synth::synth_engine(spec, 3.0, rng());
    x.push_back({1.0, std::log(band_energy(audio.samples, 9000, 15000) + 1e-12),
                 std::log(band_energy(audio.samples, 0, 2000) + 1e-12)});
    y.push_back(labels[Task::aspiration] ? 1.0 : -1.0);
  }
  // Normal equations on the first 100 samples.
  double a[3][3] = {}, r[3] = {};
  for (int i = 0; i < 100; ++i)
    for (int p = 0; p < 3; ++p) {
      r[p] += x[i][p] * y[i];
      for (int q = 0; q < 3; ++q) a[p][q] += x[i][p] * x[i][q];
    }
  for (int p = 0; p < 3; ++p) {
    for (int q = p + 1; q < 3; ++q) {
      const double f = a[q][p] / a[p][p];
      for (int c = 0; c < 3; ++c) a[q][c] -= f * a[p][c];
      r[q] -= f * r[p];
    }
  }
  double w[3];
  for (int p = 2; p >= 0; --p) {
    double s = r[p];
    for (int c = p + 1; c < 3; ++c) s -= a[p][c] * w[c];
    w[p] = s / a[p][p];
  }
  int correct = 0;
  for (int i = 100; i < 200; ++i) {
    const double score = w[0] * x[i][0] + w[1] * x[i][1] + w[2] * x[i][2];
    correct += (score > 0) == (y[i] > 0);
  }
  EXPECT_GE(correct, 95);
}
