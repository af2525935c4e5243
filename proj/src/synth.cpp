#include "vac/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "vac/augment.hpp"
#include "vac/dsp/fft.hpp"
#include "vac/error.hpp"
#include "vac/parallel.hpp"
#include "vac/train/manifest.hpp"

namespace vac::synth {
namespace {

constexpr double kRate = audio::kCanonicalRate;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kStackTable = 16384;
constexpr double kStackCeilingHz = 8000.0;
constexpr std::size_t kClatterPartials = 12;

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

// Unit-peak gamma envelope (t / tau) * exp(1 - t / tau); smooth onset keeps
// the impulses from leaking broadband energy.
double gamma_envelope(double t, double tau) { return (t / tau) * std::exp(1.0 - t / tau); }

// One period of the harmonic stack sampled on kStackTable phase points. Each
// harmonic is phase-aligned with the matching line of the thump train so the
// two reinforce instead of cancelling at random.
std::vector<double> stack_period(double fire_hz, double amplitude, double thump_tau) {
  dsp::RealFft fft(kStackTable);
  std::vector<std::complex<double>> spectrum(fft.bins());
  const auto harmonics = std::min<std::size_t>(static_cast<std::size_t>(kStackCeilingHz / fire_hz), kStackTable / 2 - 1);
  const double n = static_cast<double>(kStackTable);
  for (std::size_t k = 1; k <= harmonics; ++k) {
    const double omega = kTwoPi * fire_hz * static_cast<double>(k);
    // (amplitude / k) * cos(2 pi k psi + phase) after the 1/n inverse scaling.
    spectrum[k] = std::polar(amplitude / static_cast<double>(k) * n / 2.0, -2.0 * std::atan(omega * thump_tau));
  }
  std::vector<double> table(kStackTable);
  fft.inverse(spectrum, table);
  return table;
}

}  // namespace

LabelSet EngineSpec::labels() const {
  LabelSet l;
  l.set(Task::fuel, fuel);
  l.set(Task::config, config);
  const auto cyl = cylinder_class(cylinders);
  l.set(Task::cylinders, cyl ? *cyl : 0);
  l.set(Task::aspiration, aspiration);
  l.set(Task::misfire, status);
  return l;
}

void EngineSpec::validate() const {
  if (fuel >= class_count(Task::fuel)) throw Error(ErrorCode::InvalidSpec, "fuel class out of range");
  if (config >= class_count(Task::config)) throw Error(ErrorCode::InvalidSpec, "config class out of range");
  if (!cylinder_class(cylinders))
    throw Error(ErrorCode::InvalidSpec, "unsupported cylinder count " + std::to_string(cylinders));
  if (aspiration >= class_count(Task::aspiration)) throw Error(ErrorCode::InvalidSpec, "aspiration class out of range");
  if (status >= class_count(Task::misfire)) throw Error(ErrorCode::InvalidSpec, "status class out of range");
  if (!(rpm >= kMinRpm && rpm <= kMaxRpm))
    throw Error(ErrorCode::InvalidSpec, "rpm " + std::to_string(rpm) + " outside [600, 3000]");
  if ((status == 1) != misfire_cylinder.has_value())
    throw Error(ErrorCode::InvalidSpec, "misfire_cylinder must be given exactly when status is misfire");
  if (misfire_cylinder && (*misfire_cylinder < 0 || *misfire_cylinder >= cylinders))
    throw Error(ErrorCode::InvalidSpec, "misfire_cylinder out of range");
  const double f = firing_frequency();
  if (!(f > 0.0 && f < kRate / 2.0)) throw Error(ErrorCode::InvalidSpec, "firing frequency out of range");
}

EngineSpec EngineSpec::from_labels(const LabelSet& labels, double rpm, std::optional<int> misfire_cylinder) {
  for (Task t : kAllTasks)
    if (!labels.has(t)) throw Error(ErrorCode::InvalidSpec, "synthesis needs every label");
  EngineSpec s;
  s.fuel = labels[Task::fuel];
  s.config = labels[Task::config];
  s.cylinders = kCylinderCounts.at(labels[Task::cylinders]);
  s.aspiration = labels[Task::aspiration];
  s.status = labels[Task::misfire];
  s.rpm = rpm;
  s.misfire_cylinder = misfire_cylinder;
  return s;
}

audio::AudioBuffer synth_engine(const EngineSpec& spec, double duration_seconds, std::uint64_t seed) {
  spec.validate();
  if (!(duration_seconds >= audio::kClipSeconds))
    throw Error(ErrorCode::InvalidSpec, "duration must be at least 3 s");
  const auto n = static_cast<std::size_t>(std::llround(duration_seconds * kRate));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double fire_hz = spec.firing_frequency();
  const double period = 1.0 / fire_hz;
  const bool diesel = spec.fuel == 1;
  const bool turbo = spec.aspiration == 1;

  // Per-recording character.
  const double thump_amp = uniform(rng, 0.85, 1.15);
  const double stack_amp = 0.35 * uniform(rng, 0.85, 1.15);
  constexpr std::array<double, 3> kResonanceHz{1400.0, 2000.0, 2600.0};  // flat, inline, v
  const double res_hz = kResonanceHz[spec.config] * uniform(rng, 0.9, 1.1);
  const double res_amp = 0.5 * uniform(rng, 0.85, 1.15);
  const double res_phase = uniform(rng, 0.0, kTwoPi);
  constexpr double kThumpTau = 0.004, kResTau = 0.0015, kClatterTau = 0.0006;
  std::array<double, kClatterPartials> clatter_hz{};
  for (auto& f : clatter_hz) f = uniform(rng, 2000.0, 8000.0);
  const double clatter_amp = 0.4 * uniform(rng, 0.85, 1.15);
  const double whine_amp = 0.06 * uniform(rng, 0.8, 1.2);
  const double whine_sweep_s = uniform(rng, 2.0, 4.0);
  const double whine_offset = uniform(rng, 0.0, kTwoPi);
  const double start_offset = unit(rng) * period;
  const auto stack = stack_period(fire_hz, stack_amp, kThumpTau);

  std::vector<double> x(n, 0.0);

  // Combustion impulses: low-frequency thump, resonance burst, diesel clatter.
  const auto bank_gain = [&](int cyl) {
    switch (spec.config) {
      case 0: return cyl % 2 == 0 ? 1.0 : -1.0;  // flat: opposed pairs
      case 2: return cyl % 2 == 0 ? 1.0 : 0.8;   // v: two banks
      default: return 1.0;
    }
  };
  const double thump_len = 12.0 * kThumpTau;
  for (long j = -4;; ++j) {
    const double t_fire = start_offset + static_cast<double>(j) * period + 0.004 * period * gauss(rng);
    const double amp_jitter = uniform(rng, 0.95, 1.05);
    std::array<double, kClatterPartials> clatter_phase{};
    for (auto& p : clatter_phase) p = uniform(rng, 0.0, kTwoPi);
    if (t_fire >= duration_seconds) break;
    const int cyl = static_cast<int>(((j % spec.cylinders) + spec.cylinders) % spec.cylinders);
    const double a = (spec.misfire_cylinder && cyl == *spec.misfire_cylinder ? 0.1 : 1.0) * amp_jitter;
    const auto first = static_cast<long>(std::ceil(std::max(0.0, t_fire) * kRate));
    const auto last = std::min(static_cast<long>(n), static_cast<long>((t_fire + thump_len) * kRate) + 1);
    const double gain = bank_gain(cyl);
    for (long s = first; s < last; ++s) {
      const double dt = static_cast<double>(s) / kRate - t_fire;
      if (dt < 0.0) continue;
      double v = thump_amp * gamma_envelope(dt, kThumpTau);
      if (dt < 12.0 * kResTau) v += res_amp * gain * gamma_envelope(dt, kResTau) * std::sin(kTwoPi * res_hz * dt + res_phase);
      if (diesel && dt < 12.0 * kClatterTau) {
        double c = 0.0;
        for (std::size_t p = 0; p < kClatterPartials; ++p) c += std::sin(kTwoPi * clatter_hz[p] * dt + clatter_phase[p]);
        v += clatter_amp * gamma_envelope(dt, kClatterTau) * c / std::sqrt(static_cast<double>(kClatterPartials));
      }
      x[static_cast<std::size_t>(s)] += a * v;
    }
  }

  // Harmonic stack at multiples of the firing frequency.
  for (std::size_t s = 0; s < n; ++s) {
    double psi = fire_hz * (static_cast<double>(s) / kRate - start_offset);
    psi -= std::floor(psi);
    const double pos = psi * static_cast<double>(kStackTable);
    const auto i0 = static_cast<std::size_t>(pos) % kStackTable;
    const double frac = pos - std::floor(pos);
    x[s] += (1.0 - frac) * stack[i0] + frac * stack[(i0 + 1) % kStackTable];
  }

  if (turbo) {
    double phase = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double t = static_cast<double>(s) / kRate;
      const double f = 12000.0 + 3000.0 * std::sin(kTwoPi * t / whine_sweep_s + whine_offset);
      phase += kTwoPi * f / kRate;
      x[s] += whine_amp * std::sin(phase);
    }
  }

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double power = 0.0;
  for (double& v : x) {
    v -= mean;
    power += v * v;
  }
  const double noise_sigma = 0.01 * std::sqrt(power / static_cast<double>(n));  // -40 dB
  double peak = 0.0;
  for (double& v : x) {
    v += noise_sigma * gauss(rng);
    peak = std::max(peak, std::abs(v));
  }
  const double scale = peak > 0.0 ? 0.7 / peak : 1.0;

  audio::AudioBuffer out;
  out.sample_rate = audio::kCanonicalRate;
  out.channels = 1;
  out.samples.resize(n);
  for (std::size_t s = 0; s < n; ++s) out.samples[s] = static_cast<float>(x[s] * scale);
  return out;
}

std::vector<LabelSet> all_label_combinations() {
  std::vector<LabelSet> out;
  for (std::size_t f = 0; f < class_count(Task::fuel); ++f)
    for (std::size_t c = 0; c < class_count(Task::config); ++c)
      for (std::size_t y = 0; y < class_count(Task::cylinders); ++y)
        for (std::size_t a = 0; a < class_count(Task::aspiration); ++a)
          for (std::size_t m = 0; m < class_count(Task::misfire); ++m) {
            LabelSet l;
            l.set(Task::fuel, f);
            l.set(Task::config, c);
            l.set(Task::cylinders, y);
            l.set(Task::aspiration, a);
            l.set(Task::misfire, m);
            out.push_back(l);
          }
  return out;
}

std::vector<std::pair<LabelSet, std::size_t>> balanced_counts(std::size_t total) {
  const auto combos = all_label_combinations();
  std::vector<std::pair<LabelSet, std::size_t>> out;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    const std::size_t count = total / combos.size() + (i < total % combos.size() ? 1 : 0);
    if (count > 0) out.emplace_back(combos[i], count);
  }
  return out;
}

std::vector<std::pair<LabelSet, std::size_t>> balanced_counts(std::span<const LabelSet> combos, std::size_t total,
                                                               std::uint64_t seed) {
  if (combos.empty()) throw Error(ErrorCode::InvalidSpec, "no label combinations to spread samples over");
  std::vector<std::size_t> order(combos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<std::size_t> counts(combos.size(), total / combos.size());
  for (std::size_t i = 0; i < total % combos.size(); ++i) ++counts[order[i]];
  std::vector<std::pair<LabelSet, std::size_t>> out;
  for (std::size_t i = 0; i < combos.size(); ++i)
    if (counts[i] > 0) out.emplace_back(combos[i], counts[i]);
  return out;
}

std::filesystem::path synth_corpus(const std::vector<std::pair<LabelSet, std::size_t>>& counts, std::uint64_t seed,
                                   const std::filesystem::path& out_dir, const CorpusOptions& options) {
  if (counts.empty()) throw Error(ErrorCode::InvalidSpec, "no label combinations requested");
  if (!(options.rpm_jitter >= 0.0 && options.rpm_jitter < 1.0))
    throw Error(ErrorCode::InvalidSpec, "rpm jitter must be in [0, 1)");

  // Expand and validate everything before touching the file system.
  struct Job {
    EngineSpec spec;
    std::uint64_t seed;
    std::string id;
  };
  std::vector<Job> jobs;
  for (const auto& [labels, count] : counts) {
    for (std::size_t r = 0; r < count; ++r) {
      const std::size_t index = jobs.size();
      std::mt19937_64 rng(augment::derive_seed(seed, 2 * index));
      const double rpm = options.base_rpm * (1.0 + uniform(rng, -options.rpm_jitter, options.rpm_jitter));
      const int cylinders = kCylinderCounts.at(labels.has(Task::cylinders) ? labels[Task::cylinders] : 0);
      std::optional<int> misfire;
      if (labels.has(Task::misfire) && labels[Task::misfire] == 1)
        misfire = static_cast<int>(unit(rng) * cylinders);
      auto spec = EngineSpec::from_labels(labels, rpm, misfire);
      spec.validate();
      char id[32];
      std::snprintf(id, sizeof id, "engine_%05zu", index);
      jobs.push_back({spec, augment::derive_seed(seed, 2 * index + 1), id});
    }
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  train::Manifest manifest(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto path = out_dir / (job.id + ".wav");
    audio::write_wav(path, synth_engine(job.spec, options.duration_seconds, job.seed), audio::WavEncoding::pcm16);
    manifest[i].file = path;
    manifest[i].source_id = job.id;
    manifest[i].labels = job.spec.labels();
    manifest[i].rpm = job.spec.rpm;
  });
  const auto manifest_path = out_dir / "manifest.jsonl";
  train::write_manifest(manifest_path, manifest);
  return manifest_path;
}

}  // namespace vac::synth
