// src/corpus.cc

// Copyright 2026 dcsep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dcsep/corpus.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "dcsep/container.h"

namespace dcsep {

namespace fs = std::filesystem;

namespace {

// Rough F1..F4 of six vowels for an adult talker.
const double kVowels[6][4] = {{730, 1090, 2440, 3300}, {270, 2290, 3010, 3500},
                              {300, 870, 2240, 3200},  {530, 1840, 2480, 3400},
                              {570, 840, 2410, 3300},  {660, 1720, 2410, 3350}};
const double kBandwidths[4] = {70, 90, 130, 180};

struct Resonator {
  double a1 = 0, a2 = 0, gain = 1, y1 = 0, y2 = 0;

  void Set(double freq, double bw, double fs) {
    const double r = std::exp(-std::numbers::pi * bw / fs);
    a1 = 2 * r * std::cos(2 * std::numbers::pi * freq / fs);
    a2 = -r * r;
    gain = 1 - r;
  }
  double Step(double x) {
    const double y = gain * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

std::string RoleName(UtteranceRole r) {
  switch (r) {
    case UtteranceRole::kEnroll: return "enroll";
    case UtteranceRole::kTrain: return "train";
    case UtteranceRole::kTest: return "test";
    case UtteranceRole::kDev: return "dev";
  }
  return "";
}

UtteranceRole ParseRole(const std::string &s) {
  if (s == "enroll") return UtteranceRole::kEnroll;
  if (s == "train") return UtteranceRole::kTrain;
  if (s == "test") return UtteranceRole::kTest;
  if (s == "dev") return UtteranceRole::kDev;
  throw Error("corpus manifest: unknown role " + s, Error::Kind::kIo);
}

std::vector<MixtureRecord> MakeMixtures(const CorpusSpec &spec, const std::string &split,
                                        int count, const std::vector<const Utterance *> &pool,
                                        std::uint64_t seed) {
  std::vector<std::vector<const Utterance *>> by_speaker(spec.n_speakers);
  for (const auto *u : pool) by_speaker[u->speaker].push_back(u);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> spk(0, spec.n_speakers - 1);
  std::uniform_real_distribution<double> snr(spec.snr_min_db, spec.snr_max_db);
  std::vector<MixtureRecord> out;
  for (int i = 0; i < count; ++i) {
    const int a = spk(rng);
    int b = spk(rng);
    while (b == a) b = spk(rng);
    std::uniform_int_distribution<std::size_t> pa(0, by_speaker[a].size() - 1);
    std::uniform_int_distribution<std::size_t> pb(0, by_speaker[b].size() - 1);
    const Utterance *ua = by_speaker[a][pa(rng)];
    const Utterance *ub = by_speaker[b][pb(rng)];
    const double s = spec.snr_min_db == spec.snr_max_db ? spec.snr_min_db : snr(rng);
    Mixture m = MixAtSnr(ua->wave, ub->wave, s);
    const double peak = std::max({m.mixture.samples.cwiseAbs().maxCoeff(),
                                  m.scaled_a.samples.cwiseAbs().maxCoeff(),
                                  m.scaled_b.samples.cwiseAbs().maxCoeff()});
    const double g = peak > 0.99 ? 0.99 / peak : 1.0;
    MixtureRecord r;
    char id[64];
    std::snprintf(id, sizeof(id), "%s%05d", split.c_str(), i);
    r.id = id;
    Waveform sa = m.scaled_a, sb = m.scaled_b;
    sa.samples = QuantizePcm16(g * m.scaled_a.samples);
    sb.samples = QuantizePcm16(g * m.scaled_b.samples);
    r.mixture = sa;
    r.mixture.samples = sa.samples + sb.samples;
    r.sources = {sa, sb};
    r.speakers = {a, b};
    r.utterances = {ua->id, ub->id};
    r.snr_db = s;
    out.push_back(std::move(r));
  }
  return out;
}

void WriteMixtures(const std::vector<MixtureRecord> &set, const std::string &split,
                   const fs::path &dir, std::ostream &manifest) {
  for (const auto &m : set) {
    const fs::path d = dir / "mixtures" / split / m.id;
    fs::create_directories(d);
    WriteWav((d / "mix.wav").string(), m.mixture);
    for (std::size_t s = 0; s < m.sources.size(); ++s)
      WriteWav((d / ("s" + std::to_string(s) + ".wav")).string(), m.sources[s]);
    manifest << "mixture\t" << split << "\t" << m.id << "\t" << m.speakers[0] << "\t"
             << m.speakers[1] << "\t" << m.utterances[0] << "\t" << m.utterances[1] << "\t"
             << FormatDouble(m.snr_db) << "\n";
  }
}

}  // namespace

VectorXd QuantizePcm16(const VectorXd &x) {
  VectorXd q(x.size());
  for (Index i = 0; i < x.size(); ++i)
    q[i] = static_cast<double>(std::lround(std::clamp(x[i], -1.0, 32767.0 / 32768.0) * 32768.0)) /
           32768.0;
  return q;
}

SpeakerVoice MakeVoice(std::uint64_t seed, int speaker) {
  std::mt19937_64 rng(DeriveSeed(seed, 1000 + static_cast<std::uint64_t>(speaker)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpeakerVoice v;
  v.f0_hz = 85.0 + 175.0 * u(rng);
  v.breath = 0.02 + 0.1 * u(rng);
  v.tilt = 0.85 + 0.12 * u(rng);
  const double tract = 0.85 + 0.35 * u(rng);
  for (const auto &vowel : kVowels) {
    std::vector<double> f;
    for (double base : vowel) f.push_back(std::min(3800.0, base * tract * (0.93 + 0.14 * u(rng))));
    v.formants.push_back(f);
  }
  for (double b : kBandwidths) v.bandwidths.push_back(b * (0.8 + 0.5 * u(rng)));
  return v;
}

Waveform SynthesizeUtterance(const SpeakerVoice &voice, double seconds, int sample_rate,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const Index n = static_cast<Index>(std::llround(seconds * sample_rate));
  const double fs = sample_rate;
  VectorXd out = VectorXd::Zero(n);
  std::vector<Resonator> tract(voice.bandwidths.size());
  const double f0 = voice.f0_hz * (0.94 + 0.12 * u(rng));
  double phase = 0.0, glottal = 0.0;
  Index pos = static_cast<Index>(0.05 * fs * u(rng));
  while (pos < n) {
    const Index len = static_cast<Index>((0.12 + 0.18 * u(rng)) * fs);
    const auto &formants = voice.formants[static_cast<std::size_t>(u(rng) * voice.formants.size())];
    for (std::size_t k = 0; k < tract.size(); ++k) tract[k].Set(formants[k], voice.bandwidths[k], fs);
    const double glide = 0.08 * (2 * u(rng) - 1);
    const double level = 0.6 + 0.4 * u(rng);
    const Index attack = static_cast<Index>(0.02 * fs), release = static_cast<Index>(0.03 * fs);
    for (Index i = 0; i < len && pos + i < n; ++i) {
      const double frac = static_cast<double>(i) / len;
      const double pitch = f0 * (1.0 + glide * (1.0 - 2.0 * frac)) * (1.0 + 0.004 * g(rng));
      phase += pitch / fs;
      double pulse = 0.0;
      if (phase >= 1.0) {
        phase -= 1.0;
        pulse = 1.0;
      }
      glottal = voice.tilt * glottal + pulse;
      double x = glottal + voice.breath * g(rng);
      for (auto &r : tract) x = r.Step(x);
      double env = 1.0;
      if (i < attack) env = 0.5 - 0.5 * std::cos(std::numbers::pi * i / attack);
      if (len - i < release) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * (len - i) / release);
      out[pos + i] = level * env * x;
    }
    pos += len + static_cast<Index>((0.03 + 0.12 * u(rng)) * fs);
  }
  const double rms = std::sqrt(out.squaredNorm() / std::max<Index>(1, n));
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = QuantizePcm16(rms > 0 ? (0.1 / rms) * out : out);
  return w;
}

std::vector<const Utterance *> Corpus::WithRole(UtteranceRole role) const {
  std::vector<const Utterance *> out;
  for (const auto &u : utterances)
    if (u.role == role) out.push_back(&u);
  return out;
}

Corpus GenerateCorpus(const CorpusSpec &spec) {
  spec.Validate();
  Corpus c;
  c.spec = spec;
  const int per = spec.utterances_per_speaker;
  const int rest = per - spec.enroll_utterances;
  const int n_test = std::clamp(static_cast<int>(std::lround(spec.test_fraction * rest)), 1, rest - 1);
  const int total_speakers = spec.n_speakers + spec.dev_speakers;
  for (int s = 0; s < total_speakers; ++s) {
    const SpeakerVoice voice = MakeVoice(spec.seed, s);
    const bool dev = s >= spec.n_speakers;
    const int count = dev ? spec.dev_utterances : per;
    for (int i = 0; i < count; ++i) {
      Utterance u;
      char id[32];
      std::snprintf(id, sizeof(id), "spk%03d_u%04d", s, i);
      u.id = id;
      u.speaker = s;
      if (dev) u.role = UtteranceRole::kDev;
      else if (i < spec.enroll_utterances) u.role = UtteranceRole::kEnroll;
      else if (i >= per - n_test) u.role = UtteranceRole::kTest;
      else u.role = UtteranceRole::kTrain;
      u.wave = SynthesizeUtterance(
          voice, spec.utterance_seconds, spec.sample_rate,
          DeriveSeed(spec.seed, (static_cast<std::uint64_t>(s) << 20) + static_cast<std::uint64_t>(i)));
      c.utterances.push_back(std::move(u));
    }
  }
  const auto train_pool = c.WithRole(UtteranceRole::kTrain);
  const auto test_pool = c.WithRole(UtteranceRole::kTest);
  c.train = MakeMixtures(spec, "tr", spec.train_mixtures, train_pool, DeriveSeed(spec.seed, 1));
  c.validation =
      MakeMixtures(spec, "cv", spec.validation_mixtures, train_pool, DeriveSeed(spec.seed, 2));
  c.test = MakeMixtures(spec, "tt", spec.test_mixtures, test_pool, DeriveSeed(spec.seed, 3));
  return c;
}

void SaveCorpus(const Corpus &corpus, const std::string &dir) {
  const fs::path root(dir);
  fs::create_directories(root / "utterances");
  std::ofstream manifest(root / "manifest.tsv");
  Require(manifest.good(), "cannot write corpus manifest in " + dir, Error::Kind::kIo);
  for (const auto &u : corpus.utterances) {
    WriteWav((root / "utterances" / (u.id + ".wav")).string(), u.wave);
    manifest << "utterance\t" << RoleName(u.role) << "\t" << u.id << "\t" << u.speaker << "\n";
  }
  WriteMixtures(corpus.train, "tr", root, manifest);
  WriteMixtures(corpus.validation, "cv", root, manifest);
  WriteMixtures(corpus.test, "tt", root, manifest);
  ExperimentConfig e;
  e.corpus = corpus.spec;
  std::ofstream spec(root / "spec.cfg");
  const std::string text = e.ToText();
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);)
    if (line.rfind("corpus.", 0) == 0) spec << line << "\n";
}

Corpus LoadCorpus(const std::string &dir) {
  const fs::path root(dir);
  Require(fs::exists(root / "manifest.tsv"), "missing corpus manifest " +
                                                 (root / "manifest.tsv").string(),
          Error::Kind::kDependency);
  Corpus c;
  c.spec = ExperimentConfig::FromConfig(Config::Load((root / "spec.cfg").string())).corpus;
  std::ifstream is(root / "manifest.tsv");
  for (std::string line; std::getline(is, line);) {
    std::istringstream ls(line);
    std::vector<std::string> f;
    for (std::string tok; std::getline(ls, tok, '\t');) f.push_back(tok);
    if (f.empty()) continue;
    if (f[0] == "utterance") {
      Require(f.size() == 4, "corpus manifest: bad utterance line", Error::Kind::kIo);
      Utterance u;
      u.role = ParseRole(f[1]);
      u.id = f[2];
      u.speaker = std::stoi(f[3]);
      u.wave = ReadWav((root / "utterances" / (u.id + ".wav")).string());
      c.utterances.push_back(std::move(u));
    } else if (f[0] == "mixture") {
      Require(f.size() == 8, "corpus manifest: bad mixture line", Error::Kind::kIo);
      MixtureRecord m;
      m.id = f[2];
      m.speakers = {std::stoi(f[3]), std::stoi(f[4])};
      m.utterances = {f[5], f[6]};
      m.snr_db = std::stod(f[7]);
      const fs::path d = root / "mixtures" / f[1] / m.id;
      m.mixture = ReadWav((d / "mix.wav").string());
      m.sources = {ReadWav((d / "s0.wav").string()), ReadWav((d / "s1.wav").string())};
      auto &dst = f[1] == "tr" ? c.train : f[1] == "cv" ? c.validation : c.test;
      dst.push_back(std::move(m));
    } else {
      throw Error("corpus manifest: unknown record " + f[0], Error::Kind::kIo);
    }
  }
  return c;
}

}  // namespace dcsep
