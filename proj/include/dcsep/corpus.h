// dcsep/corpus.h

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

#pragma once

#include <string>
#include <vector>

#include "dcsep/config.h"
#include "dcsep/dsp.h"

namespace dcsep {

/// Parameters of one synthetic talker: a pitch range and a set of vowel
/// formant patterns scaled by a vocal-tract factor.
struct SpeakerVoice {
  double f0_hz = 120.0;
  double breath = 0.05;       // excitation noise relative to the pulse train
  double tilt = 0.9;          // one-pole glottal lowpass coefficient
  std::vector<std::vector<double>> formants;    // per vowel, Hz
  std::vector<double> bandwidths;               // per formant, Hz
};

SpeakerVoice MakeVoice(std::uint64_t seed, int speaker);

/// `seconds` of syllable-structured speech for one voice.  Samples are on
/// the 16-bit PCM grid.
Waveform SynthesizeUtterance(const SpeakerVoice &voice, double seconds, int sample_rate,
                             std::uint64_t seed);

enum class UtteranceRole { kEnroll, kTrain, kTest, kDev };

struct Utterance {
  std::string id;
  int speaker = 0;
  UtteranceRole role = UtteranceRole::kTrain;
  Waveform wave;
};

struct MixtureRecord {
  std::string id;
  Waveform mixture;
  std::vector<Waveform> sources;  // scaled, mixture = sum of sources
  std::vector<int> speakers;
  std::vector<std::string> utterances;
  double snr_db = 0.0;  // of source 0 against source 1
};

struct Corpus {
  CorpusSpec spec;
  std::vector<Utterance> utterances;
  std::vector<MixtureRecord> train, validation, test;

  std::vector<const Utterance *> WithRole(UtteranceRole role) const;
};

Corpus GenerateCorpus(const CorpusSpec &spec);

/// Directory layout: manifest.tsv, spec.cfg, utterances/<id>.wav and
/// mixtures/<split>/<id>/{mix,s0,s1}.wav.
void SaveCorpus(const Corpus &corpus, const std::string &dir);
Corpus LoadCorpus(const std::string &dir);

/// Rounds onto the 16-bit PCM grid used by the WAV writer.
VectorXd QuantizePcm16(const VectorXd &x);

}  // namespace dcsep
