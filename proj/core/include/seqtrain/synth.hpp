// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_SYNTH_HPP
#define SEQTRAIN_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "seqtrain/features.hpp"

namespace seqtrain {

// Desk-scale synthetic task: each token is a pure tone at the center
// frequency of a distinct mel filter, utterances are concatenations of noisy
// tone segments with random durations.
struct SyntheticTaskSpec {
  int alphabet_size = 5;
  int train_utterances = 200;
  int cv_utterances = 50;
  int min_tokens = 3;
  int max_tokens = 8;
  int min_duration_frames = 10;  // at the base hop
  int max_duration_frames = 20;
  double noise_level = 0.05;
  int speakers = 4;
  double sample_rate = 16000.0;
};

struct SyntheticCorpus {
  std::string train_manifest, cv_manifest;
  std::string train_labels, cv_labels;
  std::string train_archive, cv_archive;
};

/// Tone frequency per token: centers of evenly spread mel filters. Throws if
/// the alphabet cannot get pairwise-distinct filters.
std::vector<double> prototype_frequencies(const SyntheticTaskSpec& spec,
                                          const FilterbankConfig& fbank);

/// Renders one utterance's waveform from its token string.
Waveform render_utterance(const std::vector<int>& tokens,
                          const std::vector<int>& duration_frames,
                          const std::vector<double>& tone_hz,
                          const SyntheticTaskSpec& spec,
                          const FilterbankConfig& fbank, double noise_level,
                          std::uint64_t noise_seed);

/// Writes WAVs, manifests, label files and identity-variant feature archives
/// under out_dir. Deterministic per seed, byte for byte.
SyntheticCorpus generate_synthetic_corpus(const SyntheticTaskSpec& spec,
                                          const FilterbankConfig& fbank,
                                          std::uint64_t seed,
                                          const std::string& out_dir);

}  // namespace seqtrain

#endif  // SEQTRAIN_SYNTH_HPP
