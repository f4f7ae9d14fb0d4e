// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "seqtrain/archive.hpp"
#include "seqtrain/augment.hpp"
#include "seqtrain/error.hpp"
#include "seqtrain/rng.hpp"
#include "seqtrain/wav.hpp"

namespace seqtrain {

namespace {

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

}  // namespace

std::vector<double> prototype_frequencies(const SyntheticTaskSpec& spec,
                                          const FilterbankConfig& fbank) {
  const double freq_high =
      fbank.freq_high > 0 ? fbank.freq_high : spec.sample_rate / 2.0;
  const double mel_low = hz_to_mel(fbank.freq_low);
  const double mel_high = hz_to_mel(freq_high);
  const int k = spec.alphabet_size;
  if (k >= fbank.num_filters)
    throw ShapeError("alphabet larger than the filterbank; prototypes would "
                     "collide");
  std::vector<double> freqs(k);
  std::vector<int> filters(k);
  for (int tok = 0; tok < k; ++tok) {
    // Filter j has its center at mel point j+1 of the num_filters+2 grid.
    const int j = (tok + 1) * fbank.num_filters / (k + 1);
    filters[tok] = j;
    const double mel =
        mel_low + (mel_high - mel_low) * (j + 1) / (fbank.num_filters + 1);
    freqs[tok] = mel_to_hz(mel);
  }
  for (int a = 0; a + 1 < k; ++a)
    if (filters[a] == filters[a + 1])
      throw ShapeError("prototype filters not pairwise distinct");
  return freqs;
}

Waveform render_utterance(const std::vector<int>& tokens,
                          const std::vector<int>& duration_frames,
                          const std::vector<double>& tone_hz,
                          const SyntheticTaskSpec& spec,
                          const FilterbankConfig& fbank, double noise_level,
                          std::uint64_t noise_seed) {
  Waveform w;
  w.sample_rate = spec.sample_rate;
  Rng noise(noise_seed);
  const double fs = spec.sample_rate;
  for (std::size_t seg = 0; seg < tokens.size(); ++seg) {
    const double freq = tone_hz[tokens[seg]];
    const int samples = static_cast<int>(
        std::lround(duration_frames[seg] * fbank.hop_ms * fs / 1000.0));
    for (int n = 0; n < samples; ++n) {
      double s = 0.4 * std::sin(2.0 * M_PI * freq * n / fs);
      if (noise_level > 0) s += noise.uniform(-noise_level, noise_level);
      w.samples.push_back(s);
    }
  }
  return w;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticTaskSpec& spec,
                                          const FilterbankConfig& fbank,
                                          std::uint64_t seed,
                                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  if (spec.min_duration_frames < 1 || spec.max_duration_frames < spec.min_duration_frames)
    throw ShapeError("invalid duration range");
  if (spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens)
    throw ShapeError("invalid tokens-per-utterance range");
  if (spec.speakers < 1) throw ShapeError("need >= 1 speaker");

  fs::create_directories(fs::path(out_dir) / "wav");
  const std::vector<double> tone_hz = prototype_frequencies(spec, fbank);

  SyntheticCorpus paths;
  paths.train_manifest = (fs::path(out_dir) / "train.manifest").string();
  paths.cv_manifest = (fs::path(out_dir) / "cv.manifest").string();
  paths.train_labels = (fs::path(out_dir) / "train.labels").string();
  paths.cv_labels = (fs::path(out_dir) / "cv.labels").string();
  paths.train_archive = (fs::path(out_dir) / "train.farc").string();
  paths.cv_archive = (fs::path(out_dir) / "cv.farc").string();

  for (int split = 0; split < 2; ++split) {
    const bool is_cv = split == 1;
    const int count = is_cv ? spec.cv_utterances : spec.train_utterances;
    const char* prefix = is_cv ? "cv" : "train";
    Rng rng = derive_rng(seed, "synth", split);

    std::vector<Waveform> waves;
    std::vector<LabeledUtterance> labels;
    std::ofstream manifest(is_cv ? paths.cv_manifest : paths.train_manifest);
    for (int u = 0; u < count; ++u) {
      char utt_id[64], speaker_id[32];
      std::snprintf(utt_id, sizeof(utt_id), "%s-%04d", prefix, u);
      std::snprintf(speaker_id, sizeof(speaker_id), "spk%03d",
                    u % spec.speakers);

      const int num_tokens =
          spec.min_tokens +
          static_cast<int>(rng.below(spec.max_tokens - spec.min_tokens + 1));
      std::vector<int> tokens(num_tokens), durations(num_tokens);
      for (int i = 0; i < num_tokens; ++i) {
        tokens[i] = static_cast<int>(rng.below(spec.alphabet_size));
        durations[i] = spec.min_duration_frames +
                       static_cast<int>(rng.below(spec.max_duration_frames -
                                                  spec.min_duration_frames + 1));
      }
      Waveform w = render_utterance(tokens, durations, tone_hz, spec, fbank,
                                    spec.noise_level, rng.next_u64());
      w.utterance_id = utt_id;
      w.speaker_id = speaker_id;

      const std::string wav_rel = std::string("wav/") + utt_id + ".wav";
      write_wav((fs::path(out_dir) / wav_rel).string(), w);
      manifest << utt_id << ' ' << speaker_id << ' ' << wav_rel << '\n';
      labels.push_back({utt_id, tokens});
      waves.push_back(std::move(w));
    }
    write_labels(is_cv ? paths.cv_labels : paths.train_labels, labels);

    const PerturbationVariant identity{1.0, fbank.hop_ms, "identity"};
    write_farc(is_cv ? paths.cv_archive : paths.train_archive,
               materialize_variant(waves, identity, fbank));
  }
  return paths;
}

}  // namespace seqtrain
