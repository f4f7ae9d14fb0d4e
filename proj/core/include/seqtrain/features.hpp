// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_FEATURES_HPP
#define SEQTRAIN_FEATURES_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace seqtrain {

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  double sample_rate = 16000.0;
  std::string utterance_id;
  std::string speaker_id;
};

struct FilterbankConfig {
  int num_filters = 40;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  double warp_factor = 1.0;   // VTLN alpha, applied to the mel filter grid
  int fft_size = 0;           // 0 = smallest power of two >= window length
  double freq_low = 20.0;
  double freq_high = 0.0;     // 0 = Nyquist
  double log_floor = 1e-10;
  double preemphasis = 0.97;  // Hamming window, no dither
};

struct Provenance {
  double warp_factor = 1.0;
  double hop_ms = 10.0;
  bool stacked = false;
};

struct FeatureMatrix {
  Eigen::MatrixXd data;  // T x D
  double frame_period_ms = 10.0;
  std::string utterance_id;
  std::string speaker_id;
  Provenance provenance;

  int num_frames() const { return static_cast<int>(data.rows()); }
  int dim() const { return static_cast<int>(data.cols()); }
};

/// Log-mel filterbank energies. Frame count is
/// 1 + floor((len_ms - window_ms) / hop_ms); throws InputTooShort if the
/// waveform does not cover one window.
FeatureMatrix compute_logmel(const Waveform& w, const FilterbankConfig& cfg);

/// Piecewise-linear VTLN warp of a frequency. Slope `alpha` on the lower
/// segment, a boundary-preserving linear segment above the knee so that 0
/// maps to 0 and freq_high maps to freq_high. Identity when alpha == 1.
/// Throws InvalidWarp for alpha outside [0.5, 1.5].
double vtln_warp_frequency(double freq, double alpha, double freq_low,
                           double freq_high);

/// Appends delta and delta-delta columns (linear regression over a +-2 frame
/// window with edge replication). Output dim is 3x the input dim.
FeatureMatrix append_deltas(const FeatureMatrix& fm);

/// Per-speaker cepstral mean/variance normalization over the pooled frames of
/// each speaker. Zero-variance dimensions are mean-subtracted only.
std::vector<FeatureMatrix> cmvn_per_speaker(std::vector<FeatureMatrix> feats);

/// Concatenates frames [t-context .. t+context] (edge replication) and emits
/// rows at t = 0, stride, 2*stride, ... T_out = ceil(T/stride) and the frame
/// period is multiplied by the stride.
FeatureMatrix stack_and_stride(const FeatureMatrix& fm, int context,
                               int stride);

}  // namespace seqtrain

#endif  // SEQTRAIN_FEATURES_HPP
