// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/features.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <map>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

double vtln_warp_frequency(double freq, double alpha, double /*freq_low*/,
                           double freq_high) {
  if (alpha < 0.5 || alpha > 1.5)
    throw InvalidWarp("warp factor " + std::to_string(alpha) +
                      " outside [0.5, 1.5]");
  // Slope alpha up to a knee, then a linear segment that pins freq_high to
  // itself. The knee sits at 0.8 * freq_high / max(alpha, 1) so the warped
  // knee never exceeds 0.8 * freq_high and both segments stay increasing.
  const double knee = 0.8 * freq_high / std::max(alpha, 1.0);
  if (freq <= knee) return alpha * freq;
  const double warped_knee = alpha * knee;
  return warped_knee +
         (freq - knee) * (freq_high - warped_knee) / (freq_high - knee);
}

FeatureMatrix compute_logmel(const Waveform& w, const FilterbankConfig& cfg) {
  if (w.sample_rate <= 0) throw ShapeError("sample_rate must be positive");
  if (cfg.num_filters < 1) throw ShapeError("num_filters must be >= 1");
  const double fs = w.sample_rate;
  const double freq_high = cfg.freq_high > 0 ? cfg.freq_high : fs / 2.0;
  if (!(cfg.freq_low > 0 && cfg.freq_low < freq_high && freq_high <= fs / 2.0))
    throw ShapeError("invalid filterbank frequency range");

  const int win_len = static_cast<int>(std::lround(cfg.window_ms * fs / 1000.0));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * fs / 1000.0));
  const int n = static_cast<int>(w.samples.size());
  if (n < win_len)
    throw InputTooShort("waveform of " + std::to_string(n) +
                        " samples shorter than one " +
                        std::to_string(win_len) + "-sample window");
  const int num_frames = 1 + (n - win_len) / hop;
  const int fft_size = cfg.fft_size > 0 ? cfg.fft_size : next_pow2(win_len);
  const int num_bins = fft_size / 2 + 1;

  // Mel-spaced filter edges, VTLN-warped before the triangles are built.
  const double mel_low = hz_to_mel(cfg.freq_low);
  const double mel_high = hz_to_mel(freq_high);
  std::vector<double> edge_hz(cfg.num_filters + 2);
  for (int i = 0; i < cfg.num_filters + 2; ++i) {
    const double mel =
        mel_low + (mel_high - mel_low) * i / (cfg.num_filters + 1);
    edge_hz[i] =
        vtln_warp_frequency(mel_to_hz(mel), cfg.warp_factor, cfg.freq_low,
                            freq_high);
  }
  Eigen::MatrixXd filters =
      Eigen::MatrixXd::Zero(cfg.num_filters, num_bins);
  for (int j = 0; j < cfg.num_filters; ++j) {
    const double left = edge_hz[j], center = edge_hz[j + 1],
                 right = edge_hz[j + 2];
    for (int b = 0; b < num_bins; ++b) {
      const double f = b * fs / fft_size;
      if (f > left && f < right) {
        filters(j, b) = f <= center ? (f - left) / (center - left)
                                    : (right - f) / (right - center);
      }
    }
  }

  Eigen::VectorXd window(win_len);
  for (int i = 0; i < win_len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win_len - 1));

  Eigen::FFT<double> fft;
  std::vector<double> frame(fft_size, 0.0);
  std::vector<std::complex<double>> spectrum;

  FeatureMatrix fm;
  fm.data.resize(num_frames, cfg.num_filters);
  fm.frame_period_ms = cfg.hop_ms;
  fm.utterance_id = w.utterance_id;
  fm.speaker_id = w.speaker_id;
  fm.provenance = {cfg.warp_factor, cfg.hop_ms, false};

  for (int t = 0; t < num_frames; ++t) {
    const double* src = w.samples.data() + t * hop;
    frame[0] = src[0] - cfg.preemphasis * src[0];
    for (int i = 1; i < win_len; ++i)
      frame[i] = src[i] - cfg.preemphasis * src[i - 1];
    for (int i = 0; i < win_len; ++i) frame[i] *= window[i];
    std::fill(frame.begin() + win_len, frame.end(), 0.0);
    fft.fwd(spectrum, frame);
    Eigen::VectorXd power(num_bins);
    for (int b = 0; b < num_bins; ++b) power[b] = std::norm(spectrum[b]);
    Eigen::VectorXd energies = filters * power;
    for (int j = 0; j < cfg.num_filters; ++j)
      fm.data(t, j) = std::log(std::max(energies[j], cfg.log_floor));
  }
  return fm;
}

FeatureMatrix append_deltas(const FeatureMatrix& fm) {
  const int t_len = fm.num_frames();
  const int d = fm.dim();
  FeatureMatrix out = fm;
  out.data.resize(t_len, 3 * d);
  out.data.leftCols(d) = fm.data;

  // Regression window +-2 with edge replication; denominator 2*(1^2+2^2).
  auto deltas = [t_len, d](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd dx(t_len, d);
    for (int t = 0; t < t_len; ++t) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
      for (int k = 1; k <= 2; ++k) {
        const int hi = std::min(t + k, t_len - 1);
        const int lo = std::max(t - k, 0);
        acc += k * (x.row(hi) - x.row(lo));
      }
      dx.row(t) = acc / 10.0;
    }
    return dx;
  };

  Eigen::MatrixXd d1 = deltas(fm.data);
  out.data.middleCols(d, d) = d1;
  out.data.rightCols(d) = deltas(d1);
  return out;
}

std::vector<FeatureMatrix> cmvn_per_speaker(std::vector<FeatureMatrix> feats) {
  std::map<std::string, std::vector<FeatureMatrix*>> by_speaker;
  for (auto& fm : feats) by_speaker[fm.speaker_id].push_back(&fm);

  for (auto& [speaker, group] : by_speaker) {
    const int d = group.front()->dim();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
    long count = 0;
    for (const auto* fm : group) {
      if (fm->dim() != d)
        throw ShapeError("inconsistent feature dim for speaker " + speaker);
      sum += fm->data.colwise().sum().transpose();
      count += fm->num_frames();
    }
    const Eigen::VectorXd mean = sum / count;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(d);
    for (const auto* fm : group)
      sq += (fm->data.rowwise() - mean.transpose())
                .array().square().colwise().sum().matrix().transpose();
    const Eigen::VectorXd var = sq / count;

    Eigen::VectorXd scale(d);
    for (int j = 0; j < d; ++j)
      scale[j] = var[j] > 1e-12 ? 1.0 / std::sqrt(var[j]) : 1.0;
    for (auto* fm : group) {
      fm->data.rowwise() -= mean.transpose();
      fm->data = fm->data.array().rowwise() * scale.transpose().array();
    }
  }
  return feats;
}

FeatureMatrix stack_and_stride(const FeatureMatrix& fm, int context,
                               int stride) {
  if (context < 0 || stride < 1)
    throw ShapeError("stack_and_stride requires context >= 0, stride >= 1");
  const int t_in = fm.num_frames();
  const int d = fm.dim();
  const int t_out = (t_in + stride - 1) / stride;
  const int width = 2 * context + 1;

  FeatureMatrix out = fm;
  out.data.resize(t_out, width * d);
  for (int r = 0; r < t_out; ++r) {
    const int t = r * stride;
    for (int k = -context; k <= context; ++k) {
      const int src = std::clamp(t + k, 0, t_in - 1);
      out.data.block(r, (k + context) * d, 1, d) = fm.data.row(src);
    }
  }
  out.frame_period_ms = fm.frame_period_ms * stride;
  out.provenance.stacked = true;
  return out;
}

}  // namespace seqtrain
