// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <doctest.h>

#include <cmath>

#include "seqtrain/error.hpp"
#include "seqtrain/features.hpp"
#include "seqtrain/rng.hpp"

using namespace seqtrain;

namespace {

Waveform tone(double freq_hz, double seconds, double sample_rate = 16000.0) {
  Waveform w;
  w.sample_rate = sample_rate;
  const int n = static_cast<int>(seconds * sample_rate);
  w.samples.resize(n);
  for (int i = 0; i < n; ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * M_PI * freq_hz * i / sample_rate);
  return w;
}

double hz_to_mel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

// Center frequency of filter j on the unwarped mel grid.
double filter_center(const FilterbankConfig& cfg, int j, double nyquist) {
  const double high = cfg.freq_high > 0 ? cfg.freq_high : nyquist;
  const double lo = hz_to_mel(cfg.freq_low), hi = hz_to_mel(high);
  return mel_to_hz(lo + (hi - lo) * (j + 1) / (cfg.num_filters + 1));
}

}  // namespace

TEST_CASE("logmel frame count follows the window/hop formula") {
  FilterbankConfig cfg;
  Waveform w = tone(440.0, 1.0);

  FeatureMatrix fm = compute_logmel(w, cfg);
  CHECK(fm.num_frames() == 98);  // 1 + floor(975 / 10)
  CHECK(fm.dim() == 40);
  CHECK(fm.frame_period_ms == doctest::Approx(10.0));

  cfg.hop_ms = 8.0;
  CHECK(compute_logmel(w, cfg).num_frames() == 122);  // 1 + floor(975 / 8)

  // Randomized lengths across the hop grid.
  Rng rng(7);
  for (double hop : {8.0, 10.0, 11.0, 12.0}) {
    cfg.hop_ms = hop;
    for (int trial = 0; trial < 20; ++trial) {
      const double len_ms = 30.0 + rng.uniform() * 2000.0;
      Waveform wr = tone(300.0, len_ms / 1000.0);
      const double exact_ms = wr.samples.size() * 1000.0 / wr.sample_rate;
      const int expected =
          1 + static_cast<int>(std::floor((exact_ms - cfg.window_ms) / hop));
      CHECK(compute_logmel(wr, cfg).num_frames() == expected);
    }
  }
}

TEST_CASE("logmel of silence is the log floor everywhere") {
  FilterbankConfig cfg;
  Waveform w;
  w.sample_rate = 16000.0;
  w.samples.assign(16000, 0.0);
  FeatureMatrix fm = compute_logmel(w, cfg);
  const double floor_val = std::log(cfg.log_floor);
  for (int t = 0; t < fm.num_frames(); ++t)
    for (int d = 0; d < fm.dim(); ++d)
      CHECK(fm.data(t, d) == doctest::Approx(floor_val));
}

TEST_CASE("logmel rejects sub-window input") {
  FilterbankConfig cfg;
  Waveform w = tone(440.0, 0.020);  // 20 ms < 25 ms window
  CHECK_THROWS_AS(compute_logmel(w, cfg), InputTooShort);
}

TEST_CASE("a pure tone at a filter center peaks in that filter") {
  FilterbankConfig cfg;
  const double nyquist = 8000.0;
  for (int j : {5, 12, 20, 28, 35}) {
    Waveform w = tone(filter_center(cfg, j, nyquist), 0.5);
    FeatureMatrix fm = compute_logmel(w, cfg);
    Eigen::VectorXd mean = fm.data.colwise().mean();
    int argmax = 0;
    mean.maxCoeff(&argmax);
    CHECK(argmax == j);
  }
}

TEST_CASE("vtln warp: identity, fixed points, and range check") {
  CHECK(vtln_warp_frequency(1000.0, 1.0, 20.0, 8000.0) ==
        doctest::Approx(1000.0));
  for (double alpha : {0.7, 0.8, 1.0, 1.2, 1.3}) {
    CHECK(vtln_warp_frequency(0.0, alpha, 20.0, 8000.0) ==
          doctest::Approx(0.0));
    CHECK(vtln_warp_frequency(8000.0, alpha, 20.0, 8000.0) ==
          doctest::Approx(8000.0));
  }
  CHECK_THROWS_AS(vtln_warp_frequency(1000.0, 0.4, 20.0, 8000.0), InvalidWarp);
  CHECK_THROWS_AS(vtln_warp_frequency(1000.0, 1.6, 20.0, 8000.0), InvalidWarp);
}

TEST_CASE("vtln warp is strictly increasing on a 1 Hz grid") {
  for (double alpha : {0.7, 0.8, 1.2, 1.3}) {
    double prev = vtln_warp_frequency(0.0, alpha, 20.0, 8000.0);
    for (int f = 1; f <= 8000; ++f) {
      const double cur = vtln_warp_frequency(f, alpha, 20.0, 8000.0);
      CHECK(cur > prev);
      prev = cur;
    }
  }
  // Lower segment carries the raw slope.
  CHECK(vtln_warp_frequency(2000.0, 0.8, 20.0, 8000.0) ==
        doctest::Approx(1600.0));
}

TEST_CASE("deltas: zero slope, ramp slope, and output width") {
  FeatureMatrix fm;
  fm.data = Eigen::MatrixXd::Constant(10, 40, 3.5);
  FeatureMatrix out = append_deltas(fm);
  CHECK(out.dim() == 120);
  CHECK(out.data.rightCols(80).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  const double c = 0.25;
  FeatureMatrix ramp;
  ramp.data.resize(12, 2);
  for (int t = 0; t < 12; ++t) {
    ramp.data(t, 0) = c * t;
    ramp.data(t, 1) = -2.0 * c * t;
  }
  FeatureMatrix dr = append_deltas(ramp);
  for (int t = 2; t < 10; ++t) {
    CHECK(dr.data(t, 2) == doctest::Approx(c).epsilon(1e-12));
    CHECK(dr.data(t, 3) == doctest::Approx(-2.0 * c).epsilon(1e-12));
  }
  for (int t = 4; t < 8; ++t) {
    CHECK(dr.data(t, 4) == doctest::Approx(0.0));
    CHECK(dr.data(t, 5) == doctest::Approx(0.0));
  }
}

TEST_CASE("cmvn: pooled statistics, degenerate variance, idempotence") {
  Rng rng(11);
  auto random_fm = [&](int t, int d, const std::string& id,
                       const std::string& spk) {
    FeatureMatrix fm;
    fm.data.resize(t, d);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < d; ++j) fm.data(i, j) = rng.uniform(-4.0, 4.0);
    fm.utterance_id = id;
    fm.speaker_id = spk;
    return fm;
  };

  std::vector<FeatureMatrix> feats;
  feats.push_back(random_fm(20, 5, "u1", "spkA"));
  feats.push_back(random_fm(33, 5, "u2", "spkA"));
  feats.push_back(random_fm(15, 5, "u3", "spkB"));
  // Constant dimension for speaker B exercises the variance guard.
  feats[2].data.col(3).setConstant(7.0);

  // Independent two-pass oracle over speaker A's pooled frames.
  Eigen::MatrixXd pooled(53, 5);
  pooled << feats[0].data, feats[1].data;
  Eigen::RowVectorXd mean = pooled.colwise().mean();
  Eigen::RowVectorXd var =
      (pooled.rowwise() - mean).array().square().colwise().mean();

  std::vector<FeatureMatrix> norm = cmvn_per_speaker(feats);
  for (int j = 0; j < 5; ++j) {
    CHECK(norm[0].data(4, j) ==
          doctest::Approx((feats[0].data(4, j) - mean(j)) / std::sqrt(var(j)))
              .epsilon(1e-10));
  }

  Eigen::MatrixXd npooled(53, 5);
  npooled << norm[0].data, norm[1].data;
  CHECK(npooled.colwise().mean().cwiseAbs().maxCoeff() < 1e-6);
  Eigen::RowVectorXd nvar = (npooled.rowwise() - npooled.colwise().mean())
                                .array()
                                .square()
                                .colwise()
                                .mean();
  CHECK((nvar.array() - 1.0).abs().maxCoeff() < 1e-6);

  CHECK(norm[2].data.col(3).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  std::vector<FeatureMatrix> twice = cmvn_per_speaker(norm);
  for (std::size_t u = 0; u < norm.size(); ++u)
    CHECK((twice[u].data - norm[u].data).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("cmvn: one speaker, one utterance zeroes its own mean") {
  Rng rng(3);
  FeatureMatrix fm;
  fm.data.resize(16, 3);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 3; ++j) fm.data(i, j) = rng.uniform(-1.0, 1.0);
  fm.speaker_id = "spk";
  auto norm = cmvn_per_speaker({fm});
  CHECK(norm[0].data.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stack_and_stride: shapes, identity, and the hand-worked map") {
  FeatureMatrix fm;
  fm.data.resize(5, 3);
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 3; ++j) fm.data(t, j) = 10 * t + j;
  fm.frame_period_ms = 10.0;

  FeatureMatrix out = stack_and_stride(fm, 1, 3);
  CHECK(out.num_frames() == 2);
  CHECK(out.dim() == 9);
  CHECK(out.frame_period_ms == doctest::Approx(30.0));

  FeatureMatrix same = stack_and_stride(fm, 0, 1);
  CHECK((same.data - fm.data).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(same.frame_period_ms == doctest::Approx(10.0));

  FeatureMatrix f7;
  f7.data.resize(7, 1);
  for (int t = 0; t < 7; ++t) f7.data(t, 0) = t;
  FeatureMatrix s7 = stack_and_stride(f7, 1, 3);
  REQUIRE(s7.num_frames() == 3);
  // Row 0 replicates the first frame on the left, row 2 the last on the right.
  CHECK(s7.data(0, 0) == 0);
  CHECK(s7.data(0, 1) == 0);
  CHECK(s7.data(0, 2) == 1);
  CHECK(s7.data(2, 0) == 5);
  CHECK(s7.data(2, 1) == 6);
  CHECK(s7.data(2, 2) == 6);
}

TEST_CASE("stack_and_stride length is ceil(T/stride), exhaustively") {
  for (int t = 1; t <= 100; ++t) {
    FeatureMatrix fm;
    fm.data = Eigen::MatrixXd::Zero(t, 2);
    for (int stride = 1; stride <= t; ++stride) {
      FeatureMatrix out = stack_and_stride(fm, 1, stride);
      CHECK(out.num_frames() == (t + stride - 1) / stride);
      CHECK(out.dim() == 6);
    }
  }
}
