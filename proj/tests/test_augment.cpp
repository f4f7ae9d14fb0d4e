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
#include <map>
#include <set>

#include "seqtrain/augment.hpp"
#include "seqtrain/error.hpp"

using namespace seqtrain;

namespace {

Waveform tone(double freq_hz, double seconds, const std::string& id,
              const std::string& spk) {
  Waveform w;
  w.sample_rate = 16000.0;
  w.utterance_id = id;
  w.speaker_id = spk;
  const int n = static_cast<int>(seconds * w.sample_rate);
  for (int i = 0; i < n; ++i)
    w.samples.push_back(0.5 * std::sin(2.0 * M_PI * freq_hz * i / 16000.0));
  return w;
}

std::set<std::pair<double, double>> grid(const AugmentPlan& plan) {
  std::set<std::pair<double, double>> pairs;
  for (const auto& v : plan.variants) pairs.emplace(v.warp_factor, v.hop_ms);
  return pairs;
}

}  // namespace

TEST_CASE("ninefold and twentyfold plans cover exactly the stated grids") {
  const AugmentPlan nine = build_plan(AugmentMode::Ninefold);
  REQUIRE(nine.variants.size() == 9);
  std::set<std::pair<double, double>> expected9;
  for (double w : {0.8, 1.0, 1.2})
    for (double h : {8.0, 10.0, 11.0}) expected9.emplace(w, h);
  CHECK(grid(nine) == expected9);

  const AugmentPlan twenty = build_plan(AugmentMode::Twentyfold);
  REQUIRE(twenty.variants.size() == 20);
  std::set<std::pair<double, double>> expected20;
  for (double w : {0.7, 0.8, 1.0, 1.2, 1.3})
    for (double h : {8.0, 10.0, 11.0, 12.0}) expected20.emplace(w, h);
  CHECK(grid(twenty) == expected20);

  const AugmentPlan none = build_plan(AugmentMode::None);
  REQUIRE(none.variants.size() == 1);
  CHECK(none.variants[0].warp_factor == doctest::Approx(1.0));
  CHECK(none.variants[0].hop_ms == doctest::Approx(10.0));
}

TEST_CASE("the identity variant is always first and appears exactly once") {
  for (AugmentMode mode :
       {AugmentMode::None, AugmentMode::Ninefold, AugmentMode::Twentyfold}) {
    const AugmentPlan plan = build_plan(mode);
    CHECK(plan.variants[0].warp_factor == doctest::Approx(1.0));
    CHECK(plan.variants[0].hop_ms == doctest::Approx(10.0));
    int identity_count = 0;
    for (const auto& v : plan.variants)
      if (v.warp_factor == 1.0 && v.hop_ms == 10.0) ++identity_count;
    CHECK(identity_count == 1);
    CHECK(grid(plan).size() == plan.variants.size());  // no duplicates
  }
}

TEST_CASE("variant_for_epoch cycles modularly") {
  const AugmentPlan nine = build_plan(AugmentMode::Ninefold);
  CHECK(variant_for_epoch(nine, 0).variant_id == nine.variants[0].variant_id);
  CHECK(variant_for_epoch(nine, 9).variant_id == nine.variants[0].variant_id);

  std::set<std::string> seen;
  for (int e = 0; e < 9; ++e) seen.insert(variant_for_epoch(nine, e).variant_id);
  CHECK(seen.size() == 9);

  const AugmentPlan twenty = build_plan(AugmentMode::Twentyfold);
  CHECK(variant_for_epoch(twenty, 23).variant_id ==
        twenty.variants[3].variant_id);

  // N full cycles touch every variant exactly N times.
  const int n = 4;
  std::map<std::string, int> counts;
  for (int e = 0; e < n * 9; ++e) ++counts[variant_for_epoch(nine, e).variant_id];
  REQUIRE(counts.size() == 9);
  for (const auto& [id, c] : counts) CHECK(c == n);
}

TEST_CASE("mode parsing round-trips and rejects unknown names") {
  CHECK(parse_augment_mode("none") == AugmentMode::None);
  CHECK(parse_augment_mode("ninefold") == AugmentMode::Ninefold);
  CHECK(parse_augment_mode("twentyfold") == AugmentMode::Twentyfold);
  CHECK_THROWS_AS(parse_augment_mode("elevenfold"), InvalidMode);
}

TEST_CASE("identity variant reproduces the unaugmented pipeline") {
  std::vector<Waveform> corpus = {tone(440.0, 0.6, "u1", "spk0"),
                                  tone(700.0, 0.8, "u2", "spk0")};
  FilterbankConfig cfg;

  const PerturbationVariant identity{1.0, 10.0, "identity"};
  auto via_variant = materialize_variant(corpus, identity, cfg);

  std::vector<FeatureMatrix> direct;
  for (const auto& w : corpus) direct.push_back(append_deltas(compute_logmel(w, cfg)));
  direct = cmvn_per_speaker(std::move(direct));

  REQUIRE(via_variant.size() == direct.size());
  for (std::size_t u = 0; u < direct.size(); ++u)
    CHECK((via_variant[u].data - direct[u].data).cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0));
}

TEST_CASE("hop 8 ms on a 1 s utterance yields 122 frames") {
  std::vector<Waveform> corpus = {tone(440.0, 1.0, "u1", "spk0")};
  const PerturbationVariant v{1.0, 8.0, "w1.0_h8"};
  auto feats = materialize_variant(corpus, v, FilterbankConfig{});
  CHECK(feats[0].num_frames() == 122);
  CHECK(feats[0].frame_period_ms == doctest::Approx(8.0));
}

TEST_CASE("opposite warps move a tone's peak filter in opposite directions") {
  FilterbankConfig cfg;
  std::vector<Waveform> corpus = {tone(2000.0, 0.5, "probe", "spk0")};

  auto peak = [&](double warp) {
    const PerturbationVariant v{warp, 10.0, "probe"};
    // Peak straight off the log-mel energies: no deltas, no CMVN.
    auto feats = materialize_variant(corpus, v, cfg, false, false);
    Eigen::VectorXd mean = feats[0].data.colwise().mean();
    int argmax = 0;
    mean.maxCoeff(&argmax);
    return argmax;
  };

  const int base = peak(1.0), low = peak(0.8), high = peak(1.2);
  CHECK(low != base);
  CHECK(high != base);
  CHECK((low - base) * (high - base) < 0);
}

TEST_CASE("materialization is deterministic") {
  std::vector<Waveform> corpus = {tone(500.0, 0.4, "u1", "spk0"),
                                  tone(900.0, 0.4, "u2", "spk1")};
  const PerturbationVariant v{0.8, 11.0, "w0.8_h11"};
  auto a = materialize_variant(corpus, v, FilterbankConfig{});
  auto b = materialize_variant(corpus, v, FilterbankConfig{});
  REQUIRE(a.size() == b.size());
  for (std::size_t u = 0; u < a.size(); ++u)
    CHECK((a[u].data - b[u].data).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}
