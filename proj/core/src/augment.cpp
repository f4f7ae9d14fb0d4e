// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

std::string make_variant_id(double warp, double hop) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "w%.1f_h%g", warp, hop);
  return buf;
}

AugmentPlan make_plan(const std::vector<double>& warps,
                      const std::vector<double>& hops, AugmentMode mode) {
  AugmentPlan plan;
  plan.mode = mode;
  for (double w : warps)
    for (double h : hops)
      if (!(w == 1.0 && h == 10.0))
        plan.variants.push_back({w, h, make_variant_id(w, h)});
  std::sort(plan.variants.begin(), plan.variants.end(),
            [](const auto& a, const auto& b) {
              return std::tie(a.warp_factor, a.hop_ms) <
                     std::tie(b.warp_factor, b.hop_ms);
            });
  // Identity variant first.
  plan.variants.insert(plan.variants.begin(),
                       {1.0, 10.0, make_variant_id(1.0, 10.0)});
  return plan;
}

}  // namespace

AugmentMode parse_augment_mode(const std::string& name) {
  if (name == "none") return AugmentMode::None;
  if (name == "ninefold") return AugmentMode::Ninefold;
  if (name == "twentyfold") return AugmentMode::Twentyfold;
  if (name == "custom") return AugmentMode::Custom;
  throw InvalidMode("unknown augment mode: " + name);
}

std::string augment_mode_name(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::None: return "none";
    case AugmentMode::Ninefold: return "ninefold";
    case AugmentMode::Twentyfold: return "twentyfold";
    case AugmentMode::Custom: return "custom";
  }
  return "?";
}

AugmentPlan build_plan(AugmentMode mode) {
  switch (mode) {
    case AugmentMode::None:
      return make_plan({1.0}, {10.0}, mode);
    case AugmentMode::Ninefold:
      return make_plan({0.8, 1.0, 1.2}, {8.0, 10.0, 11.0}, mode);
    case AugmentMode::Twentyfold:
      return make_plan({0.7, 0.8, 1.0, 1.2, 1.3}, {8.0, 10.0, 11.0, 12.0},
                       mode);
    case AugmentMode::Custom:
      throw InvalidMode("custom plans need explicit warp/hop lists");
  }
  throw InvalidMode("unknown augment mode");
}

AugmentPlan build_custom_plan(const std::vector<double>& warps,
                              const std::vector<double>& hops) {
  if (warps.empty() || hops.empty())
    throw InvalidMode("custom plan needs at least one warp and one hop");
  return make_plan(warps, hops, AugmentMode::Custom);
}

const PerturbationVariant& variant_for_epoch(const AugmentPlan& plan,
                                             int epoch) {
  return plan.variants[static_cast<std::size_t>(epoch) %
                       plan.variants.size()];
}

std::vector<FeatureMatrix> materialize_variant(
    const std::vector<Waveform>& corpus, const PerturbationVariant& v,
    const FilterbankConfig& base_cfg, bool deltas, bool cmvn) {
  if (corpus.empty()) throw ShapeError("materialize_variant: empty corpus");
  FilterbankConfig cfg = base_cfg;
  cfg.warp_factor = v.warp_factor;
  cfg.hop_ms = v.hop_ms;

  std::vector<FeatureMatrix> feats;
  feats.reserve(corpus.size());
  for (const auto& w : corpus) {
    FeatureMatrix fm = compute_logmel(w, cfg);
    if (deltas) fm = append_deltas(fm);
    feats.push_back(std::move(fm));
  }
  if (cmvn) feats = cmvn_per_speaker(std::move(feats));
  return feats;
}

}  // namespace seqtrain
