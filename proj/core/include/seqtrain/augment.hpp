// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_AUGMENT_HPP
#define SEQTRAIN_AUGMENT_HPP

#include <string>
#include <vector>

#include "seqtrain/features.hpp"

namespace seqtrain {

struct PerturbationVariant {
  double warp_factor = 1.0;
  double hop_ms = 10.0;
  std::string variant_id;  // e.g. "w1.0_h10"
};

enum class AugmentMode { None, Ninefold, Twentyfold, Custom };

AugmentMode parse_augment_mode(const std::string& name);
std::string augment_mode_name(AugmentMode mode);

// Variant grid for max perturbation. The identity variant (warp 1.0, hop
// 10ms) is always present and ordered first; the rest follow in (warp, hop)
// lexicographic order so epoch 0 always trains on clean features.
struct AugmentPlan {
  std::vector<PerturbationVariant> variants;
  AugmentMode mode = AugmentMode::None;
};

AugmentPlan build_plan(AugmentMode mode);
AugmentPlan build_custom_plan(const std::vector<double>& warps,
                              const std::vector<double>& hops);

// variants[epoch mod |variants|].
const PerturbationVariant& variant_for_epoch(const AugmentPlan& plan,
                                             int epoch);

// Full front end for one variant: log-mel with the variant's warp and hop,
// deltas, then per-speaker CMVN. CMVN statistics are recomputed per variant.
std::vector<FeatureMatrix> materialize_variant(
    const std::vector<Waveform>& corpus, const PerturbationVariant& v,
    const FilterbankConfig& base_cfg, bool deltas = true, bool cmvn = true);

}  // namespace seqtrain

#endif  // SEQTRAIN_AUGMENT_HPP
