// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_DROPOUT_HPP
#define SEQTRAIN_DROPOUT_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "seqtrain/rng.hpp"

namespace seqtrain {

// ForwardConnection drops layer outputs on the non-recurrent path.
// RnnDropCell rescales the whole cell state; NmlCellUpdate rescales only the
// incremental cell update, so retained memory is never reset.
enum class DropoutLocation { ForwardConnection, RnnDropCell, NmlCellUpdate };

enum class MaskGranularity { PerStep, PerSequence };

struct DropoutEntry {
  DropoutLocation location;
  MaskGranularity granularity;
  double rate = 0.2;
};

enum class CombinationMode { Naive, Stochastic, Cascade };

// One stage of a policy: the entries applied together (naively) plus how
// multiple entries are combined within the stage.
struct DropoutStage {
  std::vector<DropoutEntry> entries;
  CombinationMode combination = CombinationMode::Naive;
  double choice_prob = 0.5;  // P(entry 0) under Stochastic
};

// Cascade policies carry several stages and a switch trigger; single-stage
// policies are the common case. Stage switching is driven by
// cascade_active_stage below.
struct DropoutPolicy {
  std::vector<DropoutStage> stages;
  // Epoch indices (0-based) at which the cascade advances one stage. Empty
  // means manual triggering only.
  std::vector<int> switch_epochs;

  bool empty() const;
  static DropoutPolicy none() { return DropoutPolicy{{DropoutStage{}}, {}}; }
  // Validates rates, the forbidden RnnDrop+PerSequence pair, and stochastic
  // arity. Throws on violation.
  void validate() const;
};

// Parses the table names used in configs: "forward-step", "forward-sequence",
// "rnndrop-step", "nml-step", "nml-sequence".
DropoutEntry parse_dropout_entry(const std::string& name, double rate);
std::string dropout_entry_name(const DropoutEntry& entry);

// Masks for one utterance under one policy stage. Indexed per layer; forward
// masks cover the concatenated layer output, cell masks one direction each.
// A vector holds either one mask (per-sequence) or T masks (per-step).
struct LayerMasks {
  std::vector<Eigen::VectorXd> forward;
  std::vector<Eigen::VectorXd> cell_fwd;
  std::vector<Eigen::VectorXd> cell_bwd;
  DropoutLocation cell_location = DropoutLocation::NmlCellUpdate;

  const Eigen::VectorXd* forward_at(int t) const {
    if (forward.empty()) return nullptr;
    return &forward[forward.size() == 1 ? 0 : t];
  }
  const Eigen::VectorXd* cell_at(int t, bool backward_dir) const {
    const auto& masks = backward_dir ? cell_bwd : cell_fwd;
    if (masks.empty()) return nullptr;
    return &masks[masks.size() == 1 ? 0 : t];
  }
};

struct MaskSet {
  std::vector<LayerMasks> layers;
  // Which locations were actually sampled (records the stochastic choice).
  std::vector<DropoutLocation> active_locations;
  int num_steps = 0;
};

/// i.i.d. entries: 0 with probability p, else 1/(1-p). Throws InvalidRate
/// unless 0 <= p < 1.
Eigen::VectorXd sample_mask(int size, double p, Rng& rng);

/// Samples a MaskSet for one utterance of T steps. `cells_per_direction`
/// holds one entry per layer. Under Stochastic combination
/// `stochastic_choice` (the per-minibatch draw) selects which entry is
/// active; the other location stays all-ones.
MaskSet masks_for_utterance(const DropoutStage& stage, int num_steps,
                            const std::vector<int>& cells_per_direction,
                            Rng& rng,
                            std::optional<int> stochastic_choice = {});

/// Cell-state combination for the two recurrent dropout variants:
///   RnnDropCell:  c_t = m  .* (f .* c_prev + i .* g)
///   NmlCellUpdate: c_t = f .* c_prev + m .* i .* g
Eigen::VectorXd cell_state_with_dropout(const Eigen::VectorXd& f_t,
                                        const Eigen::VectorXd& c_prev,
                                        const Eigen::VectorXd& i_t,
                                        const Eigen::VectorXd& g_t,
                                        const Eigen::VectorXd& m_t,
                                        DropoutLocation loc);

/// Probability that a per-step cell-dropout mask leaves a cell unreset for n
/// consecutive steps: (1-p)^n.
double expected_memory_retention(double p, int steps);

/// Stage active after `triggers_fired` cascade switches.
const DropoutStage& cascade_active_stage(const DropoutPolicy& policy,
                                         int triggers_fired);

/// Number of configured switch epochs at or below `epoch` (0-based), i.e.
/// the stage index for epoch-triggered cascades.
int cascade_triggers_for_epoch(const DropoutPolicy& policy, int epoch);

}  // namespace seqtrain

#endif  // SEQTRAIN_DROPOUT_HPP
