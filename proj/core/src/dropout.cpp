// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/dropout.hpp"

#include <algorithm>
#include <cmath>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

void validate_entry(const DropoutEntry& entry) {
  if (entry.rate < 0.0 || entry.rate >= 1.0)
    throw InvalidRate("dropout rate " + std::to_string(entry.rate) +
                      " outside [0, 1)");
  if (entry.location == DropoutLocation::RnnDropCell &&
      entry.granularity == MaskGranularity::PerSequence)
    throw ForbiddenConfiguration(
        "rnndrop-sequence is rejected: a per-sequence cell-state mask "
        "compounds 1/(1-p) scaling every step and the cell value explodes");
}

}  // namespace

bool DropoutPolicy::empty() const {
  for (const auto& stage : stages)
    for (const auto& entry : stage.entries)
      if (entry.rate > 0.0) return false;
  return true;
}

void DropoutPolicy::validate() const {
  if (stages.empty()) throw ShapeError("dropout policy needs >= 1 stage");
  for (const auto& stage : stages) {
    for (const auto& entry : stage.entries) validate_entry(entry);
    if (stage.combination == CombinationMode::Stochastic &&
        stage.entries.size() < 2)
      throw ShapeError("stochastic combination needs >= 2 dropout entries");
  }
  if (!std::is_sorted(switch_epochs.begin(), switch_epochs.end()))
    throw ShapeError("cascade switch epochs must be increasing");
}

DropoutEntry parse_dropout_entry(const std::string& name, double rate) {
  DropoutEntry entry;
  entry.rate = rate;
  std::string loc, gran;
  const auto dash = name.rfind('-');
  if (dash != std::string::npos) {
    loc = name.substr(0, dash);
    gran = name.substr(dash + 1);
  }
  if (gran == "step")
    entry.granularity = MaskGranularity::PerStep;
  else if (gran == "sequence" || gran == "seq")
    entry.granularity = MaskGranularity::PerSequence;
  else
    throw InvalidMode("unknown dropout name: " + name);
  if (loc == "forward")
    entry.location = DropoutLocation::ForwardConnection;
  else if (loc == "rnndrop")
    entry.location = DropoutLocation::RnnDropCell;
  else if (loc == "nml")
    entry.location = DropoutLocation::NmlCellUpdate;
  else
    throw InvalidMode("unknown dropout name: " + name);
  validate_entry(entry);
  return entry;
}

std::string dropout_entry_name(const DropoutEntry& entry) {
  std::string loc;
  switch (entry.location) {
    case DropoutLocation::ForwardConnection: loc = "forward"; break;
    case DropoutLocation::RnnDropCell: loc = "rnndrop"; break;
    case DropoutLocation::NmlCellUpdate: loc = "nml"; break;
  }
  return loc + (entry.granularity == MaskGranularity::PerStep ? "-step"
                                                              : "-sequence");
}

Eigen::VectorXd sample_mask(int size, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw InvalidRate("dropout rate " + std::to_string(p) + " outside [0, 1)");
  Eigen::VectorXd mask(size);
  const double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < size; ++i)
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

MaskSet masks_for_utterance(const DropoutStage& stage, int num_steps,
                            const std::vector<int>& cells_per_direction,
                            Rng& rng, std::optional<int> stochastic_choice) {
  for (const auto& entry : stage.entries) validate_entry(entry);
  const int num_layers = static_cast<int>(cells_per_direction.size());
  MaskSet set;
  set.num_steps = num_steps;
  set.layers.resize(num_layers);

  for (std::size_t e = 0; e < stage.entries.size(); ++e) {
    const DropoutEntry& entry = stage.entries[e];
    if (stage.combination == CombinationMode::Stochastic) {
      if (!stochastic_choice)
        throw ShapeError("stochastic combination needs a minibatch decision");
      if (static_cast<int>(e) != *stochastic_choice) continue;
    }
    if (entry.rate == 0.0) continue;
    set.active_locations.push_back(entry.location);
    const int copies =
        entry.granularity == MaskGranularity::PerStep ? num_steps : 1;
    for (int layer = 0; layer < num_layers; ++layer) {
      const int cells = cells_per_direction[layer];
      LayerMasks& lm = set.layers[layer];
      if (entry.location == DropoutLocation::ForwardConnection) {
        for (int c = 0; c < copies; ++c)
          lm.forward.push_back(sample_mask(2 * cells, entry.rate, rng));
      } else {
        lm.cell_location = entry.location;
        for (int c = 0; c < copies; ++c)
          lm.cell_fwd.push_back(sample_mask(cells, entry.rate, rng));
        for (int c = 0; c < copies; ++c)
          lm.cell_bwd.push_back(sample_mask(cells, entry.rate, rng));
      }
    }
  }
  return set;
}

Eigen::VectorXd cell_state_with_dropout(const Eigen::VectorXd& f_t,
                                        const Eigen::VectorXd& c_prev,
                                        const Eigen::VectorXd& i_t,
                                        const Eigen::VectorXd& g_t,
                                        const Eigen::VectorXd& m_t,
                                        DropoutLocation loc) {
  switch (loc) {
    case DropoutLocation::RnnDropCell:
      return m_t.array() *
             (f_t.array() * c_prev.array() + i_t.array() * g_t.array());
    case DropoutLocation::NmlCellUpdate:
      return f_t.array() * c_prev.array() +
             m_t.array() * i_t.array() * g_t.array();
    case DropoutLocation::ForwardConnection:
      throw WrongLocation(
          "forward dropout applies to layer outputs, not the cell state");
  }
  throw WrongLocation("unknown dropout location");
}

double expected_memory_retention(double p, int steps) {
  if (p < 0.0 || p >= 1.0)
    throw InvalidRate("dropout rate " + std::to_string(p) + " outside [0, 1)");
  if (steps < 0) throw ShapeError("steps must be >= 0");
  return std::pow(1.0 - p, steps);
}

const DropoutStage& cascade_active_stage(const DropoutPolicy& policy,
                                         int triggers_fired) {
  if (policy.stages.empty())
    throw ShapeError("dropout policy needs >= 1 stage");
  const int idx = std::clamp(triggers_fired, 0,
                             static_cast<int>(policy.stages.size()) - 1);
  return policy.stages[idx];
}

int cascade_triggers_for_epoch(const DropoutPolicy& policy, int epoch) {
  int fired = 0;
  for (int at : policy.switch_epochs)
    if (epoch >= at) ++fired;
  return fired;
}

}  // namespace seqtrain
