// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_TRAINER_HPP
#define SEQTRAIN_TRAINER_HPP

#include <optional>
#include <string>
#include <vector>

#include "seqtrain/augment.hpp"
#include "seqtrain/config.hpp"
#include "seqtrain/ctc.hpp"
#include "seqtrain/network.hpp"

namespace seqtrain {

// "newbob" schedule state. The LR stays at its initial value until the CV
// token-accuracy improvement over the best previous epoch drops below
// halving_threshold; from then on it halves every epoch until the improvement
// drops below stop_threshold. min_epochs_before_halving suppresses halving
// for the first N epochs; manual_trigger forces halving on regardless.
struct NewbobState {
  double lr = 0.00004;
  double halving_threshold = 0.5;  // percentage points
  double stop_threshold = 0.1;
  int min_epochs_before_halving = 0;  // 0 = disabled
  bool halving_active = false;
  bool manual_trigger = false;
  std::vector<std::pair<int, double>> cv_history;  // (epoch, token acc %)

  double best_acc() const;
};

enum class NewbobAction { Keep, Halve, Stop };

/// Decides Keep/Halve/Stop for the epoch that produced `new_cv_acc`, records
/// the accuracy, and halves state.lr bit-exactly on Halve.
NewbobAction newbob_decide(NewbobState& state, double new_cv_acc);

struct OptimizerState {
  double momentum = 0.9;
  Network velocity;  // shaped like the network, zero-initialized
  int minibatch_size = 8;
};

OptimizerState make_optimizer(const Network& net, double momentum,
                              int minibatch_size);

/// velocity = momentum * velocity - lr * grad; param += velocity.
/// Throws NonFiniteGradient on any non-finite gradient entry.
void sgd_update(Network& net, const Network& grads, OptimizerState& opt,
                double lr);

// One training utterance. `true_length` marks the number of valid frames;
// rows beyond it are padding and never contribute to loss or gradients.
struct Utterance {
  FeatureMatrix features;
  LabelSequence labels;
  int true_length = 0;  // 0 = all rows valid
};

struct EpochStats {
  double mean_loss = 0.0;
  int utterances = 0;
  std::vector<DropoutLocation> last_active_locations;
};

// Settings shared across epochs of one run.
struct TrainOptions {
  std::uint64_t seed = 0;
  double grad_clip = 50.0;  // element-wise, 0 disables
};

/// One pass over the corpus: utterances bucketed by length into minibatches,
/// per-minibatch stochastic-combination draw, gradient accumulation and SGD
/// updates. Deterministic given (seed, epoch).
EpochStats train_epoch(Network& net, const std::vector<Utterance>& corpus,
                       const DropoutStage& stage, OptimizerState& opt,
                       double lr, const TrainOptions& opts, int epoch);

/// Pooled CV token accuracy: 100 * (1 - total_edits / total_ref_tokens),
/// greedy decoding in eval mode.
double evaluate_corpus(const Network& net,
                       const std::vector<Utterance>& corpus);

struct EpochRecord {
  int epoch = 0;
  std::string variant_id;
  double train_loss = 0.0;
  double cv_token_acc = 0.0;
  double lr = 0.0;
  int dropout_stage = 0;
  double wall_seconds = 0.0;
};

struct TrainRun {
  std::vector<EpochRecord> records;
  std::string checkpoint_path;
  std::string metrics_path;
  double final_cv_acc = 0.0;
};

struct ExperimentConfig {
  NetworkArch arch;
  FilterbankConfig fbank;
  ForgetBiasMode forget_bias = ForgetBiasMode::Random;
  AugmentMode augment = AugmentMode::None;
  int stack_context = 0;
  int stack_stride = 1;
  bool deltas = true;
  bool cmvn = true;
  DropoutPolicy dropout = DropoutPolicy::none();
  int manual_cascade_triggers = 0;

  double initial_lr = 0.00004;
  double momentum = 0.9;
  int minibatch_size = 8;
  double halving_threshold = 0.5;
  double stop_threshold = 0.1;
  int min_epochs_before_halving = 0;
  bool manual_lr_trigger = false;
  int max_epochs = 100;
  double grad_clip = 50.0;
  std::uint64_t seed = 0;

  // Either WAV manifests ("utt_id speaker_id path" lines, augmentable) or
  // precomputed feature archives (identity features only).
  std::string train_manifest, cv_manifest;
  std::string train_archive, cv_archive;
  std::string train_labels, cv_labels;
  std::string out_dir = ".";
};

ExperimentConfig parse_experiment(const Config& cfg);

std::vector<Waveform> read_manifest(const std::string& path);

/// Joins features with their label lines by utterance id.
std::vector<Utterance> join_labels(std::vector<FeatureMatrix> feats,
                                   const std::string& label_path);

/// Full training loop: per-epoch augmentation variant, training, CV
/// evaluation on the identity variant, cascade stage update and the newbob
/// decision. Writes checkpoints and a metrics log under out_dir. On error a
/// partial metrics log is left behind and the error propagates.
TrainRun run_experiment(const ExperimentConfig& cfg);

}  // namespace seqtrain

#endif  // SEQTRAIN_TRAINER_HPP
