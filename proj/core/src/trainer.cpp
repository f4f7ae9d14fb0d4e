// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "seqtrain/error.hpp"
#include "seqtrain/wav.hpp"
#include "seqtrain/archive.hpp"

namespace seqtrain {

double NewbobState::best_acc() const {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [epoch, acc] : cv_history) best = std::max(best, acc);
  return best;
}

NewbobAction newbob_decide(NewbobState& state, double new_cv_acc) {
  const double improvement = new_cv_acc - state.best_acc();
  const int epoch = static_cast<int>(state.cv_history.size()) + 1;
  state.cv_history.emplace_back(epoch, new_cv_acc);

  if (state.manual_trigger) state.halving_active = true;
  if (!state.halving_active && state.min_epochs_before_halving > 0 &&
      epoch < state.min_epochs_before_halving && !state.manual_trigger)
    return NewbobAction::Keep;

  if (state.halving_active) {
    if (improvement < state.stop_threshold) return NewbobAction::Stop;
    state.lr *= 0.5;
    return NewbobAction::Halve;
  }
  if (improvement < state.halving_threshold) {
    state.halving_active = true;
    state.lr *= 0.5;
    return NewbobAction::Halve;
  }
  return NewbobAction::Keep;
}

OptimizerState make_optimizer(const Network& net, double momentum,
                              int minibatch_size) {
  OptimizerState opt;
  opt.momentum = momentum;
  opt.minibatch_size = minibatch_size;
  opt.velocity = zeros_like(net);
  return opt;
}

void sgd_update(Network& net, const Network& grads, OptimizerState& opt,
                double lr) {
  auto params = net.param_views();
  auto gviews = grads.param_views();
  auto vviews = opt.velocity.param_views();
  if (gviews.size() != params.size() || vviews.size() != params.size())
    throw ShapeError("gradient/velocity shapes do not match the network");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (!gviews[b].allFinite())
      throw NonFiniteGradient("non-finite gradient in parameter block " +
                              std::to_string(b));
    vviews[b] = opt.momentum * vviews[b] - lr * gviews[b];
    params[b] += vviews[b];
  }
}

namespace {

void accumulate(Network& dst, const Network& src) {
  auto d = dst.param_views();
  auto s = src.param_views();
  for (std::size_t b = 0; b < d.size(); ++b) d[b] += s[b];
}

void scale(Network& net, double factor) {
  for (auto& v : net.param_views()) v *= factor;
}

void clip(Network& net, double limit) {
  for (auto& v : net.param_views())
    v = v.array().max(-limit).min(limit).matrix();
}

int valid_frames(const Utterance& utt) {
  return utt.true_length > 0 ? utt.true_length
                             : static_cast<int>(utt.features.data.rows());
}

}  // namespace

EpochStats train_epoch(Network& net, const std::vector<Utterance>& corpus,
                       const DropoutStage& stage, OptimizerState& opt,
                       double lr, const TrainOptions& opts, int epoch) {
  if (corpus.empty()) throw ShapeError("train_epoch: empty corpus");

  // Length bucketing: sort by frame count (ties by id for determinism) so
  // minibatches group similar-length utterances.
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::make_pair(valid_frames(corpus[a]),
                          corpus[a].features.utterance_id) <
           std::make_pair(valid_frames(corpus[b]),
                          corpus[b].features.utterance_id);
  });

  std::vector<int> cells;
  for (const auto& layer : net.layers)
    cells.push_back(layer.cells_per_direction());
  const bool dropout_on = !stage.entries.empty();

  EpochStats stats;
  double total_loss = 0.0;
  const int batch_size = std::max(1, opt.minibatch_size);

  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::optional<int> choice;
    if (stage.combination == CombinationMode::Stochastic) {
      Rng rng = derive_rng(opts.seed, "stochastic", epoch, start / batch_size);
      choice = rng.uniform() < stage.choice_prob ? 0 : 1;
    }

    Network batch_grads = zeros_like(net);
    for (std::size_t k = start; k < end; ++k) {
      const Utterance& utt = corpus[order[k]];
      const std::string& id = utt.features.utterance_id;
      const int t_len = valid_frames(utt);
      const Eigen::MatrixXd view = utt.features.data.topRows(t_len);

      MaskSet masks;
      if (dropout_on) {
        Rng rng = derive_rng(opts.seed, "mask", epoch, hash_str(id));
        masks = masks_for_utterance(stage, t_len, cells, rng, choice);
      }
      ForwardCache cache;
      Eigen::MatrixXd posteriors =
          network_forward_with_masks(view, net, masks, &cache);
      CtcResult result;
      try {
        result = ctc_loss(posteriors, utt.labels);
      } catch (const InfeasibleAlignment& e) {
        throw InfeasibleAlignment(std::string(e.what()) + " (utterance " + id +
                                  ")");
      }
      if (!std::isfinite(result.loss) || !result.grad_logits.allFinite())
        throw NonFiniteGradient("non-finite loss/gradient for utterance " + id);
      accumulate(batch_grads, network_backward(net, cache, result.grad_logits));
      total_loss += result.loss;
      ++stats.utterances;
      stats.last_active_locations = masks.active_locations;
    }
    scale(batch_grads, 1.0 / static_cast<double>(end - start));
    if (opts.grad_clip > 0) clip(batch_grads, opts.grad_clip);
    sgd_update(net, batch_grads, opt, lr);
  }
  stats.mean_loss = total_loss / stats.utterances;
  return stats;
}

double evaluate_corpus(const Network& net,
                       const std::vector<Utterance>& corpus) {
  long total_edits = 0, total_ref = 0;
  const MaskSet no_masks;
  for (const auto& utt : corpus) {
    const Eigen::MatrixXd view = utt.features.data.topRows(valid_frames(utt));
    const Eigen::MatrixXd posteriors =
        network_forward_with_masks(view, net, no_masks);
    const LabelSequence hyp = greedy_decode(posteriors);
    total_edits += levenshtein(hyp, utt.labels);
    total_ref += std::max<long>(static_cast<long>(utt.labels.size()), 1);
  }
  return 100.0 * (1.0 - static_cast<double>(total_edits) / total_ref);
}

std::vector<Waveform> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  const std::filesystem::path dir =
      std::filesystem::path(path).parent_path();
  std::vector<Waveform> waves;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string utt_id, speaker_id, wav_path;
    if (!(ss >> utt_id >> speaker_id >> wav_path))
      throw IoError("malformed manifest line: " + line);
    std::filesystem::path p(wav_path);
    if (p.is_relative()) p = dir / p;
    Waveform w = read_wav(p.string());
    w.utterance_id = utt_id;
    w.speaker_id = speaker_id;
    waves.push_back(std::move(w));
  }
  return waves;
}

std::vector<Utterance> join_labels(std::vector<FeatureMatrix> feats,
                                   const std::string& label_path) {
  std::map<std::string, std::vector<int>> by_id;
  for (auto& lab : read_labels(label_path))
    by_id[lab.utterance_id] = std::move(lab.tokens);
  std::vector<Utterance> utts;
  utts.reserve(feats.size());
  for (auto& fm : feats) {
    auto it = by_id.find(fm.utterance_id);
    if (it == by_id.end())
      throw ConfigError("no labels for utterance " + fm.utterance_id + " in " +
                        label_path);
    Utterance utt;
    utt.labels = it->second;
    utt.features = std::move(fm);
    utts.push_back(std::move(utt));
  }
  return utts;
}

namespace {

DropoutPolicy parse_dropout_policy(const Config& cfg) {
  const double rate = cfg.get_double("dropout_rate", 0.2);
  const std::string comb = cfg.get_str("dropout_combination", "naive");

  auto parse_stage = [&](const std::string& spec) {
    DropoutStage stage;
    if (spec == "none" || spec.empty()) return stage;
    std::istringstream ss(spec);
    std::string name;
    while (std::getline(ss, name, '+')) {
      const auto b = name.find_first_not_of(" \t");
      const auto e = name.find_last_not_of(" \t");
      stage.entries.push_back(
          parse_dropout_entry(name.substr(b, e - b + 1), rate));
    }
    return stage;
  };

  DropoutPolicy policy;
  policy.stages.push_back(parse_stage(cfg.get_str("dropout_stage1", "none")));
  for (int s = 2; cfg.has("dropout_stage" + std::to_string(s)); ++s)
    policy.stages.push_back(
        parse_stage(cfg.get_str("dropout_stage" + std::to_string(s))));

  if (comb == "stochastic") {
    for (auto& stage : policy.stages) {
      stage.combination = CombinationMode::Stochastic;
      stage.choice_prob = cfg.get_double("dropout_choice_prob", 0.5);
    }
  } else if (comb == "cascade") {
    if (cfg.has("cascade_switch_epochs"))
      policy.switch_epochs = cfg.get_ints("cascade_switch_epochs");
  } else if (comb != "naive") {
    throw ConfigError("unknown dropout_combination: " + comb);
  }
  policy.validate();
  return policy;
}

}  // namespace

ExperimentConfig parse_experiment(const Config& cfg) {
  ExperimentConfig ec;
  ec.arch.num_layers = cfg.get_int("layers", 4);
  ec.arch.cells_per_direction = cfg.get_int("cells_per_direction", 320);
  ec.arch.alphabet_size = cfg.get_int("alphabet_size", 0);
  ec.fbank.num_filters = cfg.get_int("num_filters", 40);
  ec.fbank.window_ms = cfg.get_double("window_ms", 25.0);
  ec.fbank.hop_ms = cfg.get_double("hop_ms", 10.0);
  ec.fbank.freq_low = cfg.get_double("freq_low", 20.0);
  ec.fbank.freq_high = cfg.get_double("freq_high", 0.0);
  const std::string fb = cfg.get_str("forget_bias", "random");
  if (fb == "ones")
    ec.forget_bias = ForgetBiasMode::Ones;
  else if (fb != "random")
    throw ConfigError("forget_bias must be random or ones");
  ec.augment = parse_augment_mode(cfg.get_str("augment_mode", "none"));
  ec.stack_context = cfg.get_int("stack_context", 0);
  ec.stack_stride = cfg.get_int("stack_stride", 1);
  ec.deltas = cfg.get_bool("deltas", true);
  ec.cmvn = cfg.get_bool("cmvn", true);
  ec.dropout = parse_dropout_policy(cfg);
  ec.initial_lr = cfg.get_double("lr", 0.00004);
  ec.momentum = cfg.get_double("momentum", 0.9);
  ec.minibatch_size = cfg.get_int("minibatch_size", 8);
  ec.halving_threshold = cfg.get_double("halving_threshold", 0.5);
  ec.stop_threshold = cfg.get_double("stop_threshold", 0.1);
  ec.min_epochs_before_halving = cfg.get_int("min_epochs_before_halving", 0);
  ec.manual_lr_trigger = cfg.get_bool("manual_lr_trigger", false);
  ec.max_epochs = cfg.get_int("max_epochs", 100);
  ec.grad_clip = cfg.get_double("grad_clip", 50.0);
  ec.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  ec.train_manifest = cfg.get_str("train_manifest", "");
  ec.cv_manifest = cfg.get_str("cv_manifest", "");
  ec.train_archive = cfg.get_str("train_archive", "");
  ec.cv_archive = cfg.get_str("cv_archive", "");
  ec.train_labels = cfg.get_str("train_labels", "");
  ec.cv_labels = cfg.get_str("cv_labels", "");
  ec.out_dir = cfg.get_str("out_dir", ".");
  return ec;
}

namespace {

std::string format_record(const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "epoch=%d variant=%s mean_loss=%.6f cv_token_acc=%.4f "
                "lr=%.12g dropout_stage=%d wall_seconds=%.3f",
                r.epoch, r.variant_id.c_str(), r.train_loss, r.cv_token_acc,
                r.lr, r.dropout_stage, r.wall_seconds);
  return buf;
}

}  // namespace

TrainRun run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.dropout.validate();
  if (cfg.arch.alphabet_size < 1)
    throw ConfigError("alphabet_size must be set");
  if (cfg.train_labels.empty() || cfg.cv_labels.empty())
    throw ConfigError("train_labels and cv_labels must be set");

  fs::create_directories(cfg.out_dir);
  const bool from_wav = !cfg.train_manifest.empty();
  if (!from_wav && cfg.augment != AugmentMode::None)
    throw ConfigError("augmentation needs a WAV manifest, not an archive");
  if (!from_wav && cfg.train_archive.empty())
    throw ConfigError("need train_manifest or train_archive");

  std::vector<Waveform> train_waves;
  AugmentPlan plan = build_plan(from_wav ? cfg.augment : AugmentMode::None);
  if (from_wav) {
    train_waves = read_manifest(cfg.train_manifest);
    fs::create_directories(fs::path(cfg.out_dir) / "features");
  }

  auto finish = [&](std::vector<FeatureMatrix> feats) {
    if (cfg.stack_context > 0 || cfg.stack_stride > 1)
      for (auto& fm : feats)
        fm = stack_and_stride(fm, cfg.stack_context, cfg.stack_stride);
    return feats;
  };

  // Per-variant training features, materialized once and kept both in memory
  // and as on-disk archives under out_dir/features.
  std::map<std::string, std::vector<Utterance>> variant_cache;
  auto train_features_for = [&](const PerturbationVariant& v)
      -> const std::vector<Utterance>& {
    auto it = variant_cache.find(v.variant_id);
    if (it != variant_cache.end()) return it->second;
    std::vector<FeatureMatrix> feats;
    if (from_wav) {
      const fs::path archive =
          fs::path(cfg.out_dir) / "features" / ("train." + v.variant_id + ".farc");
      if (fs::exists(archive)) {
        feats = read_farc(archive.string());
      } else {
        feats = materialize_variant(train_waves, v, cfg.fbank, cfg.deltas,
                                    cfg.cmvn);
        write_farc(archive.string(), feats);
        feats = read_farc(archive.string());  // train on the stored floats
      }
    } else {
      feats = read_farc(cfg.train_archive);
    }
    auto [pos, inserted] = variant_cache.emplace(
        v.variant_id, join_labels(finish(std::move(feats)), cfg.train_labels));
    return pos->second;
  };

  // CV always uses the identity variant. Features round-trip through the
  // float32 archive so a later `evaluate` against it reproduces the CV
  // accuracies exactly.
  std::vector<FeatureMatrix> cv_feats;
  if (!cfg.cv_manifest.empty()) {
    const PerturbationVariant identity{1.0, cfg.fbank.hop_ms, "identity"};
    fs::create_directories(fs::path(cfg.out_dir) / "features");
    const fs::path archive =
        fs::path(cfg.out_dir) / "features" / "cv.identity.farc";
    if (!fs::exists(archive))
      write_farc(archive.string(),
                 materialize_variant(read_manifest(cfg.cv_manifest), identity,
                                     cfg.fbank, cfg.deltas, cfg.cmvn));
    cv_feats = read_farc(archive.string());
  } else if (!cfg.cv_archive.empty()) {
    cv_feats = read_farc(cfg.cv_archive);
  } else {
    throw ConfigError("need cv_manifest or cv_archive");
  }
  const std::vector<Utterance> cv_utts =
      join_labels(finish(std::move(cv_feats)), cfg.cv_labels);

  NetworkArch arch = cfg.arch;
  arch.feature_dim = cv_utts.front().features.dim();
  Network net = init_network(arch, cfg.seed, cfg.forget_bias);
  OptimizerState opt =
      make_optimizer(net, cfg.momentum, cfg.minibatch_size);

  NewbobState newbob;
  newbob.lr = cfg.initial_lr;
  newbob.halving_threshold = cfg.halving_threshold;
  newbob.stop_threshold = cfg.stop_threshold;
  newbob.min_epochs_before_halving = cfg.min_epochs_before_halving;
  newbob.manual_trigger = cfg.manual_lr_trigger;

  TrainOptions opts;
  opts.seed = cfg.seed;
  opts.grad_clip = cfg.grad_clip;

  TrainRun run;
  run.metrics_path = (fs::path(cfg.out_dir) / "metrics.log").string();
  run.checkpoint_path = (fs::path(cfg.out_dir) / "final.netc").string();
  std::ofstream metrics(run.metrics_path);
  if (!metrics) throw IoError("cannot open " + run.metrics_path);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const PerturbationVariant& variant = variant_for_epoch(plan, epoch);
    const auto& train_utts = train_features_for(variant);

    const int triggers = cascade_triggers_for_epoch(cfg.dropout, epoch) +
                         cfg.manual_cascade_triggers;
    const DropoutStage& stage = cascade_active_stage(cfg.dropout, triggers);

    const auto t0 = std::chrono::steady_clock::now();
    const double lr = newbob.lr;
    const EpochStats stats =
        train_epoch(net, train_utts, stage, opt, lr, opts, epoch);
    const double cv_acc = evaluate_corpus(net, cv_utts);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const NewbobAction action = newbob_decide(newbob, cv_acc);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.variant_id = variant.variant_id;
    rec.train_loss = stats.mean_loss;
    rec.cv_token_acc = cv_acc;
    rec.lr = lr;
    rec.dropout_stage =
        std::min(triggers, static_cast<int>(cfg.dropout.stages.size()) - 1);
    rec.wall_seconds = wall;
    run.records.push_back(rec);
    run.final_cv_acc = cv_acc;
    metrics << format_record(rec) << '\n' << std::flush;
    save_checkpoint(run.checkpoint_path, net);

    if (action == NewbobAction::Stop) break;
  }
  return run;
}

}  // namespace seqtrain
