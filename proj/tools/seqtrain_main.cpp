// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <CLI11.hpp>

#include <Eigen/Core>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "seqtrain/archive.hpp"
#include "seqtrain/augment.hpp"
#include "seqtrain/config.hpp"
#include "seqtrain/ctc.hpp"
#include "seqtrain/error.hpp"
#include "seqtrain/network.hpp"
#include "seqtrain/synth.hpp"
#include "seqtrain/trainer.hpp"

namespace fs = std::filesystem;
using namespace seqtrain;

namespace {

// Accepts "presets/foo" as shorthand for "presets/foo.conf".
std::string resolve_config_path(const std::string& path) {
  if (!fs::exists(path) && fs::exists(path + ".conf")) return path + ".conf";
  return path;
}

std::vector<Utterance> load_eval_set(const std::string& archive,
                                     const std::string& labels, int context,
                                     int stride) {
  std::vector<FeatureMatrix> feats = read_farc(archive);
  if (context > 0 || stride > 1)
    for (auto& fm : feats) fm = stack_and_stride(fm, context, stride);
  return join_labels(std::move(feats), labels);
}

int cmd_extract(const std::string& manifest, const std::string& out,
                const FilterbankConfig& fbank, double warp, bool deltas,
                bool cmvn) {
  PerturbationVariant v{warp, fbank.hop_ms, "cli"};
  write_farc(out, materialize_variant(read_manifest(manifest), v, fbank,
                                      deltas, cmvn));
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_augment(const std::string& manifest, const std::string& mode,
                const std::string& out_dir, const FilterbankConfig& fbank,
                bool deltas, bool cmvn) {
  const AugmentPlan plan = build_plan(parse_augment_mode(mode));
  const auto waves = read_manifest(manifest);
  const std::string corpus = fs::path(manifest).stem().string();
  fs::create_directories(out_dir);
  for (const auto& v : plan.variants) {
    const fs::path path =
        fs::path(out_dir) / (corpus + "." + v.variant_id + ".farc");
    write_farc(path.string(),
               materialize_variant(waves, v, fbank, deltas, cmvn));
    std::cout << "wrote " << path.string() << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, long seed_override,
              const std::string& out_override, bool manual_lr_trigger) {
  Config cfg = Config::load(resolve_config_path(config_path));
  if (seed_override >= 0) cfg.set("seed", std::to_string(seed_override));
  if (!out_override.empty()) cfg.set("out_dir", out_override);
  if (manual_lr_trigger) cfg.set("manual_lr_trigger", "true");
  const TrainRun run = run_experiment(parse_experiment(cfg));
  std::printf("trained %zu epochs, final cv_token_acc=%.4f\n",
              run.records.size(), run.final_cv_acc);
  std::printf("checkpoint: %s\nmetrics: %s\n", run.checkpoint_path.c_str(),
              run.metrics_path.c_str());
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& archive,
                 const std::string& labels, int context, int stride) {
  const Network net = load_checkpoint(checkpoint);
  const auto utts = load_eval_set(archive, labels, context, stride);
  std::printf("cv_token_acc=%.4f\n", evaluate_corpus(net, utts));
  return 0;
}

int cmd_decode(const std::string& checkpoint, const std::string& archive,
               const std::string& out, int context, int stride) {
  const Network net = load_checkpoint(checkpoint);
  std::vector<FeatureMatrix> feats = read_farc(archive);
  if (context > 0 || stride > 1)
    for (auto& fm : feats) fm = stack_and_stride(fm, context, stride);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw IoError("cannot open " + out + " for writing");
    os = &file;
  }
  const MaskSet no_masks;
  for (const auto& fm : feats) {
    const LabelSequence hyp =
        greedy_decode(network_forward_with_masks(fm.data, net, no_masks));
    *os << fm.utterance_id;
    for (int tok : hyp) *os << ' ' << tok;
    *os << '\n';
  }
  return 0;
}

int cmd_gradcheck(int layers, int cells, int frames, int alphabet,
                  const std::string& dropout_name, std::uint64_t seed) {
  NetworkArch arch;
  arch.num_layers = layers;
  arch.cells_per_direction = cells;
  arch.feature_dim = 3;
  arch.alphabet_size = alphabet;
  const Network net = init_network(arch, seed);

  Rng rng = derive_rng(seed, "gradcheck");
  Eigen::MatrixXd feats(frames, arch.feature_dim);
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < arch.feature_dim; ++j)
      feats(t, j) = rng.uniform(-1.0, 1.0);
  LabelSequence labels;
  for (int i = 0; i < std::min(frames / 2, 3); ++i)
    labels.push_back(static_cast<int>(rng.below(alphabet)));

  MaskSet masks;
  if (!dropout_name.empty() && dropout_name != "none") {
    DropoutStage stage;
    stage.entries.push_back(parse_dropout_entry(dropout_name, 0.2));
    std::vector<int> layer_cells(layers, cells);
    masks = masks_for_utterance(stage, frames, layer_cells, rng);
  }

  ForwardCache cache;
  const Eigen::MatrixXd posteriors =
      network_forward_with_masks(feats, net, masks, &cache);
  const CtcResult result = ctc_loss(posteriors, labels);
  const Network analytic = network_backward(net, cache, result.grad_logits);

  Network probe = net;  // copy whose parameters get perturbed in place
  auto views = probe.param_views();
  auto grad_views = analytic.param_views();
  const double eps = 1e-4;
  double max_rel = 0.0;
  for (std::size_t b = 0; b < views.size(); ++b)
    for (long i = 0; i < views[b].size(); ++i) {
      const double saved = views[b][i];
      views[b][i] = saved + eps;
      const double up =
          ctc_loss(network_forward_with_masks(feats, probe, masks), labels)
              .loss;
      views[b][i] = saved - eps;
      const double down =
          ctc_loss(network_forward_with_masks(feats, probe, masks), labels)
              .loss;
      views[b][i] = saved;
      const double fd = (up - down) / (2 * eps);
      const double an = grad_views[b][i];
      const double rel =
          std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-3);
      max_rel = std::max(max_rel, rel);
    }
  std::printf("max relative error: %.3e (%ld parameters, dropout=%s)\n",
              max_rel, net.num_params(),
              dropout_name.empty() ? "none" : dropout_name.c_str());
  return max_rel < 1e-4 ? 0 : 1;
}

int cmd_synth(const std::string& out_dir, std::uint64_t seed,
              const SyntheticTaskSpec& spec, const FilterbankConfig& fbank) {
  const SyntheticCorpus corpus =
      generate_synthetic_corpus(spec, fbank, seed, out_dir);
  std::cout << "wrote " << corpus.train_archive << " and "
            << corpus.cv_archive << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM-CTC sequence training toolkit"};
  app.require_subcommand(1);

  long seed = -1;
  app.add_option("--seed", seed, "Override the RNG seed")->capture_default_str();

  int threads = 0;
  app.add_option("--threads", threads,
                 "Worker thread cap (0 = library default)");

  FilterbankConfig fbank;
  auto add_fbank = [&fbank](CLI::App* sub) {
    sub->add_option("--num-filters", fbank.num_filters);
    sub->add_option("--window-ms", fbank.window_ms);
    sub->add_option("--hop-ms", fbank.hop_ms);
  };

  // extract
  std::string manifest, out, mode = "ninefold";
  double warp = 1.0;
  bool no_deltas = false, no_cmvn = false;
  auto* extract = app.add_subcommand("extract", "WAV manifest -> feature archive");
  extract->add_option("--manifest", manifest)->required();
  extract->add_option("--out", out)->required();
  extract->add_option("--warp", warp);
  extract->add_flag("--no-deltas", no_deltas);
  extract->add_flag("--no-cmvn", no_cmvn);
  add_fbank(extract);

  // augment
  auto* augment = app.add_subcommand(
      "augment", "Build a perturbation plan and materialize every variant");
  augment->add_option("--manifest", manifest)->required();
  augment->add_option("--mode", mode, "none|ninefold|twentyfold");
  augment->add_option("--out", out)->required();
  add_fbank(augment);

  // train
  std::string config_path;
  bool manual_lr = false;
  auto* train = app.add_subcommand("train", "Run a training experiment");
  train->add_option("--config", config_path)->required();
  train->add_option("--out", out, "Override out_dir");
  train->add_flag("--manual-lr-trigger", manual_lr,
                  "Force the LR halving schedule on");

  // evaluate / decode
  std::string checkpoint, archive, labels;
  int context = 0, stride = 1;
  auto* evaluate = app.add_subcommand("evaluate",
                                      "Token accuracy of a checkpoint");
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--archive", archive)->required();
  evaluate->add_option("--labels", labels)->required();
  evaluate->add_option("--context", context);
  evaluate->add_option("--stride", stride);

  auto* decode = app.add_subcommand("decode", "Greedy-decode an archive");
  decode->add_option("--checkpoint", checkpoint)->required();
  decode->add_option("--archive", archive)->required();
  decode->add_option("--out", out);
  decode->add_option("--context", context);
  decode->add_option("--stride", stride);

  // gradcheck
  int layers = 2, cells = 4, frames = 5, alphabet = 3;
  std::string dropout_name = "none";
  auto* gradcheck = app.add_subcommand(
      "gradcheck", "Finite-difference check of the full backward pass");
  gradcheck->add_option("--layers", layers);
  gradcheck->add_option("--cells", cells);
  gradcheck->add_option("--frames", frames);
  gradcheck->add_option("--alphabet", alphabet);
  gradcheck->add_option("--dropout", dropout_name,
                        "none|forward-step|forward-sequence|rnndrop-step|"
                        "nml-step|nml-sequence");

  // synth
  SyntheticTaskSpec spec;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", out)->required();
  synth->add_option("--alphabet", spec.alphabet_size);
  synth->add_option("--train-utts", spec.train_utterances);
  synth->add_option("--cv-utts", spec.cv_utterances);
  synth->add_option("--speakers", spec.speakers);
  synth->add_option("--noise", spec.noise_level);
  add_fbank(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) Eigen::setNbThreads(threads);

  const std::uint64_t useed = seed >= 0 ? static_cast<std::uint64_t>(seed) : 0;
  try {
    if (extract->parsed())
      return cmd_extract(manifest, out, fbank, warp, !no_deltas, !no_cmvn);
    if (augment->parsed())
      return cmd_augment(manifest, mode, out, fbank, true, true);
    if (train->parsed()) return cmd_train(config_path, seed, out, manual_lr);
    if (evaluate->parsed())
      return cmd_evaluate(checkpoint, archive, labels, context, stride);
    if (decode->parsed())
      return cmd_decode(checkpoint, archive, out, context, stride);
    if (gradcheck->parsed())
      return cmd_gradcheck(layers, cells, frames, alphabet, dropout_name,
                           useed);
    if (synth->parsed()) return cmd_synth(out, useed, spec, fbank);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
