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
#include <cstdio>
#include <filesystem>

#include "seqtrain/ctc.hpp"
#include "seqtrain/error.hpp"
#include "seqtrain/network.hpp"

using namespace seqtrain;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

DirectionParams zero_direction(int cells, int input_dim) {
  DirectionParams p;
  for (GateParams* g :
       {&p.input_gate, &p.forget_gate, &p.output_gate, &p.candidate}) {
    g->W = Eigen::MatrixXd::Zero(cells, input_dim);
    g->R = Eigen::MatrixXd::Zero(cells, cells);
    g->b = Eigen::VectorXd::Zero(cells);
  }
  p.input_gate.P = Eigen::VectorXd::Zero(cells);
  p.forget_gate.P = Eigen::VectorXd::Zero(cells);
  p.output_gate.P = Eigen::VectorXd::Zero(cells);
  return p;
}

void randomize_direction(DirectionParams& p, Rng& rng) {
  auto fill = [&](Eigen::MatrixXd& m) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-0.5, 0.5);
  };
  auto fillv = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(-0.5, 0.5);
  };
  for (GateParams* g :
       {&p.input_gate, &p.forget_gate, &p.output_gate, &p.candidate}) {
    fill(g->W);
    fill(g->R);
    fillv(g->b);
    if (g->P.size() > 0) fillv(g->P);
  }
}

Eigen::MatrixXd random_features(int t, int d, Rng& rng) {
  Eigen::MatrixXd x(t, d);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  return x;
}

// Max relative error between analytic gradients and central finite
// differences over every parameter of the network.
double max_gradient_error(const Network& net, const Eigen::MatrixXd& feats,
                          const LabelSequence& labels, const MaskSet& masks) {
  ForwardCache cache;
  network_forward_with_masks(feats, net, masks, &cache);
  const CtcResult result = ctc_loss(cache.posteriors, labels);
  const Network analytic = network_backward(net, cache, result.grad_logits);

  Network probe = net;
  auto views = probe.param_views();
  auto grads = analytic.param_views();
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::size_t b = 0; b < views.size(); ++b)
    for (long i = 0; i < views[b].size(); ++i) {
      const double saved = views[b][i];
      views[b][i] = saved + eps;
      const double up =
          ctc_loss(network_forward_with_masks(feats, probe, masks), labels).loss;
      views[b][i] = saved - eps;
      const double down =
          ctc_loss(network_forward_with_masks(feats, probe, masks), labels).loss;
      views[b][i] = saved;
      const double fd = (up - down) / (2 * eps);
      const double rel = std::abs(fd - grads[b][i]) /
                         std::max(std::abs(fd) + std::abs(grads[b][i]), 1e-3);
      worst = std::max(worst, rel);
    }
  return worst;
}

}  // namespace

TEST_CASE("zero-parameter cell step sits at the sigmoid midpoint") {
  DirectionParams p = zero_direction(3, 2);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.7);
  const Eigen::VectorXd zero3 = Eigen::VectorXd::Zero(3);
  StepCache s = lstm_cell_step(x, zero3, zero3, p);
  for (int j = 0; j < 3; ++j) {
    CHECK(s.i[j] == doctest::Approx(0.5));
    CHECK(s.f[j] == doctest::Approx(0.5));
    CHECK(s.o[j] == doctest::Approx(0.5));
    CHECK(s.c[j] == doctest::Approx(0.0));
    CHECK(s.h[j] == doctest::Approx(0.0));
  }
}

TEST_CASE("unit forget bias on a scalar cell, analytic values") {
  DirectionParams p = zero_direction(1, 1);
  p.forget_gate.b[0] = 1.0;
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd h0 = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd c0 = Eigen::VectorXd::Ones(1);
  StepCache s = lstm_cell_step(x, h0, c0, p);
  CHECK(s.f[0] == doctest::Approx(0.731059).epsilon(1e-5));
  CHECK(s.c[0] == doctest::Approx(0.731059).epsilon(1e-5));
  // h = 0.5 * tanh(0.731059)
  CHECK(s.h[0] == doctest::Approx(0.311856).epsilon(1e-5));
}

TEST_CASE("cell step matches a scalar-by-scalar recomputation") {
  Rng rng(31);
  const int cells = 3, input_dim = 4;
  DirectionParams p = zero_direction(cells, input_dim);
  randomize_direction(p, rng);

  Eigen::VectorXd x(input_dim), h_prev(cells), c_prev(cells);
  for (int j = 0; j < input_dim; ++j) x[j] = rng.uniform(-1.0, 1.0);
  for (int j = 0; j < cells; ++j) {
    h_prev[j] = rng.uniform(-1.0, 1.0);
    c_prev[j] = rng.uniform(-1.0, 1.0);
  }

  StepCache s = lstm_cell_step(x, h_prev, c_prev, p);
  for (int j = 0; j < cells; ++j) {
    auto pre = [&](const GateParams& g) {
      double acc = g.b[j];
      for (int k = 0; k < input_dim; ++k) acc += g.W(j, k) * x[k];
      for (int k = 0; k < cells; ++k) acc += g.R(j, k) * h_prev[k];
      return acc;
    };
    const double i_j = sigmoid(pre(p.input_gate) +
                               p.input_gate.P[j] * c_prev[j]);
    const double f_j = sigmoid(pre(p.forget_gate) +
                               p.forget_gate.P[j] * c_prev[j]);
    const double g_j = std::tanh(pre(p.candidate));
    const double c_j = f_j * c_prev[j] + i_j * g_j;
    const double o_j = sigmoid(pre(p.output_gate) +
                               p.output_gate.P[j] * c_j);
    const double h_j = o_j * std::tanh(c_j);
    CHECK(std::abs(s.i[j] - i_j) < 1e-12);
    CHECK(std::abs(s.f[j] - f_j) < 1e-12);
    CHECK(std::abs(s.c[j] - c_j) < 1e-12);
    CHECK(std::abs(s.o[j] - o_j) < 1e-12);
    CHECK(std::abs(s.h[j] - h_j) < 1e-12);
  }
}

TEST_CASE("initialization: interval, forget bias, determinism") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 6;
  arch.feature_dim = 5;
  arch.alphabet_size = 3;

  Network rand_net = init_network(arch, 17);
  for (const auto& view : rand_net.param_views())
    for (long i = 0; i < view.size(); ++i) {
      CHECK(view[i] >= -0.1);
      CHECK(view[i] <= 0.1);
    }

  Network ones_net = init_network(arch, 17, ForgetBiasMode::Ones);
  for (const auto& layer : ones_net.layers)
    for (const DirectionParams* dir : {&layer.forward_dir, &layer.backward_dir})
      for (int j = 0; j < dir->cells(); ++j)
        CHECK(dir->forget_gate.b[j] == 1.0);

  Network again = init_network(arch, 17);
  auto a = rand_net.param_views();
  auto b = again.param_views();
  for (std::size_t blk = 0; blk < a.size(); ++blk)
    for (long i = 0; i < a[blk].size(); ++i) CHECK(a[blk][i] == b[blk][i]);

  NetworkArch bad = arch;
  bad.num_layers = 0;
  CHECK_THROWS_AS(init_network(bad, 1), InvalidArchitecture);
  bad = arch;
  bad.cells_per_direction = 0;
  CHECK_THROWS_AS(init_network(bad, 1), InvalidArchitecture);
}

TEST_CASE("default architecture matches the full-scale recipe") {
  NetworkArch arch;
  CHECK(arch.num_layers == 4);
  CHECK(arch.cells_per_direction == 320);  // 640 cells per layer
  CHECK(arch.feature_dim == 120);
}

TEST_CASE("posterior rows are distributions; zero net is uniform") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 5;
  arch.feature_dim = 4;
  arch.alphabet_size = 3;
  Network net = init_network(arch, 23);
  Rng rng(23);
  Eigen::MatrixXd feats = random_features(7, 4, rng);

  const MaskSet none;
  Eigen::MatrixXd post = network_forward_with_masks(feats, net, none);
  for (int t = 0; t < post.rows(); ++t)
    CHECK(std::abs(post.row(t).sum() - 1.0) < 1e-6);

  Network zero = zeros_like(net);
  Eigen::MatrixXd uniform = network_forward_with_masks(feats, zero, none);
  for (int t = 0; t < uniform.rows(); ++t)
    for (int j = 0; j < uniform.cols(); ++j)
      CHECK(uniform(t, j) == doctest::Approx(0.25));

  Eigen::MatrixXd wrong = random_features(7, 6, rng);
  CHECK_THROWS_AS(network_forward_with_masks(wrong, net, none), ShapeError);
}

TEST_CASE("rate-zero training equals eval mode bitwise") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 4;
  arch.feature_dim = 3;
  arch.alphabet_size = 2;
  Network net = init_network(arch, 29);
  Rng rng(29);
  FeatureMatrix fm;
  fm.data = random_features(6, 3, rng);

  DropoutStage stage;
  stage.entries.push_back({DropoutLocation::ForwardConnection,
                           MaskGranularity::PerStep, 0.0});
  Rng mask_rng(1);
  Eigen::MatrixXd train_out =
      network_forward(fm, net, stage, RunMode::Train, mask_rng);
  Rng eval_rng(2);
  Eigen::MatrixXd eval_out =
      network_forward(fm, net, stage, RunMode::Eval, eval_rng);
  for (int t = 0; t < train_out.rows(); ++t)
    for (int j = 0; j < train_out.cols(); ++j)
      CHECK(train_out(t, j) == eval_out(t, j));
}

TEST_CASE("palindromic input through a symmetric layer is time-reversible") {
  Rng rng(37);
  const int cells = 4, dim = 3, t_len = 7;
  BiLstmLayer layer;
  layer.forward_dir = zero_direction(cells, dim);
  randomize_direction(layer.forward_dir, rng);
  layer.backward_dir = layer.forward_dir;

  Eigen::MatrixXd seq = random_features(t_len, dim, rng);
  for (int t = 0; t < t_len / 2; ++t)  // make it a palindrome
    seq.row(t_len - 1 - t) = seq.row(t);

  Eigen::MatrixXd out = bilstm_layer_forward(seq, layer, nullptr, nullptr);
  for (int t = 0; t < t_len; ++t) {
    const Eigen::RowVectorXd row = out.row(t);
    const Eigen::RowVectorXd mirror = out.row(t_len - 1 - t);
    for (int j = 0; j < cells; ++j) {
      CHECK(row[j] == doctest::Approx(mirror[cells + j]).epsilon(1e-12));
      CHECK(row[cells + j] == doctest::Approx(mirror[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero upstream gradient produces zero parameter gradients") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 4;
  arch.feature_dim = 3;
  arch.alphabet_size = 2;
  Network net = init_network(arch, 41);
  Rng rng(41);
  Eigen::MatrixXd feats = random_features(5, 3, rng);

  ForwardCache cache;
  network_forward_with_masks(feats, net, MaskSet{}, &cache);
  Network grads = network_backward(
      net, cache, Eigen::MatrixXd::Zero(5, arch.alphabet_size + 1));
  for (const auto& view : grads.param_views())
    CHECK(view.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward rejects a cache from a different network") {
  NetworkArch arch;
  arch.num_layers = 1;
  arch.cells_per_direction = 4;
  arch.feature_dim = 3;
  arch.alphabet_size = 2;
  Network net = init_network(arch, 43);
  Rng rng(43);
  Eigen::MatrixXd feats = random_features(4, 3, rng);
  ForwardCache cache;
  network_forward_with_masks(feats, net, MaskSet{}, &cache);

  NetworkArch other_arch = arch;
  other_arch.cells_per_direction = 5;
  Network other = init_network(other_arch, 44);
  CHECK_THROWS_AS(
      network_backward(other, cache, Eigen::MatrixXd::Zero(4, 3)),
      CacheMismatch);
}

TEST_CASE("gradients match finite differences across dropout settings") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 3;  // acceptance runs the full 4-cell version
  arch.feature_dim = 3;
  arch.alphabet_size = 3;
  Network net = init_network(arch, 47);
  Rng rng(47);
  Eigen::MatrixXd feats = random_features(5, 3, rng);
  const LabelSequence labels = {0, 2};
  const std::vector<int> cells(arch.num_layers, arch.cells_per_direction);

  for (const char* name : {"none", "forward-step", "forward-sequence",
                           "rnndrop-step", "nml-step", "nml-sequence"}) {
    CAPTURE(name);
    MaskSet masks;
    if (std::string(name) != "none") {
      DropoutStage stage;
      stage.entries.push_back(parse_dropout_entry(name, 0.2));
      Rng mask_rng(101);
      masks = masks_for_utterance(stage, 5, cells, mask_rng);
    }
    CHECK(max_gradient_error(net, feats, labels, masks) < 1e-4);
  }
}

TEST_CASE("a dropped unit's outgoing weights receive exactly zero gradient") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 4;
  arch.feature_dim = 3;
  arch.alphabet_size = 2;
  Network net = init_network(arch, 53);
  Rng rng(53);
  Eigen::MatrixXd feats = random_features(6, 3, rng);

  DropoutStage stage;
  stage.entries.push_back({DropoutLocation::ForwardConnection,
                           MaskGranularity::PerSequence, 0.5});
  Rng mask_rng(54);
  const std::vector<int> cells = {4, 4};
  MaskSet masks = masks_for_utterance(stage, 6, cells, mask_rng);

  ForwardCache cache;
  network_forward_with_masks(feats, net, masks, &cache);
  const CtcResult res = ctc_loss(cache.posteriors, {0, 1});
  const Network grads = network_backward(net, cache, res.grad_logits);

  // Layer 0's forward mask gates what layer 1 consumes.
  const Eigen::VectorXd& m0 = masks.layers[0].forward[0];
  bool found = false;
  for (int j = 0; j < m0.size(); ++j) {
    if (m0[j] != 0.0) continue;
    found = true;
    for (const DirectionParams* dir :
         {&grads.layers[1].forward_dir, &grads.layers[1].backward_dir})
      for (const GateParams* g : {&dir->input_gate, &dir->forget_gate,
                                  &dir->output_gate, &dir->candidate})
        CHECK(g->W.col(j).cwiseAbs().maxCoeff() == 0.0);
  }
  REQUIRE(found);  // p = 0.5 over 8 entries: a zero is (nearly) certain

  // The last layer's mask gates the softmax input the same way.
  const Eigen::VectorXd& m1 = masks.layers[1].forward[0];
  for (int j = 0; j < m1.size(); ++j)
    if (m1[j] == 0.0)
      CHECK(grads.softmax_weights.col(j).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoints round-trip bitwise") {
  NetworkArch arch;
  arch.num_layers = 2;
  arch.cells_per_direction = 5;
  arch.feature_dim = 4;
  arch.alphabet_size = 3;
  Network net = init_network(arch, 59);

  const std::string path =
      (std::filesystem::temp_directory_path() / "seqtrain_test.netc").string();
  save_checkpoint(path, net);
  Network loaded = load_checkpoint(path);
  std::filesystem::remove(path);

  CHECK(loaded.alphabet_size == net.alphabet_size);
  CHECK(loaded.feature_dim == net.feature_dim);
  auto a = net.param_views();
  auto b = loaded.param_views();
  REQUIRE(a.size() == b.size());
  for (std::size_t blk = 0; blk < a.size(); ++blk) {
    REQUIRE(a[blk].size() == b[blk].size());
    for (long i = 0; i < a[blk].size(); ++i) CHECK(a[blk][i] == b[blk][i]);
  }
}
