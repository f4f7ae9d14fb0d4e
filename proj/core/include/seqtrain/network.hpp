// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#ifndef SEQTRAIN_NETWORK_HPP
#define SEQTRAIN_NETWORK_HPP

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "seqtrain/dropout.hpp"
#include "seqtrain/features.hpp"
#include "seqtrain/rng.hpp"

namespace seqtrain {

// Weights for one gate: input matrix W (cells x input_dim), recurrent matrix
// R (cells x cells), diagonal peephole P stored as a vector, bias b. The cell
// candidate block has no peephole (P stays empty).
struct GateParams {
  Eigen::MatrixXd W;
  Eigen::MatrixXd R;
  Eigen::VectorXd P;
  Eigen::VectorXd b;
};

// One direction of a bidirectional layer. Input and forget peepholes read
// c_{t-1}; the output peephole reads c_t.
struct DirectionParams {
  GateParams input_gate;
  GateParams forget_gate;
  GateParams output_gate;
  GateParams candidate;  // no peephole

  int cells() const { return static_cast<int>(input_gate.b.size()); }
  int input_dim() const { return static_cast<int>(input_gate.W.cols()); }
};

struct BiLstmLayer {
  DirectionParams forward_dir;
  DirectionParams backward_dir;
  int cells_per_direction() const { return forward_dir.cells(); }
  int output_dim() const { return 2 * cells_per_direction(); }
};

struct NetworkArch {
  int num_layers = 4;
  int cells_per_direction = 320;  // 640 cells per layer, 320 each direction
  int feature_dim = 120;
  int alphabet_size = 0;  // K; softmax emits K+1 with blank last
};

enum class ForgetBiasMode { Random, Ones };

struct Network {
  std::vector<BiLstmLayer> layers;
  Eigen::MatrixXd softmax_weights;  // (K+1) x (2*cells)
  Eigen::VectorXd softmax_bias;     // K+1
  int alphabet_size = 0;
  int feature_dim = 0;

  int blank_index() const { return alphabet_size; }
  int num_outputs() const { return alphabet_size + 1; }
  NetworkArch arch() const;

  // Flat views of every parameter block in declaration order (the checkpoint
  // and optimizer-buffer order).
  std::vector<Eigen::Map<Eigen::VectorXd>> param_views();
  std::vector<Eigen::Map<const Eigen::VectorXd>> param_views() const;
  long num_params() const;
};

/// All weights and biases uniform in [-0.1, 0.1]; with ForgetBiasMode::Ones
/// every forget-gate bias is then set to exactly 1.
Network init_network(const NetworkArch& arch, std::uint64_t seed,
                     ForgetBiasMode forget_bias_mode = ForgetBiasMode::Random);

/// Network of the same shape with all parameters zero (gradient and velocity
/// buffers).
Network zeros_like(const Network& net);

struct StepCache {
  Eigen::VectorXd i, f, o, g, c, h;  // g = tanh candidate
};

struct DirectionCache {
  // Indexed by processing step s; the forward direction runs s = t, the
  // backward direction runs s = T-1-t.
  std::vector<StepCache> steps;
};

struct LayerCache {
  Eigen::MatrixXd input;  // T x D_in, after the previous layer's dropout
  DirectionCache fwd, bwd;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Eigen::MatrixXd softmax_input;  // T x 2*cells, after final forward dropout
  Eigen::MatrixXd posteriors;     // T x (K+1)
  MaskSet masks;
  int num_steps = 0;
  long net_params = 0;  // guards against a stale cache in backward
};

/// Single LSTM step (the five cell equations, with the optional cell-dropout
/// rewrite of c_t). Exposed mainly for the scalar-oracle tests.
StepCache lstm_cell_step(const Eigen::VectorXd& x_t,
                         const Eigen::VectorXd& h_prev,
                         const Eigen::VectorXd& c_prev,
                         const DirectionParams& p,
                         const Eigen::VectorXd* cell_mask = nullptr,
                         DropoutLocation cell_location =
                             DropoutLocation::NmlCellUpdate);

/// Runs both directions over the sequence (zero initial states) and
/// concatenates per-step outputs: row t = [fwd_h_t, bwd_h_t].
Eigen::MatrixXd bilstm_layer_forward(const Eigen::MatrixXd& seq,
                                     const BiLstmLayer& layer,
                                     const LayerMasks* masks,
                                     LayerCache* cache);

enum class RunMode { Train, Eval };

/// Full forward pass with pre-sampled masks (train) or none (eval). Masks are
/// recorded in the cache for the backward pass.
Eigen::MatrixXd network_forward_with_masks(const Eigen::MatrixXd& features,
                                           const Network& net,
                                           const MaskSet& masks,
                                           ForwardCache* cache = nullptr);

/// Convenience wrapper: samples masks from the policy stage in train mode,
/// applies none in eval mode.
Eigen::MatrixXd network_forward(const FeatureMatrix& fm, const Network& net,
                                const DropoutStage& stage, RunMode mode,
                                Rng& rng, ForwardCache* cache = nullptr,
                                std::optional<int> stochastic_choice = {});

/// Exact reverse-mode gradients of all parameters given the gradient with
/// respect to the pre-softmax logits. Dropout masks from the cache are
/// re-applied on the backward path.
Network network_backward(const Network& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& grad_logits);

/// Versioned "NETC" checkpoint, little-endian float64, bit-exact round-trip.
void save_checkpoint(const std::string& path, const Network& net);
Network load_checkpoint(const std::string& path);

}  // namespace seqtrain

#endif  // SEQTRAIN_NETWORK_HPP
