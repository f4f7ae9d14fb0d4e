// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include "seqtrain/network.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "seqtrain/error.hpp"

namespace seqtrain {

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

template <typename Maps, typename Net>
void collect_views(Net& net, Maps& views) {
  auto add = [&views](auto& m) {
    views.emplace_back(m.data(), m.size());
  };
  auto add_gate = [&add](auto& gate) {
    add(gate.W);
    add(gate.R);
    if (gate.P.size() > 0) add(gate.P);
    add(gate.b);
  };
  for (auto& layer : net.layers) {
    for (auto* dir : {&layer.forward_dir, &layer.backward_dir}) {
      add_gate(dir->input_gate);
      add_gate(dir->forget_gate);
      add_gate(dir->output_gate);
      add_gate(dir->candidate);
    }
  }
  add(net.softmax_weights);
  add(net.softmax_bias);
}

Network allocate(const NetworkArch& arch) {
  if (arch.num_layers < 1 || arch.cells_per_direction < 1 ||
      arch.feature_dim < 1 || arch.alphabet_size < 1)
    throw InvalidArchitecture("layers, cells, feature dim and alphabet size "
                              "must all be >= 1");
  Network net;
  net.alphabet_size = arch.alphabet_size;
  net.feature_dim = arch.feature_dim;
  const int cells = arch.cells_per_direction;
  int input_dim = arch.feature_dim;
  for (int l = 0; l < arch.num_layers; ++l) {
    BiLstmLayer layer;
    for (auto* dir : {&layer.forward_dir, &layer.backward_dir}) {
      auto init_gate = [&](GateParams& gate, bool peephole) {
        gate.W.setZero(cells, input_dim);
        gate.R.setZero(cells, cells);
        if (peephole) gate.P.setZero(cells);
        gate.b.setZero(cells);
      };
      init_gate(dir->input_gate, true);
      init_gate(dir->forget_gate, true);
      init_gate(dir->output_gate, true);
      init_gate(dir->candidate, false);
    }
    net.layers.push_back(std::move(layer));
    input_dim = 2 * cells;
  }
  net.softmax_weights.setZero(arch.alphabet_size + 1, input_dim);
  net.softmax_bias.setZero(arch.alphabet_size + 1);
  return net;
}

}  // namespace

NetworkArch Network::arch() const {
  NetworkArch a;
  a.num_layers = static_cast<int>(layers.size());
  a.cells_per_direction = layers.front().cells_per_direction();
  a.feature_dim = feature_dim;
  a.alphabet_size = alphabet_size;
  return a;
}

std::vector<Eigen::Map<Eigen::VectorXd>> Network::param_views() {
  std::vector<Eigen::Map<Eigen::VectorXd>> views;
  collect_views(*this, views);
  return views;
}

std::vector<Eigen::Map<const Eigen::VectorXd>> Network::param_views() const {
  std::vector<Eigen::Map<const Eigen::VectorXd>> views;
  collect_views(*this, views);
  return views;
}

long Network::num_params() const {
  long n = 0;
  for (const auto& v : param_views()) n += v.size();
  return n;
}

Network init_network(const NetworkArch& arch, std::uint64_t seed,
                     ForgetBiasMode forget_bias_mode) {
  Network net = allocate(arch);
  Rng rng = derive_rng(seed, "init");
  for (auto& view : net.param_views())
    for (long i = 0; i < view.size(); ++i) view[i] = rng.uniform(-0.1, 0.1);
  if (forget_bias_mode == ForgetBiasMode::Ones)
    for (auto& layer : net.layers) {
      layer.forward_dir.forget_gate.b.setOnes();
      layer.backward_dir.forget_gate.b.setOnes();
    }
  return net;
}

Network zeros_like(const Network& net) {
  Network z = allocate(net.arch());
  return z;
}

StepCache lstm_cell_step(const Eigen::VectorXd& x_t,
                         const Eigen::VectorXd& h_prev,
                         const Eigen::VectorXd& c_prev,
                         const DirectionParams& p,
                         const Eigen::VectorXd* cell_mask,
                         DropoutLocation cell_location) {
  StepCache st;
  st.i = sigmoid((p.input_gate.W * x_t + p.input_gate.R * h_prev +
                  p.input_gate.b).array() +
                 p.input_gate.P.array() * c_prev.array());
  st.f = sigmoid((p.forget_gate.W * x_t + p.forget_gate.R * h_prev +
                  p.forget_gate.b).array() +
                 p.forget_gate.P.array() * c_prev.array());
  st.g = (p.candidate.W * x_t + p.candidate.R * h_prev + p.candidate.b)
             .array().tanh();
  if (cell_mask) {
    st.c = cell_state_with_dropout(st.f, c_prev, st.i, st.g, *cell_mask,
                                   cell_location);
  } else {
    st.c = st.f.array() * c_prev.array() + st.i.array() * st.g.array();
  }
  st.o = sigmoid((p.output_gate.W * x_t + p.output_gate.R * h_prev +
                  p.output_gate.b).array() +
                 p.output_gate.P.array() * st.c.array());
  st.h = st.o.array() * st.c.array().tanh();
  return st;
}

Eigen::MatrixXd bilstm_layer_forward(const Eigen::MatrixXd& seq,
                                     const BiLstmLayer& layer,
                                     const LayerMasks* masks,
                                     LayerCache* cache) {
  const int t_len = static_cast<int>(seq.rows());
  const int cells = layer.cells_per_direction();
  if (seq.cols() != layer.forward_dir.input_dim())
    throw ShapeError("layer input dim mismatch");
  Eigen::MatrixXd out(t_len, 2 * cells);

  for (int pass = 0; pass < 2; ++pass) {
    const bool backward_dir = pass == 1;
    const DirectionParams& p =
        backward_dir ? layer.backward_dir : layer.forward_dir;
    DirectionCache* dc =
        cache ? (backward_dir ? &cache->bwd : &cache->fwd) : nullptr;
    if (dc) dc->steps.reserve(t_len);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cells);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(cells);
    for (int s = 0; s < t_len; ++s) {
      const int t = backward_dir ? t_len - 1 - s : s;
      const Eigen::VectorXd* mask =
          masks ? masks->cell_at(t, backward_dir) : nullptr;
      StepCache st = lstm_cell_step(
          seq.row(t).transpose(), h, c, p, mask,
          masks ? masks->cell_location : DropoutLocation::NmlCellUpdate);
      h = st.h;
      c = st.c;
      out.block(t, backward_dir ? cells : 0, 1, cells) = h.transpose();
      if (dc) dc->steps.push_back(std::move(st));
    }
  }
  return out;
}

Eigen::MatrixXd network_forward_with_masks(const Eigen::MatrixXd& features,
                                           const Network& net,
                                           const MaskSet& masks,
                                           ForwardCache* cache) {
  if (features.cols() != net.feature_dim)
    throw ShapeError("feature dim " + std::to_string(features.cols()) +
                     " != network input dim " +
                     std::to_string(net.feature_dim));
  const bool masked = !masks.layers.empty();
  if (masked && masks.layers.size() != net.layers.size())
    throw ShapeError("mask set does not match network depth");
  const int t_len = static_cast<int>(features.rows());

  if (cache) {
    cache->layers.clear();
    cache->layers.resize(net.layers.size());
    cache->masks = masks;
    cache->num_steps = t_len;
    cache->net_params = net.num_params();
  }

  Eigen::MatrixXd x = features;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerMasks* lm = masked ? &masks.layers[l] : nullptr;
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) lc->input = x;
    Eigen::MatrixXd y = bilstm_layer_forward(x, net.layers[l], lm, lc);
    // Forward-connection dropout sits after every LSTM layer (the last one
    // right before the softmax).
    if (lm)
      for (int t = 0; t < t_len; ++t)
        if (const Eigen::VectorXd* m = lm->forward_at(t))
          y.row(t).array() *= m->transpose().array();
    x = std::move(y);
  }
  if (cache) cache->softmax_input = x;

  Eigen::MatrixXd posteriors(t_len, net.num_outputs());
  for (int t = 0; t < t_len; ++t) {
    Eigen::VectorXd logits = net.softmax_weights * x.row(t).transpose() +
                             net.softmax_bias;
    const double shift = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.array() - shift).exp();
    posteriors.row(t) = (e / e.sum()).transpose();
  }
  if (cache) cache->posteriors = posteriors;
  return posteriors;
}

Eigen::MatrixXd network_forward(const FeatureMatrix& fm, const Network& net,
                                const DropoutStage& stage, RunMode mode,
                                Rng& rng, ForwardCache* cache,
                                std::optional<int> stochastic_choice) {
  MaskSet masks;
  if (mode == RunMode::Train && !stage.entries.empty()) {
    std::vector<int> cells;
    for (const auto& layer : net.layers)
      cells.push_back(layer.cells_per_direction());
    masks = masks_for_utterance(stage, static_cast<int>(fm.data.rows()), cells,
                                rng, stochastic_choice);
  }
  return network_forward_with_masks(fm.data, net, masks, cache);
}

namespace {

// Reverse-mode pass through one direction; accumulates parameter gradients
// and the input-sequence gradient.
void direction_backward(const DirectionParams& p, const DirectionCache& dc,
                        const Eigen::MatrixXd& input,
                        const Eigen::MatrixXd& grad_out, int col_offset,
                        bool backward_dir, const LayerMasks* masks,
                        DirectionParams& grads, Eigen::MatrixXd& grad_input) {
  const int t_len = static_cast<int>(dc.steps.size());
  const int cells = p.cells();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cells);
  Eigen::VectorXd dh_carry = zero, dc_carry = zero;

  for (int s = t_len - 1; s >= 0; --s) {
    const int t = backward_dir ? t_len - 1 - s : s;
    const StepCache& st = dc.steps[s];
    const Eigen::VectorXd& c_prev = s > 0 ? dc.steps[s - 1].c : zero;
    const Eigen::VectorXd& h_prev = s > 0 ? dc.steps[s - 1].h : zero;

    const Eigen::ArrayXd dh =
        grad_out.block(t, col_offset, 1, cells).transpose().array() +
        dh_carry.array();
    const Eigen::ArrayXd tanh_c = st.c.array().tanh();
    const Eigen::ArrayXd dpre_o =
        dh * tanh_c * st.o.array() * (1.0 - st.o.array());
    Eigen::ArrayXd dc = dh * st.o.array() * (1.0 - tanh_c.square()) +
                        dc_carry.array() + p.output_gate.P.array() * dpre_o;

    // Unwrap the cell-dropout rewrite of c_t.
    Eigen::ArrayXd dfc, du;  // grads of f.*c_prev and of i.*g
    const Eigen::VectorXd* mask =
        masks ? masks->cell_at(t, backward_dir) : nullptr;
    if (mask && masks->cell_location == DropoutLocation::RnnDropCell) {
      dfc = dc * mask->array();
      du = dfc;
    } else if (mask) {  // NmlCellUpdate
      dfc = dc;
      du = dc * mask->array();
    } else {
      dfc = dc;
      du = dc;
    }

    const Eigen::ArrayXd dpre_f =
        dfc * c_prev.array() * st.f.array() * (1.0 - st.f.array());
    const Eigen::ArrayXd dpre_i =
        du * st.g.array() * st.i.array() * (1.0 - st.i.array());
    const Eigen::ArrayXd dpre_g = du * st.i.array() * (1.0 - st.g.array().square());

    dc_carry = (dfc * st.f.array() + p.input_gate.P.array() * dpre_i +
                p.forget_gate.P.array() * dpre_f).matrix();
    dh_carry = p.input_gate.R.transpose() * dpre_i.matrix() +
               p.forget_gate.R.transpose() * dpre_f.matrix() +
               p.output_gate.R.transpose() * dpre_o.matrix() +
               p.candidate.R.transpose() * dpre_g.matrix();
    grad_input.row(t) +=
        (p.input_gate.W.transpose() * dpre_i.matrix() +
         p.forget_gate.W.transpose() * dpre_f.matrix() +
         p.output_gate.W.transpose() * dpre_o.matrix() +
         p.candidate.W.transpose() * dpre_g.matrix())
            .transpose();

    const Eigen::RowVectorXd x_t = input.row(t);
    grads.input_gate.W += dpre_i.matrix() * x_t;
    grads.input_gate.R += dpre_i.matrix() * h_prev.transpose();
    grads.input_gate.P.array() += dpre_i * c_prev.array();
    grads.input_gate.b.array() += dpre_i;

    grads.forget_gate.W += dpre_f.matrix() * x_t;
    grads.forget_gate.R += dpre_f.matrix() * h_prev.transpose();
    grads.forget_gate.P.array() += dpre_f * c_prev.array();
    grads.forget_gate.b.array() += dpre_f;

    grads.output_gate.W += dpre_o.matrix() * x_t;
    grads.output_gate.R += dpre_o.matrix() * h_prev.transpose();
    grads.output_gate.P.array() += dpre_o * st.c.array();
    grads.output_gate.b.array() += dpre_o;

    grads.candidate.W += dpre_g.matrix() * x_t;
    grads.candidate.R += dpre_g.matrix() * h_prev.transpose();
    grads.candidate.b.array() += dpre_g;
  }
}

}  // namespace

Network network_backward(const Network& net, const ForwardCache& cache,
                         const Eigen::MatrixXd& grad_logits) {
  if (cache.net_params != net.num_params() ||
      cache.layers.size() != net.layers.size())
    throw CacheMismatch("forward cache does not match this network");
  if (grad_logits.rows() != cache.num_steps ||
      grad_logits.cols() != net.num_outputs())
    throw ShapeError("grad_logits shape mismatch");

  Network grads = zeros_like(net);
  grads.softmax_weights = grad_logits.transpose() * cache.softmax_input;
  grads.softmax_bias = grad_logits.colwise().sum().transpose();

  Eigen::MatrixXd grad_y = grad_logits * net.softmax_weights;  // T x 2*cells
  const bool masked = !cache.masks.layers.empty();

  for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
    const LayerMasks* lm = masked ? &cache.masks.layers[l] : nullptr;
    if (lm)
      for (int t = 0; t < cache.num_steps; ++t)
        if (const Eigen::VectorXd* m = lm->forward_at(t))
          grad_y.row(t).array() *= m->transpose().array();

    const LayerCache& lc = cache.layers[l];
    Eigen::MatrixXd grad_input =
        Eigen::MatrixXd::Zero(cache.num_steps, lc.input.cols());
    direction_backward(net.layers[l].forward_dir, lc.fwd, lc.input, grad_y, 0,
                       false, lm, grads.layers[l].forward_dir, grad_input);
    direction_backward(net.layers[l].backward_dir, lc.bwd, lc.input, grad_y,
                       net.layers[l].cells_per_direction(), true, lm,
                       grads.layers[l].backward_dir, grad_input);
    grad_y = std::move(grad_input);
  }
  return grads;
}

void save_checkpoint(const std::string& path, const Network& net) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out.write("NETC", 4);
    const std::uint32_t header[5] = {
        1u, static_cast<std::uint32_t>(net.layers.size()),
        static_cast<std::uint32_t>(net.layers.front().cells_per_direction()),
        static_cast<std::uint32_t>(net.feature_dim),
        static_cast<std::uint32_t>(net.alphabet_size)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    for (const auto& view : net.param_views())
      out.write(reinterpret_cast<const char*>(view.data()),
                static_cast<std::streamsize>(view.size() * sizeof(double)));
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "NETC", 4) != 0)
    throw IoError(path + ": bad checkpoint magic");
  std::uint32_t header[5];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (header[0] != 1u) throw IoError(path + ": unsupported checkpoint version");
  NetworkArch arch;
  arch.num_layers = static_cast<int>(header[1]);
  arch.cells_per_direction = static_cast<int>(header[2]);
  arch.feature_dim = static_cast<int>(header[3]);
  arch.alphabet_size = static_cast<int>(header[4]);
  Network net = allocate(arch);
  for (auto& view : net.param_views())
    in.read(reinterpret_cast<char*>(view.data()),
            static_cast<std::streamsize>(view.size() * sizeof(double)));
  if (!in) throw IoError(path + ": truncated checkpoint");
  return net;
}

}  // namespace seqtrain
