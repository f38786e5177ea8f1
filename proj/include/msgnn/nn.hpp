#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

#include "msgnn/rng.hpp"
#include "msgnn/tape.hpp"
#include "msgnn/tensor.hpp"

namespace msgnn {

// Named parameters plus Adam moments. std::map keys give one fixed iteration
// order (sorted by name) for checkpoints and optimizer sweeps; the RNG
// consumption order at init time is fixed separately by the builder's call
// sequence.
template <class Real>
struct ParamStore {
  std::map<std::string, Tensor<Real>> params;
  std::map<std::string, Tensor<Real>> adam_m, adam_v;
  std::int64_t adam_t = 0;

  Tensor<Real>& at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }
  const Tensor<Real>& at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }

  void add(const std::string& name, Tensor<Real> t) {
    if (!params.emplace(name, std::move(t)).second)
      throw std::invalid_argument("duplicate parameter: " + name);
  }

  std::int64_t num_scalars() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params) n += static_cast<std::int64_t>(t.size());
    return n;
  }

  template <class Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (const auto& [name, t] : params) out.params.emplace(name, t.template cast<Other>());
    return out;
  }
};

// Weights U(-a, a) with a = 1/sqrt(fan_in), computed row-major entirely in
// float (so a double store initialized from the same seed holds bit-identical
// values); biases zero.
template <class Real>
void init_affine(ParamStore<Real>& ps, const std::string& prefix, int fan_in, int fan_out,
                 SplitMix64& rng) {
  const float a = 1.0f / std::sqrt(static_cast<float>(fan_in));
  Tensor<Real> w(fan_in, fan_out);
  for (Real& v : w.data) v = Real(a * (2.0f * rng.next_float01() - 1.0f));
  ps.add(prefix + ".w", std::move(w));
  ps.add(prefix + ".b", Tensor<Real>(1, fan_out));
}

template <class Real>
void init_mlp3(ParamStore<Real>& ps, const std::string& prefix, int d_in, int d_hidden, int d_out,
               SplitMix64& rng) {
  init_affine(ps, prefix + ".l0", d_in, d_hidden, rng);
  init_affine(ps, prefix + ".l1", d_hidden, d_hidden, rng);
  init_affine(ps, prefix + ".l2", d_hidden, d_out, rng);
}

// One weight matrix over [x | h] producing the four gate preactivations;
// forget-gate bias starts at 1.
template <class Real>
void init_lstm(ParamStore<Real>& ps, const std::string& prefix, int x_dim, int d,
               SplitMix64& rng) {
  const float a = 1.0f / std::sqrt(static_cast<float>(x_dim + d));
  Tensor<Real> w(x_dim + d, 4 * d);
  for (Real& v : w.data) v = Real(a * (2.0f * rng.next_float01() - 1.0f));
  ps.add(prefix + ".w", std::move(w));
  Tensor<Real> b(1, 4 * d);
  for (int j = 0; j < d; ++j) b.data[static_cast<size_t>(d + j)] = Real(1);
  ps.add(prefix + ".b", std::move(b));
}

// Parameter leaves registered on a tape, addressable by name.
template <class Real>
struct TapeParams {
  std::map<std::string, typename Tape<Real>::Id> ids;

  typename Tape<Real>::Id at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
  }
};

template <class Real>
TapeParams<Real> register_params(Tape<Real>& tape, const ParamStore<Real>& ps) {
  TapeParams<Real> tp;
  for (const auto& [name, t] : ps.params) tp.ids.emplace(name, tape.leaf(t, true));
  return tp;
}

// Adjoints by name; parameters the loss never reached get zeros.
template <class Real>
std::map<std::string, Tensor<Real>> collect_grads(const Tape<Real>& tape,
                                                  const TapeParams<Real>& tp) {
  std::map<std::string, Tensor<Real>> out;
  for (const auto& [name, id] : tp.ids) {
    if (tape.has_grad(id))
      out.emplace(name, tape.grad(id));
    else
      out.emplace(name, Tensor<Real>(tape.val(id).rows, tape.val(id).cols));
  }
  return out;
}

// Three affine layers with ReLU between them, linear output.
template <class Real>
typename Tape<Real>::Id mlp3_forward(Tape<Real>& tape, const TapeParams<Real>& tp,
                                     const std::string& prefix, typename Tape<Real>::Id x) {
  auto h0 = tape.relu(tape.add_rowvec(tape.matmul(x, tp.at(prefix + ".l0.w")), tp.at(prefix + ".l0.b")));
  auto h1 = tape.relu(tape.add_rowvec(tape.matmul(h0, tp.at(prefix + ".l1.w")), tp.at(prefix + ".l1.b")));
  return tape.add_rowvec(tape.matmul(h1, tp.at(prefix + ".l2.w")), tp.at(prefix + ".l2.b"));
}

// LSTM cell: the node embedding is the hidden state, the aggregated message
// the input. Returns {h', c'}.
template <class Real>
std::pair<typename Tape<Real>::Id, typename Tape<Real>::Id> lstm_step(
    Tape<Real>& tape, const TapeParams<Real>& tp, const std::string& prefix,
    typename Tape<Real>::Id x, typename Tape<Real>::Id h, typename Tape<Real>::Id c) {
  auto zin = tape.concat_cols(x, h);
  auto z = tape.add_rowvec(tape.matmul(zin, tp.at(prefix + ".w")), tp.at(prefix + ".b"));
  return tape.lstm_gates(z, c);
}

struct AdamConfig {
  double lr = 2e-5;
  double weight_decay = 1e-10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction; weight decay enters the gradient (L2 style)
// before the moment updates. Correction factors are computed in double once
// per step.
template <class Real>
void adam_step(ParamStore<Real>& ps, const std::map<std::string, Tensor<Real>>& grads,
               const AdamConfig& cfg) {
  ps.adam_t += 1;
  const Real c1 = Real(1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(ps.adam_t))));
  const Real c2 = Real(1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(ps.adam_t))));
  const Real b1 = Real(cfg.beta1), b2 = Real(cfg.beta2);
  const Real lr = Real(cfg.lr), wd = Real(cfg.weight_decay), eps = Real(cfg.eps);
  for (auto& [name, theta] : ps.params) {
    auto git = grads.find(name);
    if (git == grads.end()) throw std::invalid_argument("adam: missing gradient for " + name);
    const Tensor<Real>& g = git->second;
    if (!g.same_shape(theta)) throw std::invalid_argument("adam: gradient shape mismatch for " + name);
    Tensor<Real>& m = ps.adam_m.try_emplace(name, Tensor<Real>(theta.rows, theta.cols)).first->second;
    Tensor<Real>& v = ps.adam_v.try_emplace(name, Tensor<Real>(theta.rows, theta.cols)).first->second;
    for (size_t i = 0; i < theta.data.size(); ++i) {
      Real gi = g.data[i] + wd * theta.data[i];
      m.data[i] = b1 * m.data[i] + (Real(1) - b1) * gi;
      v.data[i] = b2 * v.data[i] + (Real(1) - b2) * gi * gi;
      Real mhat = m.data[i] * c1;
      Real vhat = v.data[i] * c2;
      theta.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

}  // namespace msgnn
