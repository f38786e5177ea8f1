#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "msgnn/nn.hpp"
#include "msgnn/rng.hpp"
#include "msgnn/tape.hpp"

namespace msgnn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst scalar
  std::int64_t checked = 0;
};

// Moves every parameter off exact ReLU kinks before finite differencing.
// Zero-initialized biases otherwise put dead rows exactly at a kink, where
// one-sided difference quotients and the subgradient legitimately disagree.
inline void jitter_params(ParamStore<double>& ps, std::uint64_t seed, double eps = 0.05) {
  SplitMix64 rng(seed);
  for (auto& [name, t] : ps.params)
    for (double& v : t.data) v += eps * (2.0 * rng.next_double01() - 1.0);
}

namespace detail {

template <class BuildLoss>
double loss_value(const ParamStore<double>& ps, BuildLoss&& build) {
  Tape<double> tape;
  TapeParams<double> tp = register_params(tape, ps);
  auto loss = build(tape, tp);
  return tape.val(loss).data[0];
}

}  // namespace detail

// Central finite differences against the tape's adjoints, in double. `build`
// must deterministically construct the same scalar loss on any tape it is
// given (same graph, same init seeds, same targets). Relative error per
// scalar is |a - f| / max(floor, |a|, |f|).
template <class BuildLoss>
GradCheckResult gradcheck(ParamStore<double> ps, BuildLoss&& build, double h = 1e-5,
                          double floor = 1e-3) {
  std::map<std::string, Tensor<double>> analytic;
  {
    Tape<double> tape;
    TapeParams<double> tp = register_params(tape, ps);
    auto loss = build(tape, tp);
    tape.backward(loss);
    analytic = collect_grads(tape, tp);
  }
  GradCheckResult res;
  for (auto& [name, theta] : ps.params) {
    const Tensor<double>& an = analytic.at(name);
    for (size_t i = 0; i < theta.data.size(); ++i) {
      double orig = theta.data[i];
      theta.data[i] = orig + h;
      double lp = detail::loss_value(ps, build);
      theta.data[i] = orig - h;
      double lm = detail::loss_value(ps, build);
      theta.data[i] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double a = an.data[i];
      double rel = std::abs(a - fd) / std::max({floor, std::abs(a), std::abs(fd)});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
      ++res.checked;
    }
  }
  return res;
}

}  // namespace msgnn
