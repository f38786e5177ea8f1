#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "msgnn/factor_graph.hpp"
#include "msgnn/tensor.hpp"

namespace msgnn {

// Reverse-mode tape over whole tensors. Operations append nodes in forward
// order; backward() walks ids in reverse, so every node's adjoint is complete
// before its rule runs. Adjoints accumulate additively, which is what makes
// layer-tied parameters receive the sum of their per-layer contributions.
//
// References returned by val()/grad() are invalidated by recording further
// ops. Csr structures passed to aggregate() must outlive the tape.
template <class Real>
class Tape {
 public:
  using Id = std::int32_t;

  Id leaf(Tensor<Real> v, bool retain_grad = false) {
    return push(std::move(v), nullptr, retain_grad);
  }

  const Tensor<Real>& val(Id id) const { return vals_[static_cast<size_t>(id)]; }

  // Accumulated adjoint; valid after backward() for retained nodes.
  const Tensor<Real>& grad(Id id) const {
    const Tensor<Real>& g = grads_[static_cast<size_t>(id)];
    if (g.rows == 0 && vals_[static_cast<size_t>(id)].rows != 0)
      throw std::logic_error("tape: grad not available for this node");
    return g;
  }

  bool has_grad(Id id) const { return grads_[static_cast<size_t>(id)].rows != 0; }

  Id matmul(Id a, Id b) {
    Tensor<Real> y(val(a).rows, val(b).cols);
    matmul_nn(val(a), val(b), y);
    return push(std::move(y), [a, b](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      matmul_nt(gy, t.val(b), t.ensure_grad(a), true);
      matmul_tn(t.val(a), gy, t.ensure_grad(b), true);
    });
  }

  Id add(Id a, Id b) {
    if (!val(a).same_shape(val(b))) throw std::invalid_argument("add: shape mismatch");
    Tensor<Real> y = val(a);
    const Tensor<Real>& vb = val(b);
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += vb.data[i];
    return push(std::move(y), [a, b](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      accumulate(t.ensure_grad(a), gy);
      accumulate(t.ensure_grad(b), gy);
    });
  }

  // y[r,:] = x[r,:] + b[0,:]
  Id add_rowvec(Id x, Id b) {
    if (val(b).rows != 1 || val(b).cols != val(x).cols)
      throw std::invalid_argument("add_rowvec: bias must be 1 x cols(x)");
    Tensor<Real> y = val(x);
    const Tensor<Real>& vb = val(b);
    for (std::int32_t r = 0; r < y.rows; ++r) {
      Real* row = y.row(r);
      for (std::int32_t j = 0; j < y.cols; ++j) row[j] += vb.data[static_cast<size_t>(j)];
    }
    return push(std::move(y), [x, b](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      accumulate(t.ensure_grad(x), gy);
      Tensor<Real>& gb = t.ensure_grad(b);
      for (std::int32_t r = 0; r < gy.rows; ++r) {
        const Real* row = gy.row(r);
        for (std::int32_t j = 0; j < gy.cols; ++j) gb.data[static_cast<size_t>(j)] += row[j];
      }
    });
  }

  Id relu(Id x) {
    Tensor<Real> y = val(x);
    for (Real& v : y.data)
      if (v < Real(0)) v = Real(0);
    return push(std::move(y), [x](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      const Tensor<Real>& vx = t.val(x);
      Tensor<Real>& gx = t.ensure_grad(x);
      for (size_t i = 0; i < gy.data.size(); ++i)
        if (vx.data[i] > Real(0)) gx.data[i] += gy.data[i];
    });
  }

  Id sigmoid(Id x) {
    Tensor<Real> y = val(x);
    for (Real& v : y.data) v = Real(1) / (Real(1) + std::exp(-v));
    return push(std::move(y), [x](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      const Tensor<Real>& vy = t.val(y_id);
      Tensor<Real>& gx = t.ensure_grad(x);
      for (size_t i = 0; i < gy.data.size(); ++i)
        gx.data[i] += gy.data[i] * vy.data[i] * (Real(1) - vy.data[i]);
    });
  }

  Id concat_cols(Id a, Id b) {
    const Tensor<Real>&va = val(a), &vb = val(b);
    if (va.rows != vb.rows) throw std::invalid_argument("concat_cols: row mismatch");
    Tensor<Real> y(va.rows, va.cols + vb.cols);
    for (std::int32_t r = 0; r < y.rows; ++r) {
      Real* row = y.row(r);
      const Real* ra = va.row(r);
      const Real* rb = vb.row(r);
      for (std::int32_t j = 0; j < va.cols; ++j) row[j] = ra[j];
      for (std::int32_t j = 0; j < vb.cols; ++j) row[va.cols + j] = rb[j];
    }
    return push(std::move(y), [a, b](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      Tensor<Real>& ga = t.ensure_grad(a);
      Tensor<Real>& gb = t.ensure_grad(b);
      for (std::int32_t r = 0; r < gy.rows; ++r) {
        const Real* row = gy.row(r);
        Real* ra = ga.row(r);
        Real* rb = gb.row(r);
        for (std::int32_t j = 0; j < ga.cols; ++j) ra[j] += row[j];
        for (std::int32_t j = 0; j < gb.cols; ++j) rb[j] += row[ga.cols + j];
      }
    });
  }

  // y[r,:] = x[idx[r],:]
  Id gather_rows(Id x, std::vector<std::int32_t> idx) {
    const Tensor<Real>& vx = val(x);
    Tensor<Real> y(static_cast<std::int32_t>(idx.size()), vx.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
      const Real* src = vx.row(idx[r]);
      Real* dst = y.row(static_cast<std::int32_t>(r));
      for (std::int32_t j = 0; j < vx.cols; ++j) dst[j] = src[j];
    }
    return push(std::move(y), [x, idx = std::move(idx)](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      Tensor<Real>& gx = t.ensure_grad(x);
      for (size_t r = 0; r < idx.size(); ++r) {
        const Real* src = gy.row(static_cast<std::int32_t>(r));
        Real* dst = gx.row(idx[r]);
        for (std::int32_t j = 0; j < gy.cols; ++j) dst[j] += src[j];
      }
    });
  }

  // y[r,:] = sum of x[s,:] over s in fwd row r; rows with no sources stay 0.
  // bwd must be the transposed adjacency (fwd rows indexing its sources).
  Id aggregate(const Csr& fwd, const Csr& bwd, Id x) {
    const Tensor<Real>& vx = val(x);
    if (vx.rows != fwd.num_sources) throw std::invalid_argument("aggregate: source count mismatch");
    Tensor<Real> y(fwd.num_rows, vx.cols);
    for (std::int32_t r = 0; r < fwd.num_rows; ++r) {
      Real* dst = y.row(r);
      for (std::int32_t e = fwd.row_begin(r); e < fwd.row_end(r); ++e) {
        const Real* src = vx.row(fwd.col[static_cast<size_t>(e)]);
        for (std::int32_t j = 0; j < vx.cols; ++j) dst[j] += src[j];
      }
    }
    const Csr* bp = &bwd;
    return push(std::move(y), [x, bp](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      Tensor<Real>& gx = t.ensure_grad(x);
      for (std::int32_t s = 0; s < bp->num_rows; ++s) {
        Real* dst = gx.row(s);
        for (std::int32_t e = bp->row_begin(s); e < bp->row_end(s); ++e) {
          const Real* src = gy.row(bp->col[static_cast<size_t>(e)]);
          for (std::int32_t j = 0; j < gy.cols; ++j) dst[j] += src[j];
        }
      }
    });
  }

  // One LSTM cell step from preactivations. z is N x 4d in gate order
  // [input | forget | cell | output], c is the N x d previous cell state:
  //   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
  //   c' = f (*) c + i (*) g
  //   h' = o (*) tanh(c')
  // Returns {h', c'}. The joint rule is attached to the c' node, created
  // immediately after h', so both adjoints are complete when it runs.
  std::pair<Id, Id> lstm_gates(Id z, Id c) {
    const Tensor<Real>&vz = val(z), &vc = val(c);
    if (vz.rows != vc.rows || vz.cols != 4 * vc.cols)
      throw std::invalid_argument("lstm_gates: z must be rows(c) x 4*cols(c)");
    const std::int32_t d = vc.cols;
    Tensor<Real> h(vc.rows, d), cn(vc.rows, d);
    for (std::int32_t r = 0; r < vc.rows; ++r) {
      const Real* zr = vz.row(r);
      const Real* cr = vc.row(r);
      Real* hr = h.row(r);
      Real* cnr = cn.row(r);
      for (std::int32_t j = 0; j < d; ++j) {
        Real gi = sig(zr[j]);
        Real gf = sig(zr[d + j]);
        Real gg = std::tanh(zr[2 * d + j]);
        Real go = sig(zr[3 * d + j]);
        cnr[j] = gf * cr[j] + gi * gg;
        hr[j] = go * std::tanh(cnr[j]);
      }
    }
    Id h_id = push(std::move(h), nullptr);
    Id c_id = push(std::move(cn), [z, c, h_id](Tape& t, Id cn_id) {
      const Tensor<Real>&vz = t.val(z), &vc = t.val(c), &vcn = t.val(cn_id);
      const std::int32_t d = vc.cols;
      const Tensor<Real>& gh = t.grads_[static_cast<size_t>(h_id)];
      const Tensor<Real>& gcn = t.grads_[static_cast<size_t>(cn_id)];
      Tensor<Real>& gz = t.ensure_grad(z);
      Tensor<Real>& gc = t.ensure_grad(c);
      const bool has_gh = gh.rows != 0;
      const bool has_gcn = gcn.rows != 0;
      for (std::int32_t r = 0; r < vc.rows; ++r) {
        const Real* zr = vz.row(r);
        const Real* cr = vc.row(r);
        const Real* cnr = vcn.row(r);
        Real* gzr = gz.row(r);
        Real* gcr = gc.row(r);
        const Real* ghr = has_gh ? gh.row(r) : nullptr;
        const Real* gcnr = has_gcn ? gcn.row(r) : nullptr;
        for (std::int32_t j = 0; j < d; ++j) {
          Real gi = sig(zr[j]);
          Real gf = sig(zr[d + j]);
          Real gg = std::tanh(zr[2 * d + j]);
          Real go = sig(zr[3 * d + j]);
          Real tc = std::tanh(cnr[j]);
          Real dh = ghr ? ghr[j] : Real(0);
          Real dc = (gcnr ? gcnr[j] : Real(0)) + dh * go * (Real(1) - tc * tc);
          gzr[j] += dc * gg * gi * (Real(1) - gi);
          gzr[d + j] += dc * cr[j] * gf * (Real(1) - gf);
          gzr[2 * d + j] += dc * gi * (Real(1) - gg * gg);
          gzr[3 * d + j] += dh * tc * go * (Real(1) - go);
          gcr[j] += dc * gf;
        }
      }
    });
    // The joint rule lives on c'; make it fire even when only h' is consumed.
    watch_[static_cast<size_t>(c_id)] = h_id;
    return {h_id, c_id};
  }

  // Elementwise binary cross entropy against constant targets, probabilities
  // clamped to [1e-7, 1 - 1e-7]. The clamp has zero slope outside the band.
  Id bce_elem(Id p, Tensor<Real> targets) {
    const Tensor<Real>& vp = val(p);
    if (!vp.same_shape(targets)) throw std::invalid_argument("bce_elem: shape mismatch");
    Tensor<Real> y = vp;
    for (size_t i = 0; i < y.data.size(); ++i) {
      Real pc = clamp_p(vp.data[i]);
      Real t = targets.data[i];
      y.data[i] = -(t * std::log(pc) + (Real(1) - t) * std::log(Real(1) - pc));
    }
    return push(std::move(y), [p, targets = std::move(targets)](Tape& t, Id y_id) {
      const Tensor<Real>& gy = t.grads_[static_cast<size_t>(y_id)];
      const Tensor<Real>& vp = t.val(p);
      Tensor<Real>& gp = t.ensure_grad(p);
      for (size_t i = 0; i < gy.data.size(); ++i) {
        Real raw = vp.data[i];
        if (raw <= kClampEps || raw >= Real(1) - kClampEps) continue;
        Real tg = targets.data[i];
        gp.data[i] += gy.data[i] * (raw - tg) / (raw * (Real(1) - raw));
      }
    });
  }

  // Scalar sum(x (*) w); the tape's usual loss head.
  Id weighted_sum(Id x, Tensor<Real> w) {
    const Tensor<Real>& vx = val(x);
    if (!vx.same_shape(w)) throw std::invalid_argument("weighted_sum: shape mismatch");
    Tensor<Real> y(1, 1);
    for (size_t i = 0; i < vx.data.size(); ++i) y.data[0] += vx.data[i] * w.data[i];
    return push(std::move(y), [x, w = std::move(w)](Tape& t, Id y_id) {
      Real g = t.grads_[static_cast<size_t>(y_id)].data[0];
      Tensor<Real>& gx = t.ensure_grad(x);
      for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g * w.data[i];
    });
  }

  // Single use; seeds d(loss)/d(loss) = 1 and runs all reachable rules in
  // reverse id order. Non-retained adjoints are freed as soon as consumed.
  void backward(Id loss) {
    if (consumed_) throw std::logic_error("tape: backward already ran");
    consumed_ = true;
    if (val(loss).rows != 1 || val(loss).cols != 1)
      throw std::invalid_argument("backward: loss must be 1x1");
    Tensor<Real> seed(1, 1);
    seed.data[0] = Real(1);
    grads_[static_cast<size_t>(loss)] = std::move(seed);
    for (Id id = static_cast<Id>(vals_.size()) - 1; id >= 0; --id) {
      bool reached = grads_[static_cast<size_t>(id)].rows != 0;
      Id w = watch_[static_cast<size_t>(id)];
      if (w >= 0 && grads_[static_cast<size_t>(w)].rows != 0) reached = true;
      if (!reached) continue;
      if (backs_[static_cast<size_t>(id)]) backs_[static_cast<size_t>(id)](*this, id);
      if (!retain_[static_cast<size_t>(id)]) grads_[static_cast<size_t>(id)] = Tensor<Real>();
    }
  }

  size_t num_nodes() const { return vals_.size(); }

 private:
  static constexpr Real kClampEps = Real(1e-7);

  static Real sig(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }
  static Real clamp_p(Real p) {
    if (p < kClampEps) return kClampEps;
    if (p > Real(1) - kClampEps) return Real(1) - kClampEps;
    return p;
  }

  static void accumulate(Tensor<Real>& dst, const Tensor<Real>& src) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
  }

  Tensor<Real>& ensure_grad(Id id) {
    Tensor<Real>& g = grads_[static_cast<size_t>(id)];
    if (g.rows == 0) g = Tensor<Real>(val(id).rows, val(id).cols);
    return g;
  }

  template <class Back>
  Id push(Tensor<Real> v, Back back, bool retain = false) {
    vals_.push_back(std::move(v));
    grads_.emplace_back();
    retain_.push_back(retain);
    watch_.push_back(-1);
    if constexpr (std::is_same_v<Back, std::nullptr_t>)
      backs_.emplace_back();
    else
      backs_.emplace_back(std::move(back));
    return static_cast<Id>(vals_.size()) - 1;
  }

  std::vector<Tensor<Real>> vals_;
  std::vector<Tensor<Real>> grads_;
  std::vector<std::function<void(Tape&, Id)>> backs_;
  std::vector<char> retain_;
  std::vector<Id> watch_;
  bool consumed_ = false;
};

}  // namespace msgnn
