#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msgnn/factor_graph.hpp"
#include "msgnn/nn.hpp"
#include "msgnn/rng.hpp"
#include "msgnn/tape.hpp"

namespace msgnn {

enum class ModelKind { Nsfg, Esfg };

inline const char* model_kind_name(ModelKind k) { return k == ModelKind::Nsfg ? "nsfg" : "esfg"; }

inline ModelKind model_kind_from_name(const std::string& s) {
  if (s == "nsfg") return ModelKind::Nsfg;
  if (s == "esfg") return ModelKind::Esfg;
  throw std::invalid_argument("unknown model kind: " + s + " (want nsfg|esfg)");
}

struct ModelConfig {
  ModelKind kind = ModelKind::Nsfg;
  int d = 64;
  int T = 10;

  void validate() const {
    if (d < 1) throw std::invalid_argument("model: d must be >= 1");
    if (T < 1) throw std::invalid_argument("model: T must be >= 1");
  }
};

// Fresh parameters from one SplitMix64 stream. The call sequence below is the
// frozen RNG consumption order; changing it would change every seeded model.
template <class Real = float>
ParamStore<Real> init_model_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamStore<Real> ps;
  SplitMix64 rng(seed);
  const int d = cfg.d;
  if (cfg.kind == ModelKind::Nsfg) {
    init_mlp3(ps, "agg_lit", d, d, d, rng);
    init_mlp3(ps, "agg_cls", d, d, d, rng);
    init_lstm(ps, "upd_cls", d, d, rng);
    init_lstm(ps, "upd_lit", 2 * d, d, rng);
    init_mlp3(ps, "pred", d, d, 1, rng);
  } else {
    init_mlp3(ps, "agg_var_pos", d, d, d, rng);
    init_mlp3(ps, "agg_var_neg", d, d, d, rng);
    init_mlp3(ps, "agg_cls_pos", d, d, d, rng);
    init_mlp3(ps, "agg_cls_neg", d, d, d, rng);
    init_lstm(ps, "upd_cls", d, d, rng);
    init_lstm(ps, "upd_var", d, d, rng);
    init_mlp3(ps, "pred", d, d, 1, rng);
  }
  return ps;
}

// Initial node embeddings are U(0,1), resampled per forward pass from the
// given per-instance seeds: each instance's stream fills its literal (or
// variable) rows first, then its clause rows, row-major. A batch therefore
// holds exactly the rows the instances would get on their own.
template <class Real>
void fill_init_rows(Tensor<Real>& t, std::int32_t row_begin, std::int32_t row_count,
                    SplitMix64& rng) {
  for (std::int32_t r = 0; r < row_count; ++r) {
    Real* row = t.row(row_begin + r);
    for (std::int32_t j = 0; j < t.cols; ++j) row[j] = Real(rng.next_float01());
  }
}

namespace detail {

template <class Real>
void check_layer_finite(const Tape<Real>& tape, typename Tape<Real>::Id id, const char* what,
                        int layer) {
#if !defined(NDEBUG)
  if (!all_finite(tape.val(id))) {
    throw std::runtime_error(std::string("non-finite ") + what + " embedding at layer " +
                             std::to_string(layer));
  }
#else
  (void)tape;
  (void)id;
  (void)what;
  (void)layer;
#endif
}

}  // namespace detail

// Node-splitting forward. Layer k reads only layer k-1 states: the clause
// LSTM consumes the summed per-literal messages, the literal LSTM consumes
// the summed per-clause messages concatenated with the negation's embedding.
// The last layer skips the clause update, whose result nothing would read.
// Returns the per-variable logits (num_vars x 1), one row per variable in
// batch order, read from the positive literal rows. This overload takes the
// initial embeddings explicitly.
template <class Real>
typename Tape<Real>::Id nsfg_forward_init(Tape<Real>& tape, const TapeParams<Real>& tp,
                                          const ModelConfig& cfg, const Nsfg& g, Tensor<Real> l0,
                                          Tensor<Real> c0) {
  cfg.validate();
  const int d = cfg.d;
  if (l0.rows != g.num_lit_nodes() || l0.cols != d || c0.rows != g.num_clauses || c0.cols != d)
    throw std::invalid_argument("nsfg_forward: initial embedding shape mismatch");
  auto lit = tape.leaf(std::move(l0));
  auto cls = tape.leaf(std::move(c0));
  auto lit_cell = tape.leaf(Tensor<Real>(g.num_lit_nodes(), d));
  auto cls_cell = tape.leaf(Tensor<Real>(g.num_clauses, d));

  std::vector<std::int32_t> flip_idx(static_cast<size_t>(g.num_lit_nodes()));
  for (std::int32_t i = 0; i < g.num_lit_nodes(); ++i)
    flip_idx[static_cast<size_t>(i)] = Nsfg::flip(i);

  for (int k = 1; k <= cfg.T; ++k) {
    auto lit_msg = tape.aggregate(g.by_lit, g.by_clause,
                                  mlp3_forward(tape, tp, "agg_cls", cls));
    auto lit_in = tape.concat_cols(lit_msg, tape.gather_rows(lit, flip_idx));
    typename Tape<Real>::Id new_cls = cls, new_cls_cell = cls_cell;
    if (k < cfg.T) {
      auto cls_msg = tape.aggregate(g.by_clause, g.by_lit,
                                    mlp3_forward(tape, tp, "agg_lit", lit));
      auto [h, c] = lstm_step(tape, tp, "upd_cls", cls_msg, cls, cls_cell);
      new_cls = h;
      new_cls_cell = c;
    }
    auto [lh, lc] = lstm_step(tape, tp, "upd_lit", lit_in, lit, lit_cell);
    lit = lh;
    lit_cell = lc;
    cls = new_cls;
    cls_cell = new_cls_cell;
    detail::check_layer_finite(tape, lit, "literal", k);
    detail::check_layer_finite(tape, cls, "clause", k);
  }

  std::vector<std::int32_t> pos_idx(static_cast<size_t>(g.num_vars));
  for (std::int32_t i = 0; i < g.num_vars; ++i) pos_idx[static_cast<size_t>(i)] = 2 * i;
  return mlp3_forward(tape, tp, "pred", tape.gather_rows(lit, pos_idx));
}

template <class Real>
typename Tape<Real>::Id nsfg_forward(Tape<Real>& tape, const TapeParams<Real>& tp,
                                     const ModelConfig& cfg, const Nsfg& g,
                                     const std::vector<std::uint64_t>& init_seeds) {
  cfg.validate();
  if (init_seeds.size() != g.spans.size())
    throw std::invalid_argument("nsfg_forward: one init seed per instance required");
  Tensor<Real> l0(g.num_lit_nodes(), cfg.d), c0(g.num_clauses, cfg.d);
  for (size_t i = 0; i < g.spans.size(); ++i) {
    const Span& s = g.spans[i];
    SplitMix64 rng(init_seeds[i]);
    fill_init_rows(l0, 2 * s.var_offset, 2 * s.n, rng);
    fill_init_rows(c0, s.clause_offset, s.m, rng);
  }
  return nsfg_forward_init(tape, tp, cfg, g, std::move(l0), std::move(c0));
}

// Edge-splitting forward. Messages from each polarity's edge set are
// aggregated separately through that polarity's MLP and summed before the
// LSTM update; variables keep a single node. Logits are num_vars x 1. This
// overload takes the initial embeddings explicitly.
template <class Real>
typename Tape<Real>::Id esfg_forward_init(Tape<Real>& tape, const TapeParams<Real>& tp,
                                          const ModelConfig& cfg, const Esfg& g, Tensor<Real> v0,
                                          Tensor<Real> c0) {
  cfg.validate();
  const int d = cfg.d;
  if (v0.rows != g.num_vars || v0.cols != d || c0.rows != g.num_clauses || c0.cols != d)
    throw std::invalid_argument("esfg_forward: initial embedding shape mismatch");
  auto var = tape.leaf(std::move(v0));
  auto cls = tape.leaf(std::move(c0));
  auto var_cell = tape.leaf(Tensor<Real>(g.num_vars, d));
  auto cls_cell = tape.leaf(Tensor<Real>(g.num_clauses, d));

  for (int k = 1; k <= cfg.T; ++k) {
    auto var_msg = tape.add(tape.aggregate(g.pos_by_var, g.pos_by_clause,
                                           mlp3_forward(tape, tp, "agg_cls_pos", cls)),
                            tape.aggregate(g.neg_by_var, g.neg_by_clause,
                                           mlp3_forward(tape, tp, "agg_cls_neg", cls)));
    typename Tape<Real>::Id new_cls = cls, new_cls_cell = cls_cell;
    if (k < cfg.T) {
      auto cls_msg = tape.add(tape.aggregate(g.pos_by_clause, g.pos_by_var,
                                             mlp3_forward(tape, tp, "agg_var_pos", var)),
                              tape.aggregate(g.neg_by_clause, g.neg_by_var,
                                             mlp3_forward(tape, tp, "agg_var_neg", var)));
      auto [h, c] = lstm_step(tape, tp, "upd_cls", cls_msg, cls, cls_cell);
      new_cls = h;
      new_cls_cell = c;
    }
    auto [vh, vc] = lstm_step(tape, tp, "upd_var", var_msg, var, var_cell);
    var = vh;
    var_cell = vc;
    cls = new_cls;
    cls_cell = new_cls_cell;
    detail::check_layer_finite(tape, var, "variable", k);
    detail::check_layer_finite(tape, cls, "clause", k);
  }

  return mlp3_forward(tape, tp, "pred", var);
}

template <class Real>
typename Tape<Real>::Id esfg_forward(Tape<Real>& tape, const TapeParams<Real>& tp,
                                     const ModelConfig& cfg, const Esfg& g,
                                     const std::vector<std::uint64_t>& init_seeds) {
  cfg.validate();
  if (init_seeds.size() != g.spans.size())
    throw std::invalid_argument("esfg_forward: one init seed per instance required");
  Tensor<Real> v0(g.num_vars, cfg.d), c0(g.num_clauses, cfg.d);
  for (size_t i = 0; i < g.spans.size(); ++i) {
    const Span& s = g.spans[i];
    SplitMix64 rng(init_seeds[i]);
    fill_init_rows(v0, s.var_offset, s.n, rng);
    fill_init_rows(c0, s.clause_offset, s.m, rng);
  }
  return esfg_forward_init(tape, tp, cfg, g, std::move(v0), std::move(c0));
}

// Dispatch on config kind; the graphs must have been built for that kind.
template <class Real>
typename Tape<Real>::Id model_forward(Tape<Real>& tape, const TapeParams<Real>& tp,
                                      const ModelConfig& cfg, const Nsfg* nsfg, const Esfg* esfg,
                                      const std::vector<std::uint64_t>& init_seeds) {
  if (cfg.kind == ModelKind::Nsfg) {
    if (!nsfg) throw std::invalid_argument("model_forward: nsfg graph required");
    return nsfg_forward(tape, tp, cfg, *nsfg, init_seeds);
  }
  if (!esfg) throw std::invalid_argument("model_forward: esfg graph required");
  return esfg_forward(tape, tp, cfg, *esfg, init_seeds);
}

// Variable is True iff its logit is >= 0 (sigmoid rounds half up).
template <class Real>
Assignment predict_assignment(const Tensor<Real>& logits, std::int32_t row_begin, std::int32_t n) {
  Assignment a(static_cast<size_t>(n));
  for (std::int32_t i = 0; i < n; ++i)
    a[static_cast<size_t>(i)] = logits.at(row_begin + i, 0) >= Real(0);
  return a;
}

struct Checkpoint {
  ModelConfig config;
  ParamStore<float> params;
};

namespace detail {
inline constexpr const char* kCkptMagic = "msgnn-checkpoint v1";
}

// Text header (magic, kind, d, T, parameter table), then "payload" and the
// raw little-endian float32 data of each parameter in header order.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << detail::kCkptMagic << '\n';
  out << "kind " << model_kind_name(ckpt.config.kind) << '\n';
  out << "d " << ckpt.config.d << '\n';
  out << "T " << ckpt.config.T << '\n';
  out << "params " << ckpt.params.params.size() << '\n';
  for (const auto& [name, t] : ckpt.params.params)
    out << name << ' ' << t.rows << ' ' << t.cols << '\n';
  out << "payload\n";
  for (const auto& [name, t] : ckpt.params.params)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little, "checkpoint reader assumes little-endian");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string line;
  auto next_line = [&](const char* what) {
    if (!std::getline(in, line))
      throw std::runtime_error(std::string("checkpoint truncated in ") + what + ": " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };
  next_line("magic");
  if (line != detail::kCkptMagic)
    throw std::runtime_error("unsupported checkpoint version (want '" +
                             std::string(detail::kCkptMagic) + "'): " + path.string());
  Checkpoint ckpt;
  std::string kind;
  size_t count = 0;
  next_line("header");
  {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key >> kind) || key != "kind") throw std::runtime_error("checkpoint: bad kind line");
  }
  ckpt.config.kind = model_kind_from_name(kind);
  next_line("header");
  if (std::sscanf(line.c_str(), "d %d", &ckpt.config.d) != 1)
    throw std::runtime_error("checkpoint: bad d line");
  next_line("header");
  if (std::sscanf(line.c_str(), "T %d", &ckpt.config.T) != 1)
    throw std::runtime_error("checkpoint: bad T line");
  next_line("header");
  {
    unsigned long long c = 0;
    if (std::sscanf(line.c_str(), "params %llu", &c) != 1)
      throw std::runtime_error("checkpoint: bad params line");
    count = static_cast<size_t>(c);
  }
  std::vector<std::pair<std::string, std::pair<int, int>>> table;
  for (size_t i = 0; i < count; ++i) {
    next_line("parameter table");
    std::istringstream ls(line);
    std::string name;
    int r = 0, c = 0;
    if (!(ls >> name >> r >> c) || r < 0 || c < 0)
      throw std::runtime_error("checkpoint: bad parameter line: " + line);
    table.push_back({name, {r, c}});
  }
  next_line("payload marker");
  if (line != "payload") throw std::runtime_error("checkpoint: missing payload marker");
  for (const auto& [name, shape] : table) {
    Tensor<float> t(shape.first, shape.second);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(float)))
      throw std::runtime_error("checkpoint payload truncated: " + path.string());
    ckpt.params.add(name, std::move(t));
  }
  if (in.get() != std::char_traits<char>::eof())
    throw std::runtime_error("checkpoint has trailing data: " + path.string());
  ckpt.config.validate();
  // The stored parameter set must be exactly what the stored config implies.
  ParamStore<float> expect = init_model_params<float>(ckpt.config, 0);
  if (expect.params.size() != ckpt.params.params.size())
    throw std::runtime_error("checkpoint parameter set does not match its config");
  auto it = ckpt.params.params.begin();
  for (const auto& [name, t] : expect.params) {
    if (it->first != name || it->second.rows != t.rows || it->second.cols != t.cols)
      throw std::runtime_error("checkpoint parameter " + it->first + " does not match its config");
    ++it;
  }
  return ckpt;
}

}  // namespace msgnn
