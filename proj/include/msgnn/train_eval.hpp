#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "msgnn/cnf.hpp"
#include "msgnn/dla.hpp"
#include "msgnn/exact.hpp"
#include "msgnn/factor_graph.hpp"
#include "msgnn/generator.hpp"
#include "msgnn/model.hpp"
#include "msgnn/nn.hpp"
#include "msgnn/rng.hpp"
#include "msgnn/tape.hpp"

namespace msgnn {

// A dataset in memory: manifest, formulas in manifest order, and (optionally)
// the labels, aligned by instance path.
struct LoadedDataset {
  DatasetManifest manifest;
  std::filesystem::path dir;
  std::vector<CnfFormula> formulas;
  std::vector<LabelRecord> labels;  // empty when loaded without labels

  bool has_labels() const { return !labels.empty(); }

  std::vector<int> split_indices(Split s) const {
    std::vector<int> out;
    for (size_t i = 0; i < manifest.entries.size(); ++i)
      if (manifest.entries[i].split == s) out.push_back(static_cast<int>(i));
    return out;
  }

  std::vector<int> all_indices() const {
    std::vector<int> out(manifest.entries.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
    return out;
  }
};

inline LoadedDataset load_dataset(const std::filesystem::path& manifest_path, bool need_labels) {
  LoadedDataset ds;
  ds.manifest = load_manifest(manifest_path);
  ds.dir = manifest_path.parent_path();
  ds.formulas.reserve(ds.manifest.entries.size());
  for (const ManifestEntry& e : ds.manifest.entries)
    ds.formulas.push_back(load_instance(ds.dir, e));
  std::filesystem::path labels_path = ds.dir / "labels.txt";
  if (std::filesystem::exists(labels_path)) {
    std::vector<LabelRecord> raw = load_labels(labels_path);
    std::unordered_map<std::string, size_t> by_path;
    for (size_t i = 0; i < raw.size(); ++i) by_path.emplace(raw[i].path, i);
    ds.labels.reserve(ds.manifest.entries.size());
    for (size_t i = 0; i < ds.manifest.entries.size(); ++i) {
      auto it = by_path.find(ds.manifest.entries[i].path);
      if (it == by_path.end()) {
        if (need_labels)
          throw std::runtime_error("labels.txt has no entry for " + ds.manifest.entries[i].path);
        ds.labels.clear();
        break;
      }
      const LabelRecord& r = raw[it->second];
      if (static_cast<int>(r.witness.size()) != ds.formulas[i].num_vars())
        throw std::runtime_error("label witness length mismatch for " + r.path);
      ds.labels.push_back(r);
    }
  } else if (need_labels) {
    throw std::runtime_error("no labels.txt next to " + manifest_path.string() +
                             " (run the label step first)");
  }
  return ds;
}

// Per-kind graphs built once per dataset.
struct GraphCache {
  ModelKind kind = ModelKind::Nsfg;
  std::vector<Nsfg> nsfg;
  std::vector<Esfg> esfg;

  static GraphCache build(const LoadedDataset& ds, ModelKind kind) {
    GraphCache gc;
    gc.kind = kind;
    if (kind == ModelKind::Nsfg) {
      gc.nsfg.reserve(ds.formulas.size());
      for (const CnfFormula& f : ds.formulas) gc.nsfg.push_back(build_nsfg(f));
    } else {
      gc.esfg.reserve(ds.formulas.size());
      for (const CnfFormula& f : ds.formulas) gc.esfg.push_back(build_esfg(f));
    }
    return gc;
  }

  std::int64_t node_count(const LoadedDataset& ds, int idx) const {
    const CnfFormula& f = ds.formulas[static_cast<size_t>(idx)];
    return kind == ModelKind::Nsfg ? nsfg_node_count(f.num_vars(), f.num_clauses())
                                   : esfg_node_count(f.num_vars(), f.num_clauses());
  }
};

// Greedy packing in the given order: a batch closes when adding the next
// instance would push the total node count (all nodes of the graph variant in
// use) past the cap. An instance larger than the cap gets a batch by itself.
inline std::vector<std::vector<int>> pack_batches(const std::vector<int>& order,
                                                  const LoadedDataset& ds, const GraphCache& gc,
                                                  std::int64_t node_cap) {
  if (node_cap < 1) throw std::invalid_argument("batch node cap must be >= 1");
  std::vector<std::vector<int>> batches;
  std::vector<int> cur;
  std::int64_t cur_nodes = 0;
  for (int idx : order) {
    std::int64_t nodes = gc.node_count(ds, idx);
    if (!cur.empty() && cur_nodes + nodes > node_cap) {
      batches.push_back(std::move(cur));
      cur.clear();
      cur_nodes = 0;
    }
    cur.push_back(idx);
    cur_nodes += nodes;
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

namespace detail {

template <class Real>
struct BatchGraph {
  Nsfg nsfg;
  Esfg esfg;
  ModelKind kind;
  const std::vector<Span>& spans() const { return kind == ModelKind::Nsfg ? nsfg.spans : esfg.spans; }
};

template <class Real>
BatchGraph<Real> merge_batch(const GraphCache& gc, const std::vector<int>& idxs) {
  BatchGraph<Real> bg;
  bg.kind = gc.kind;
  if (gc.kind == ModelKind::Nsfg) {
    std::vector<Nsfg> parts;
    parts.reserve(idxs.size());
    for (int i : idxs) parts.push_back(gc.nsfg[static_cast<size_t>(i)]);
    bg.nsfg = batch_nsfg(parts);
  } else {
    std::vector<Esfg> parts;
    parts.reserve(idxs.size());
    for (int i : idxs) parts.push_back(gc.esfg[static_cast<size_t>(i)]);
    bg.esfg = batch_esfg(parts);
  }
  return bg;
}

}  // namespace detail

// The supervised objective: per-variable binary cross entropy between
// sigmoid(logits) and the witness bits, combined by the given weights into a
// scalar (training weights each variable by 1 / (instances * vars-of-its-
// instance), averaging per instance then per batch).
template <class Real>
typename Tape<Real>::Id model_loss(Tape<Real>& tape, const TapeParams<Real>& tp,
                                   const ModelConfig& cfg, const Nsfg* ng, const Esfg* eg,
                                   const std::vector<std::uint64_t>& seeds, Tensor<Real> targets,
                                   Tensor<Real> weights) {
  auto logits = model_forward(tape, tp, cfg, ng, eg, seeds);
  return tape.weighted_sum(tape.bce_elem(tape.sigmoid(logits), std::move(targets)),
                           std::move(weights));
}

// Aborts training runs that have gone numerically bad; kept separate so the
// guard itself is directly testable.
inline void require_finite_loss(double loss, int epoch, size_t batch) {
  if (!std::isfinite(loss))
    throw std::runtime_error("training loss is not finite (epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(batch) + ")");
}

struct EvalStats {
  double mean_ratio = 0.0;  // satisfied / optimum, averaged over instances
  double mean_gap = 0.0;    // optimum - satisfied, averaged over instances
  double mean_acc = 0.0;    // fraction of variables agreeing with the witness
  int count = 0;
};

struct InstanceEval {
  std::string path;
  int n = 0;
  int m = 0;
  int optimum = 0;
  int satisfied = 0;
  double acc = 0.0;
};

namespace detail {

inline void fold_instance(EvalStats& st, std::vector<InstanceEval>* per, const LoadedDataset& ds,
                          int idx, const Assignment& a) {
  const CnfFormula& f = ds.formulas[static_cast<size_t>(idx)];
  const LabelRecord& lab = ds.labels[static_cast<size_t>(idx)];
  int sat = eval_assignment(f, a).satisfied;
  int agree = 0;
  for (size_t i = 0; i < a.size(); ++i) agree += a[i] == lab.witness[i];
  double acc = static_cast<double>(agree) / static_cast<double>(f.num_vars());
  st.mean_ratio += static_cast<double>(sat) / static_cast<double>(lab.optimum);
  st.mean_gap += static_cast<double>(lab.optimum - sat);
  st.mean_acc += acc;
  st.count += 1;
  if (per)
    per->push_back(InstanceEval{ds.manifest.entries[static_cast<size_t>(idx)].path, f.num_vars(),
                                f.num_clauses(), lab.optimum, sat, acc});
}

inline void finish_stats(EvalStats& st) {
  if (st.count == 0) return;
  st.mean_ratio /= st.count;
  st.mean_gap /= st.count;
  st.mean_acc /= st.count;
}

}  // namespace detail

// Deterministic per-instance init seeds for evaluation: mix_seed(eval_seed,
// manifest index). Runs the model over the given instances in fixed order.
inline EvalStats evaluate_params(const ParamStore<float>& params, const ModelConfig& cfg,
                                 const LoadedDataset& ds, const GraphCache& gc,
                                 const std::vector<int>& indices, std::uint64_t eval_seed,
                                 std::int64_t node_cap,
                                 std::vector<InstanceEval>* per_instance = nullptr) {
  if (!ds.has_labels()) throw std::invalid_argument("evaluate: dataset has no labels");
  EvalStats st;
  for (const std::vector<int>& batch : pack_batches(indices, ds, gc, node_cap)) {
    detail::BatchGraph<float> bg = detail::merge_batch<float>(gc, batch);
    std::vector<std::uint64_t> seeds;
    seeds.reserve(batch.size());
    for (int idx : batch) seeds.push_back(mix_seed(eval_seed, static_cast<std::uint64_t>(idx)));
    Tape<float> tape;
    TapeParams<float> tp = register_params(tape, params);
    auto logits = model_forward(tape, tp, cfg, &bg.nsfg, &bg.esfg, seeds);
    const Tensor<float>& lv = tape.val(logits);
    const std::vector<Span>& spans = bg.spans();
    for (size_t i = 0; i < batch.size(); ++i) {
      Assignment a = predict_assignment(lv, spans[i].var_offset, spans[i].n);
      detail::fold_instance(st, per_instance, ds, batch[i], a);
    }
  }
  detail::finish_stats(st);
  return st;
}

inline EvalStats evaluate_checkpoint(const Checkpoint& ckpt, const LoadedDataset& ds,
                                     const std::vector<int>& indices, std::uint64_t eval_seed,
                                     std::int64_t node_cap,
                                     std::vector<InstanceEval>* per_instance = nullptr) {
  GraphCache gc = GraphCache::build(ds, ckpt.config.kind);
  return evaluate_params(ckpt.params, ckpt.config, ds, gc, indices, eval_seed, node_cap,
                         per_instance);
}

enum class Baseline { Dla, DlaRandomPick, AllTrue, RandomCoin };

inline const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::Dla: return "dla";
    case Baseline::DlaRandomPick: return "dla-random";
    case Baseline::AllTrue: return "all-true";
    case Baseline::RandomCoin: return "random";
  }
  throw std::logic_error("bad baseline");
}

inline Baseline baseline_from_name(const std::string& s) {
  if (s == "dla") return Baseline::Dla;
  if (s == "dla-random") return Baseline::DlaRandomPick;
  if (s == "all-true") return Baseline::AllTrue;
  if (s == "random") return Baseline::RandomCoin;
  throw std::invalid_argument("unknown baseline: " + s + " (want dla|dla-random|all-true|random)");
}

inline EvalStats evaluate_baseline(const LoadedDataset& ds, Baseline b,
                                   const std::vector<int>& indices, std::uint64_t seed,
                                   std::vector<InstanceEval>* per_instance = nullptr) {
  if (!ds.has_labels()) throw std::invalid_argument("evaluate: dataset has no labels");
  EvalStats st;
  for (int idx : indices) {
    const CnfFormula& f = ds.formulas[static_cast<size_t>(idx)];
    Assignment a;
    switch (b) {
      case Baseline::Dla:
        a = run_dla(f, PickPolicy::FirstLiteral);
        break;
      case Baseline::DlaRandomPick:
        a = run_dla(f, PickPolicy::SeededRandom, mix_seed(seed, static_cast<std::uint64_t>(idx)));
        break;
      case Baseline::AllTrue:
        a.assign(static_cast<size_t>(f.num_vars()), true);
        break;
      case Baseline::RandomCoin: {
        SplitMix64 rng(mix_seed(seed, static_cast<std::uint64_t>(idx)));
        a.resize(static_cast<size_t>(f.num_vars()));
        for (size_t i = 0; i < a.size(); ++i) a[i] = rng.next_coin();
        break;
      }
    }
    detail::fold_instance(st, per_instance, ds, idx, a);
  }
  detail::finish_stats(st);
  return st;
}

struct TrainConfig {
  ModelConfig model;
  double lr = 2e-5;
  double weight_decay = 1e-10;
  int epochs = 150;
  std::int64_t batch_node_cap = 4000;
  std::uint64_t seed = 1;
  int threads = 1;  // data preparation only; the math is single-threaded

  void validate() const {
    model.validate();
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_node_cap < 1) throw std::invalid_argument("train: batch node cap must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("train: lr must be > 0");
    if (weight_decay < 0) throw std::invalid_argument("train: weight decay must be >= 0");
  }
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_gap = 0.0;
  double val_ratio = 0.0;
  double val_acc = 0.0;

  std::string to_line() const {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "epoch %d train_loss %.6f val_gap %.6f val_ratio %.6f val_acc %.6f", epoch,
                  train_loss, val_gap, val_ratio, val_acc);
    return buf;
  }
};

struct TrainResult {
  Checkpoint best;
  int best_epoch = 0;  // 1-based epoch whose params are in `best`
  double best_val_ratio = 0.0;
  std::vector<EpochLog> epochs;
  double train_seconds = 0.0;
};

// Trains on the train split, tracks mean approximation ratio on the val split
// after every epoch, and returns the parameters of the best epoch (ties keep
// the earliest). Seed derivation from cfg.seed:
//   params:            mix_seed(seed, 0)
//   epoch shuffle:     mix_seed(mix_seed(seed, 1), epoch)
//   train init seeds:  mix_seed(mix_seed(mix_seed(seed, 2), epoch), index)
//   val init seeds:    mix_seed(mix_seed(seed, 3), index)
// Per-instance losses are variable-means; a batch averages them over its
// instances, and the logged train loss averages over all train instances.
inline TrainResult train_model(const TrainConfig& cfg, const LoadedDataset& ds,
                               std::ostream* live = nullptr) {
  cfg.validate();
  if (!ds.has_labels()) throw std::invalid_argument("train: dataset has no labels");
  std::vector<int> train_idx = ds.split_indices(Split::Train);
  std::vector<int> val_idx = ds.split_indices(Split::Val);
  if (train_idx.empty()) throw std::invalid_argument("train: empty train split");
  if (val_idx.empty()) throw std::invalid_argument("train: empty val split");

  auto t0 = std::chrono::steady_clock::now();
  GraphCache gc = GraphCache::build(ds, cfg.model.kind);
  ParamStore<float> params = init_model_params<float>(cfg.model, mix_seed(cfg.seed, 0));
  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;

  const std::uint64_t shuffle_base = mix_seed(cfg.seed, 1);
  const std::uint64_t init_base = mix_seed(cfg.seed, 2);
  const std::uint64_t val_seed = mix_seed(cfg.seed, 3);

  TrainResult res;
  res.best_val_ratio = -1.0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order = train_idx;
    SplitMix64 shuffle_rng(mix_seed(shuffle_base, static_cast<std::uint64_t>(epoch)));
    for (size_t i = order.size() - 1; i > 0; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[i], order[j]);
    }
    const std::uint64_t epoch_init = mix_seed(init_base, static_cast<std::uint64_t>(epoch));

    double loss_sum = 0.0;
    size_t batch_no = 0;
    for (const std::vector<int>& batch : pack_batches(order, ds, gc, cfg.batch_node_cap)) {
      detail::BatchGraph<float> bg = detail::merge_batch<float>(gc, batch);
      const std::vector<Span>& spans = bg.spans();
      std::vector<std::uint64_t> seeds;
      seeds.reserve(batch.size());
      std::int32_t total_vars = 0;
      for (size_t i = 0; i < batch.size(); ++i) {
        seeds.push_back(mix_seed(epoch_init, static_cast<std::uint64_t>(batch[i])));
        total_vars += spans[i].n;
      }
      Tensor<float> targets(total_vars, 1);
      Tensor<float> weights(total_vars, 1);
      for (size_t i = 0; i < batch.size(); ++i) {
        const LabelRecord& lab = ds.labels[static_cast<size_t>(batch[i])];
        const Span& s = spans[i];
        for (std::int32_t v = 0; v < s.n; ++v) {
          targets.at(s.var_offset + v, 0) = lab.witness[static_cast<size_t>(v)] ? 1.0f : 0.0f;
          weights.at(s.var_offset + v, 0) =
              1.0f / (static_cast<float>(batch.size()) * static_cast<float>(s.n));
        }
      }
      Tape<float> tape;
      TapeParams<float> tp = register_params(tape, params);
      auto loss = model_loss(tape, tp, cfg.model, &bg.nsfg, &bg.esfg, seeds, std::move(targets),
                             std::move(weights));
      double loss_val = static_cast<double>(tape.val(loss).data[0]);
      require_finite_loss(loss_val, epoch, batch_no);
      loss_sum += loss_val * static_cast<double>(batch.size());
      tape.backward(loss);
      adam_step(params, collect_grads(tape, tp), adam);
      ++batch_no;
    }

    EvalStats val = evaluate_params(params, cfg.model, ds, gc, val_idx, val_seed,
                                    cfg.batch_node_cap);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train_idx.size());
    log.val_gap = val.mean_gap;
    log.val_ratio = val.mean_ratio;
    log.val_acc = val.mean_acc;
    res.epochs.push_back(log);
    if (live) (*live) << log.to_line() << std::endl;
    if (val.mean_ratio > res.best_val_ratio) {
      res.best_val_ratio = val.mean_ratio;
      res.best_epoch = epoch;
      res.best.config = cfg.model;
      res.best.params = params;
    }
  }
  res.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// Trains one model per layer count with otherwise identical configuration and
// evaluates each on the test split.
struct SweepRow {
  int T = 0;
  int best_epoch = 0;
  double val_ratio = 0.0;
  double test_ratio = 0.0;
  double test_gap = 0.0;
  double test_acc = 0.0;
};

inline std::vector<SweepRow> layer_sweep(const TrainConfig& base, const LoadedDataset& ds,
                                         const std::vector<int>& t_values,
                                         std::ostream* live = nullptr) {
  if (t_values.empty()) throw std::invalid_argument("sweep: no T values");
  std::vector<SweepRow> rows;
  std::vector<int> test_idx = ds.split_indices(Split::Test);
  for (int t : t_values) {
    TrainConfig cfg = base;
    cfg.model.T = t;
    TrainResult r = train_model(cfg, ds, live);
    GraphCache gc = GraphCache::build(ds, cfg.model.kind);
    EvalStats test = evaluate_params(r.best.params, r.best.config, ds, gc, test_idx,
                                     mix_seed(cfg.seed, 4), cfg.batch_node_cap);
    rows.push_back(SweepRow{t, r.best_epoch, r.best_val_ratio, test.mean_ratio, test.mean_gap,
                            test.mean_acc});
  }
  return rows;
}

// Every checkpoint evaluated on every dataset (same split and eval seed).
struct CrossCell {
  std::string ckpt;
  std::string dataset;
  EvalStats stats;
};

inline std::vector<CrossCell> cross_eval(const std::vector<std::filesystem::path>& ckpt_paths,
                                         const std::vector<std::filesystem::path>& manifest_paths,
                                         Split split, std::uint64_t eval_seed,
                                         std::int64_t node_cap) {
  std::vector<CrossCell> cells;
  for (const auto& mp : manifest_paths) {
    LoadedDataset ds = load_dataset(mp, true);
    std::vector<int> idx = ds.split_indices(split);
    for (const auto& cp : ckpt_paths) {
      Checkpoint ckpt = load_checkpoint(cp);
      EvalStats st = evaluate_checkpoint(ckpt, ds, idx, eval_seed, node_cap);
      cells.push_back(CrossCell{cp.string(), mp.string(), st});
    }
  }
  return cells;
}

}  // namespace msgnn
