#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "msgnn/cnf.hpp"
#include "msgnn/generator.hpp"

namespace msgnn {

struct OptResult {
  int optimum = 0;
  Assignment witness;  // lexicographically smallest optimal assignment
  std::uint64_t nodes_explored = 0;
};

// Brute force over all 2^n assignments. Enumeration is in lexicographic order
// of the assignment vector (variable 1 most significant), and only strict
// improvements are kept, so the reported witness is the lex-smallest optimum.
inline OptResult solve_exhaustive(const CnfFormula& f) {
  const int n = f.num_vars();
  if (n > 26) throw std::invalid_argument("solve_exhaustive: n > 26");
  const int m = f.num_clauses();
  std::vector<std::uint32_t> pos(static_cast<size_t>(m), 0);
  std::vector<std::uint32_t> neg(static_cast<size_t>(m), 0);
  for (int c = 0; c < m; ++c) {
    for (const Lit& l : f.clauses()[static_cast<size_t>(c)].lits()) {
      std::uint32_t bit = 1u << (n - l.var());
      if (l.positive())
        pos[static_cast<size_t>(c)] |= bit;
      else
        neg[static_cast<size_t>(c)] |= bit;
    }
  }
  OptResult r;
  int best = -1;
  std::uint32_t best_x = 0;
  const std::uint32_t limit = 1u << n;
  for (std::uint32_t x = 0; x < limit; ++x) {
    int sat = 0;
    for (int c = 0; c < m; ++c)
      sat += ((pos[static_cast<size_t>(c)] & x) | (neg[static_cast<size_t>(c)] & ~x)) != 0;
    if (sat > best) {
      best = sat;
      best_x = x;
    }
  }
  r.optimum = best;
  r.nodes_explored = limit;
  r.witness.assign(static_cast<size_t>(n), false);
  for (int i = 0; i < n; ++i)
    r.witness[static_cast<size_t>(i)] = ((best_x >> (n - 1 - i)) & 1u) != 0;
  return r;
}

namespace detail {

// Depth-first branch and bound. Phase 1 finds the optimum branching over
// variables in descending occurrence-count order, trying the polarity that
// satisfies more currently unresolved clauses first, pruning subtrees whose
// bound m - falsified cannot beat the incumbent. Phase 2 rebuilds the
// lex-smallest witness: fixing variables 1..n in index order, it keeps False
// whenever some optimal completion exists, which needs one bounded existence
// search per position where the running witness holds True.
class BnbSolver {
 public:
  explicit BnbSolver(const CnfFormula& f)
      : n_(f.num_vars()), m_(f.num_clauses()), occ_(static_cast<size_t>(n_)) {
    for (int c = 0; c < m_; ++c)
      for (const Lit& l : f.clauses()[static_cast<size_t>(c)].lits())
        occ_[static_cast<size_t>(l.var() - 1)].push_back({c, l.positive()});
    order_.resize(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) order_[static_cast<size_t>(i)] = i;
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) {
      return occ_[static_cast<size_t>(a)].size() > occ_[static_cast<size_t>(b)].size();
    });
    cl_sat_.assign(static_cast<size_t>(m_), 0);
    cl_rem_.assign(static_cast<size_t>(m_), 0);
    for (int c = 0; c < m_; ++c)
      cl_rem_[static_cast<size_t>(c)] = f.clauses()[static_cast<size_t>(c)].width();
    value_.assign(static_cast<size_t>(n_), -1);
  }

  OptResult solve() {
    best_ = -1;
    dfs_opt(0);
    fix_lex_witness();
    OptResult r;
    r.optimum = best_;
    r.nodes_explored = nodes_;
    r.witness.assign(static_cast<size_t>(n_), false);
    for (int i = 0; i < n_; ++i) r.witness[static_cast<size_t>(i)] = value_[static_cast<size_t>(i)] == 1;
    return r;
  }

 private:
  struct Undo {
    std::vector<int> sats;  // clauses this assignment satisfied
    std::vector<int> decs;  // clauses whose remaining count it decremented
  };

  void assign(int v, bool val, Undo& u) {
    value_[static_cast<size_t>(v)] = val ? 1 : 0;
    for (const auto& [c, positive] : occ_[static_cast<size_t>(v)]) {
      if (cl_sat_[static_cast<size_t>(c)]) continue;
      if (positive == val) {
        cl_sat_[static_cast<size_t>(c)] = 1;
        ++sat_count_;
        u.sats.push_back(c);
      } else {
        if (--cl_rem_[static_cast<size_t>(c)] == 0) ++fals_count_;
        u.decs.push_back(c);
      }
    }
  }

  void unassign(int v, const Undo& u) {
    value_[static_cast<size_t>(v)] = -1;
    for (int c : u.sats) {
      cl_sat_[static_cast<size_t>(c)] = 0;
      --sat_count_;
    }
    for (int c : u.decs) {
      if (cl_rem_[static_cast<size_t>(c)]++ == 0) --fals_count_;
    }
  }

  // Polarity satisfying more unresolved clauses, True on ties for positive-
  // heavy inputs to reach strong incumbents early.
  bool greedy_value(int v) const {
    int up = 0, un = 0;
    for (const auto& [c, positive] : occ_[static_cast<size_t>(v)]) {
      if (cl_sat_[static_cast<size_t>(c)]) continue;
      if (positive)
        ++up;
      else
        ++un;
    }
    return up >= un;
  }

  void dfs_opt(int pos) {
    ++nodes_;
    if (m_ - fals_count_ <= best_) return;
    if (pos == n_) {
      best_ = sat_count_;
      best_w_.assign(value_.begin(), value_.end());
      return;
    }
    int v = order_[static_cast<size_t>(pos)];
    bool first = greedy_value(v);
    for (bool val : {first, !first}) {
      Undo u;
      assign(v, val, u);
      dfs_opt(pos + 1);
      unassign(v, u);
    }
  }

  // True iff some completion of the current partial assignment reaches
  // best_; on success leaves the witness in found_w_.
  bool dfs_exists(int pos) {
    ++nodes_;
    if (m_ - fals_count_ < best_) return false;
    while (pos < n_ && value_[static_cast<size_t>(order_[static_cast<size_t>(pos)])] != -1) ++pos;
    if (pos == n_) {
      found_w_.assign(value_.begin(), value_.end());
      return true;
    }
    int v = order_[static_cast<size_t>(pos)];
    bool first = greedy_value(v);
    for (bool val : {first, !first}) {
      Undo u;
      assign(v, val, u);
      bool ok = dfs_exists(pos + 1);
      unassign(v, u);
      if (ok) return true;
    }
    return false;
  }

  void fix_lex_witness() {
    std::vector<signed char> w = best_w_;
    for (int i = 0; i < n_; ++i) {
      bool fixed;
      if (w[static_cast<size_t>(i)] == 0) {
        fixed = false;
      } else {
        Undo u;
        assign(i, false, u);
        if (dfs_exists(0)) {
          w = found_w_;
          fixed = false;
        } else {
          fixed = true;
        }
        unassign(i, u);
      }
      assign(i, fixed, perm_);  // kept for the rest of the reconstruction
    }
  }

  int n_, m_;
  std::vector<std::vector<std::pair<int, bool>>> occ_;
  std::vector<int> order_;
  std::vector<unsigned char> cl_sat_;
  std::vector<int> cl_rem_;
  std::vector<signed char> value_;
  int sat_count_ = 0;
  int fals_count_ = 0;
  int best_ = -1;
  std::vector<signed char> best_w_, found_w_;
  std::uint64_t nodes_ = 0;
  Undo perm_;
};

}  // namespace detail

inline OptResult solve_branch_bound(const CnfFormula& f) {
  detail::BnbSolver solver(f);
  OptResult r = solver.solve();
  if (eval_assignment(f, r.witness).satisfied != r.optimum)
    throw std::logic_error("branch and bound produced an inconsistent witness");
  return r;
}

struct LabelRecord {
  std::string path;  // instance path as recorded in the manifest
  int optimum = 0;
  Assignment witness;
};

namespace detail {
inline constexpr const char* kLabelsMagic = "msgnn-labels v1";
}

inline void write_labels(std::ostream& out, const std::vector<LabelRecord>& labels) {
  out << detail::kLabelsMagic << '\n';
  out << "# fields: path optimum witness\n";
  for (const LabelRecord& r : labels)
    out << r.path << ' ' << r.optimum << ' ' << assignment_to_string(r.witness) << '\n';
}

inline std::vector<LabelRecord> parse_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("labels: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != detail::kLabelsMagic)
    throw std::runtime_error("labels: unrecognized first line");
  std::vector<LabelRecord> out;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    LabelRecord r;
    std::string bits;
    if (!(ls >> r.path >> r.optimum >> bits))
      throw std::runtime_error("labels: malformed line: " + line);
    r.witness = assignment_from_string(bits);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<LabelRecord> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels: " + path.string());
  return parse_labels(in);
}

// Solves every instance of a manifest with branch and bound and writes
// labels.txt next to the manifest. Each witness is re-evaluated against its
// formula before being written. Output is identical regardless of `threads`.
inline std::vector<LabelRecord> label_dataset(const std::filesystem::path& manifest_path,
                                              int threads = 1) {
  DatasetManifest man = load_manifest(manifest_path);
  std::filesystem::path dir = manifest_path.parent_path();
  std::vector<LabelRecord> labels(man.entries.size());
  std::atomic<size_t> next{0};
  std::atomic<bool> failed{false};
  std::string fail_msg;
  std::mutex fail_mu;
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= man.entries.size() || failed.load()) return;
      try {
        const ManifestEntry& e = man.entries[i];
        CnfFormula f = load_instance(dir, e);
        OptResult r = solve_branch_bound(f);
        if (eval_assignment(f, r.witness).satisfied != r.optimum)
          throw std::logic_error("label witness check failed for " + e.path);
        labels[i] = LabelRecord{e.path, r.optimum, std::move(r.witness)};
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lk(fail_mu);
        failed.store(true);
        if (fail_msg.empty()) fail_msg = ex.what();
      }
    }
  };
  int nthreads = std::max(1, threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw std::runtime_error("label_dataset: " + fail_msg);
  std::ofstream out(dir / "labels.txt", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write labels in " + dir.string());
  write_labels(out, labels);
  return labels;
}

}  // namespace msgnn
