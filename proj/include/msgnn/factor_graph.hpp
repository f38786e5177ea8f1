#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "msgnn/cnf.hpp"

namespace msgnn {

// Adjacency grouped by aggregation target: row r sums over source ids
// col[row_ptr[r] .. row_ptr[r+1]). Within a row, sources keep clause-major
// construction order, so reductions have one fixed order.
struct Csr {
  std::int32_t num_rows = 0;
  std::int32_t num_sources = 0;
  std::vector<std::int32_t> row_ptr;
  std::vector<std::int32_t> col;

  std::int32_t num_edges() const { return static_cast<std::int32_t>(col.size()); }
  std::int32_t row_begin(int r) const { return row_ptr[static_cast<size_t>(r)]; }
  std::int32_t row_end(int r) const { return row_ptr[static_cast<size_t>(r) + 1]; }
};

namespace detail {

// Stable counting sort of (row, source) pairs given in source-precedence
// order; keeps input order within each row.
inline Csr csr_from_pairs(int num_rows, int num_sources,
                          const std::vector<std::pair<std::int32_t, std::int32_t>>& edges) {
  Csr c;
  c.num_rows = num_rows;
  c.num_sources = num_sources;
  c.row_ptr.assign(static_cast<size_t>(num_rows) + 1, 0);
  for (const auto& [row, src] : edges) ++c.row_ptr[static_cast<size_t>(row) + 1];
  for (int r = 0; r < num_rows; ++r)
    c.row_ptr[static_cast<size_t>(r) + 1] += c.row_ptr[static_cast<size_t>(r)];
  c.col.resize(edges.size());
  std::vector<std::int32_t> fill(c.row_ptr.begin(), c.row_ptr.end() - 1);
  for (const auto& [row, src] : edges) c.col[static_cast<size_t>(fill[static_cast<size_t>(row)]++)] = src;
  return c;
}

}  // namespace detail

// Offsets of one instance inside a batched graph. Literal node offset for the
// node-splitting graph is 2 * var_offset.
struct Span {
  std::int32_t var_offset = 0;
  std::int32_t clause_offset = 0;
  std::int32_t n = 0;
  std::int32_t m = 0;
};

// Node-splitting factor graph: one node per literal (2n of them) and one per
// clause, an edge wherever a literal occurs in a clause. Literal node 2i is
// the positive literal of variable i+1, node 2i+1 its negation, so negation
// is id XOR 1. A batch is the disjoint union of instance graphs; spans hold
// per-instance offsets in batch order.
struct Nsfg {
  std::int32_t num_vars = 0;     // summed over the batch
  std::int32_t num_clauses = 0;  // summed over the batch
  Csr by_clause;                 // rows: clauses, sources: literal nodes
  Csr by_lit;                    // rows: literal nodes, sources: clauses
  std::vector<Span> spans;

  std::int32_t num_lit_nodes() const { return 2 * num_vars; }
  static std::int32_t flip(std::int32_t lit_node) { return lit_node ^ 1; }
};

inline std::int32_t lit_node_id(const Lit& l) {
  return 2 * (l.var() - 1) + (l.positive() ? 0 : 1);
}

inline Nsfg build_nsfg(const CnfFormula& f) {
  Nsfg g;
  g.num_vars = f.num_vars();
  g.num_clauses = f.num_clauses();
  g.spans = {Span{0, 0, g.num_vars, g.num_clauses}};
  std::vector<std::pair<std::int32_t, std::int32_t>> to_clause;  // (clause, lit node)
  std::vector<std::pair<std::int32_t, std::int32_t>> to_lit;     // (lit node, clause)
  for (std::int32_t c = 0; c < g.num_clauses; ++c) {
    for (const Lit& l : f.clauses()[static_cast<size_t>(c)].lits()) {
      std::int32_t id = lit_node_id(l);
      to_clause.push_back({c, id});
      to_lit.push_back({id, c});
    }
  }
  g.by_clause = detail::csr_from_pairs(g.num_clauses, g.num_lit_nodes(), to_clause);
  g.by_lit = detail::csr_from_pairs(g.num_lit_nodes(), g.num_clauses, to_lit);
  return g;
}

// Edge-splitting factor graph: one node per variable and one per clause, with
// the edge set partitioned by occurrence polarity. Each polarity keeps both
// aggregation directions.
struct Esfg {
  std::int32_t num_vars = 0;
  std::int32_t num_clauses = 0;
  Csr pos_by_clause;  // rows: clauses, sources: variables (positive occurrences)
  Csr pos_by_var;     // rows: variables, sources: clauses (positive occurrences)
  Csr neg_by_clause;
  Csr neg_by_var;
  std::vector<Span> spans;
};

inline Esfg build_esfg(const CnfFormula& f) {
  Esfg g;
  g.num_vars = f.num_vars();
  g.num_clauses = f.num_clauses();
  g.spans = {Span{0, 0, g.num_vars, g.num_clauses}};
  std::vector<std::pair<std::int32_t, std::int32_t>> pc, pv, nc, nv;
  for (std::int32_t c = 0; c < g.num_clauses; ++c) {
    for (const Lit& l : f.clauses()[static_cast<size_t>(c)].lits()) {
      std::int32_t v = l.var() - 1;
      if (l.positive()) {
        pc.push_back({c, v});
        pv.push_back({v, c});
      } else {
        nc.push_back({c, v});
        nv.push_back({v, c});
      }
    }
  }
  g.pos_by_clause = detail::csr_from_pairs(g.num_clauses, g.num_vars, pc);
  g.pos_by_var = detail::csr_from_pairs(g.num_vars, g.num_clauses, pv);
  g.neg_by_clause = detail::csr_from_pairs(g.num_clauses, g.num_vars, nc);
  g.neg_by_var = detail::csr_from_pairs(g.num_vars, g.num_clauses, nv);
  return g;
}

namespace detail {

inline Csr merge_csr(const std::vector<const Csr*>& parts,
                     const std::vector<std::int32_t>& col_offsets) {
  Csr out;
  out.row_ptr.push_back(0);
  for (size_t i = 0; i < parts.size(); ++i) {
    const Csr& p = *parts[i];
    std::int32_t base = out.row_ptr.back();
    for (size_t r = 1; r < p.row_ptr.size(); ++r)
      out.row_ptr.push_back(base + p.row_ptr[r]);
    for (std::int32_t s : p.col) out.col.push_back(s + col_offsets[i]);
    out.num_rows += p.num_rows;
    out.num_sources += p.num_sources;
  }
  return out;
}

}  // namespace detail

// Disjoint union; instance i's variables and clauses are shifted by the sums
// of the preceding instances' counts.
inline Nsfg batch_nsfg(const std::vector<Nsfg>& parts) {
  if (parts.empty()) throw std::invalid_argument("batch_nsfg: empty batch");
  Nsfg out;
  std::vector<const Csr*> bc, bl;
  std::vector<std::int32_t> lit_off, clause_off;
  for (const Nsfg& p : parts) {
    if (p.spans.size() != 1) throw std::invalid_argument("batch_nsfg: parts must be single graphs");
    out.spans.push_back(Span{out.num_vars, out.num_clauses, p.num_vars, p.num_clauses});
    bc.push_back(&p.by_clause);
    bl.push_back(&p.by_lit);
    lit_off.push_back(2 * out.num_vars);
    clause_off.push_back(out.num_clauses);
    out.num_vars += p.num_vars;
    out.num_clauses += p.num_clauses;
  }
  out.by_clause = detail::merge_csr(bc, lit_off);
  out.by_lit = detail::merge_csr(bl, clause_off);
  return out;
}

inline Esfg batch_esfg(const std::vector<Esfg>& parts) {
  if (parts.empty()) throw std::invalid_argument("batch_esfg: empty batch");
  Esfg out;
  std::vector<const Csr*> pc, pv, nc, nv;
  std::vector<std::int32_t> var_off, clause_off;
  for (const Esfg& p : parts) {
    if (p.spans.size() != 1) throw std::invalid_argument("batch_esfg: parts must be single graphs");
    out.spans.push_back(Span{out.num_vars, out.num_clauses, p.num_vars, p.num_clauses});
    pc.push_back(&p.pos_by_clause);
    pv.push_back(&p.pos_by_var);
    nc.push_back(&p.neg_by_clause);
    nv.push_back(&p.neg_by_var);
    var_off.push_back(out.num_vars);
    clause_off.push_back(out.num_clauses);
    out.num_vars += p.num_vars;
    out.num_clauses += p.num_clauses;
  }
  out.pos_by_clause = detail::merge_csr(pc, var_off);
  out.pos_by_var = detail::merge_csr(pv, clause_off);
  out.neg_by_clause = detail::merge_csr(nc, var_off);
  out.neg_by_var = detail::merge_csr(nv, clause_off);
  return out;
}

// Node count used by the batch-size cap: every node of every instance in the
// batch, literals (or variables) plus clauses.
inline std::int64_t nsfg_node_count(std::int32_t n, std::int32_t m) {
  return 2 * static_cast<std::int64_t>(n) + m;
}

inline std::int64_t esfg_node_count(std::int32_t n, std::int32_t m) {
  return static_cast<std::int64_t>(n) + m;
}

}  // namespace msgnn
