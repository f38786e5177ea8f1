#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <utility>

#include "msgnn/factor_graph.hpp"
#include "msgnn/generator.hpp"

using namespace msgnn;

namespace {
const char* kExample = "p cnf 3 3\n1 2 3 0\n1 -3 0\n-1 -2 -3 0\n";

std::vector<std::int32_t> row(const Csr& c, int r) {
  return {c.col.begin() + c.row_begin(r), c.col.begin() + c.row_end(r)};
}
}  // namespace

TEST_CASE("literal node ids pair polarities of one variable") {
  CHECK(lit_node_id(Lit(1)) == 0);
  CHECK(lit_node_id(Lit(-1)) == 1);
  CHECK(lit_node_id(Lit(3)) == 4);
  CHECK(lit_node_id(Lit(-3)) == 5);
  for (std::int32_t id = 0; id < 10; ++id) CHECK(Nsfg::flip(Nsfg::flip(id)) == id);
  CHECK(Nsfg::flip(0) == 1);
  CHECK(Nsfg::flip(7) == 6);
}

TEST_CASE("literal graph of the example formula") {
  Nsfg g = build_nsfg(parse_dimacs(kExample));
  CHECK(g.num_vars == 3);
  CHECK(g.num_clauses == 3);
  CHECK(g.num_lit_nodes() == 6);
  CHECK(g.by_clause.num_edges() == 8);
  CHECK(g.by_lit.num_edges() == 8);

  CHECK(g.by_clause.num_rows == 3);
  CHECK(g.by_clause.num_sources == 6);
  CHECK(g.by_clause.row_ptr == std::vector<std::int32_t>{0, 3, 5, 8});
  CHECK(row(g.by_clause, 0) == std::vector<std::int32_t>{0, 2, 4});
  CHECK(row(g.by_clause, 1) == std::vector<std::int32_t>{0, 5});
  CHECK(row(g.by_clause, 2) == std::vector<std::int32_t>{1, 3, 5});

  CHECK(g.by_lit.num_rows == 6);
  CHECK(g.by_lit.num_sources == 3);
  CHECK(g.by_lit.row_ptr == std::vector<std::int32_t>{0, 2, 3, 4, 5, 6, 8});
  CHECK(row(g.by_lit, 0) == std::vector<std::int32_t>{0, 1});
  CHECK(row(g.by_lit, 1) == std::vector<std::int32_t>{2});
  CHECK(row(g.by_lit, 2) == std::vector<std::int32_t>{0});
  CHECK(row(g.by_lit, 3) == std::vector<std::int32_t>{2});
  CHECK(row(g.by_lit, 4) == std::vector<std::int32_t>{0});
  CHECK(row(g.by_lit, 5) == std::vector<std::int32_t>{1, 2});

  REQUIRE(g.spans.size() == 1);
  CHECK(g.spans[0].var_offset == 0);
  CHECK(g.spans[0].clause_offset == 0);
  CHECK(g.spans[0].n == 3);
  CHECK(g.spans[0].m == 3);
}

TEST_CASE("polarity-split graph of the example formula") {
  Esfg g = build_esfg(parse_dimacs(kExample));
  CHECK(g.num_vars == 3);
  CHECK(g.num_clauses == 3);
  CHECK(g.pos_by_clause.num_edges() == 4);
  CHECK(g.neg_by_clause.num_edges() == 4);
  CHECK(g.pos_by_clause.num_edges() + g.neg_by_clause.num_edges() == 8);
  CHECK(g.pos_by_var.num_edges() == 4);
  CHECK(g.neg_by_var.num_edges() == 4);

  CHECK(row(g.pos_by_clause, 0) == std::vector<std::int32_t>{0, 1, 2});
  CHECK(row(g.pos_by_clause, 1) == std::vector<std::int32_t>{0});
  CHECK(row(g.pos_by_clause, 2).empty());
  CHECK(row(g.neg_by_clause, 0).empty());
  CHECK(row(g.neg_by_clause, 1) == std::vector<std::int32_t>{2});
  CHECK(row(g.neg_by_clause, 2) == std::vector<std::int32_t>{0, 1, 2});

  CHECK(row(g.pos_by_var, 0) == std::vector<std::int32_t>{0, 1});
  CHECK(row(g.pos_by_var, 1) == std::vector<std::int32_t>{0});
  CHECK(row(g.pos_by_var, 2) == std::vector<std::int32_t>{0});
  CHECK(row(g.neg_by_var, 0) == std::vector<std::int32_t>{2});
  CHECK(row(g.neg_by_var, 1) == std::vector<std::int32_t>{2});
  CHECK(row(g.neg_by_var, 2) == std::vector<std::int32_t>{1, 2});
}

TEST_CASE("both directions describe the same edge multiset") {
  CnfFormula f = generate_instance(GenSpec{3, 20, 90, 7});
  Nsfg g = build_nsfg(f);
  std::vector<std::pair<std::int32_t, std::int32_t>> a, b;
  for (int c = 0; c < g.num_clauses; ++c)
    for (int e = g.by_clause.row_begin(c); e < g.by_clause.row_end(c); ++e)
      a.push_back({c, g.by_clause.col[static_cast<size_t>(e)]});
  for (int l = 0; l < g.num_lit_nodes(); ++l)
    for (int e = g.by_lit.row_begin(l); e < g.by_lit.row_end(l); ++e)
      b.push_back({g.by_lit.col[static_cast<size_t>(e)], l});
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);

  Esfg h = build_esfg(f);
  CHECK(h.pos_by_clause.num_edges() + h.neg_by_clause.num_edges() == g.by_clause.num_edges());
  CHECK(h.pos_by_var.num_edges() == h.pos_by_clause.num_edges());
  CHECK(h.neg_by_var.num_edges() == h.neg_by_clause.num_edges());
}

TEST_CASE("a variable absent from every clause gets empty rows") {
  CnfFormula f = parse_dimacs("p cnf 3 1\n1 3 0\n");
  Nsfg g = build_nsfg(f);
  CHECK(row(g.by_lit, 2).empty());
  CHECK(row(g.by_lit, 3).empty());
  Esfg h = build_esfg(f);
  CHECK(row(h.pos_by_var, 1).empty());
  CHECK(row(h.neg_by_var, 1).empty());
}

TEST_CASE("batching two copies shifts ids by the preceding counts") {
  CnfFormula f = parse_dimacs(kExample);
  Nsfg one = build_nsfg(f);
  Nsfg two = batch_nsfg({one, one});
  CHECK(two.num_vars == 6);
  CHECK(two.num_clauses == 6);
  CHECK(two.num_lit_nodes() == 12);
  CHECK(two.by_clause.num_edges() == 16);
  REQUIRE(two.spans.size() == 2);
  CHECK(two.spans[0].var_offset == 0);
  CHECK(two.spans[1].var_offset == 3);
  CHECK(two.spans[1].clause_offset == 3);
  CHECK(two.spans[1].n == 3);
  CHECK(two.spans[1].m == 3);
  CHECK(row(two.by_clause, 3) == std::vector<std::int32_t>{6, 8, 10});
  CHECK(row(two.by_clause, 4) == std::vector<std::int32_t>{6, 11});
  CHECK(row(two.by_lit, 6) == std::vector<std::int32_t>{3, 4});
  for (int r = 0; r < 3; ++r) CHECK(row(two.by_clause, r) == row(one.by_clause, r));

  Esfg eone = build_esfg(f);
  Esfg etwo = batch_esfg({eone, eone});
  CHECK(etwo.num_vars == 6);
  CHECK(etwo.pos_by_clause.num_edges() == 8);
  CHECK(row(etwo.pos_by_clause, 3) == std::vector<std::int32_t>{3, 4, 5});
  CHECK(row(etwo.neg_by_var, 3) == std::vector<std::int32_t>{5});
  CHECK(etwo.spans[1].var_offset == 3);
}

TEST_CASE("batching rejects empty and nested batches") {
  CHECK_THROWS_AS(batch_nsfg({}), std::invalid_argument);
  CHECK_THROWS_AS(batch_esfg({}), std::invalid_argument);
  Nsfg one = build_nsfg(parse_dimacs(kExample));
  Nsfg two = batch_nsfg({one, one});
  CHECK_THROWS_AS(batch_nsfg({two}), std::invalid_argument);
}

TEST_CASE("node counts for the batch cap") {
  CHECK(nsfg_node_count(3, 3) == 9);
  CHECK(esfg_node_count(3, 3) == 6);
  CHECK(nsfg_node_count(20, 120) == 160);
  CHECK(esfg_node_count(20, 120) == 140);
}
