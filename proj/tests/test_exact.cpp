#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "msgnn/exact.hpp"
#include "msgnn/generator.hpp"

using namespace msgnn;
namespace fs = std::filesystem;

namespace {

const char* kExample = "p cnf 3 3\n1 2 3 0\n1 -3 0\n-1 -2 -3 0\n";

// Independent reference: walk all assignments, count satisfied clauses from
// the raw literal codes, keep the first maximizer in lexicographic order.
OptResult reference_solve(const CnfFormula& f) {
  const int n = f.num_vars();
  OptResult best;
  best.optimum = -1;
  Assignment a(static_cast<size_t>(n), false);
  for (std::uint64_t x = 0; x < (1ull << n); ++x) {
    for (int i = 0; i < n; ++i)
      a[static_cast<size_t>(i)] = ((x >> (n - 1 - i)) & 1u) != 0;
    int sat = 0;
    for (const Clause& c : f.clauses()) {
      bool ok = false;
      for (const Lit& l : c.lits())
        ok = ok || (a[static_cast<size_t>(l.var() - 1)] == l.positive());
      sat += ok;
    }
    if (sat > best.optimum) {
      best.optimum = sat;
      best.witness = a;
    }
  }
  return best;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("example formula optimum and lex-smallest witness") {
  CnfFormula f = parse_dimacs(kExample);
  OptResult ref = reference_solve(f);
  CHECK(ref.optimum == 3);
  CHECK(assignment_to_string(ref.witness) == "010");
  for (const OptResult& r : {solve_exhaustive(f), solve_branch_bound(f)}) {
    CHECK(r.optimum == 3);
    CHECK(assignment_to_string(r.witness) == "010");
  }
}

TEST_CASE("exhaustive and branch-and-bound agree with the reference solver") {
  SplitMix64 rng(90210);
  for (int i = 0; i < 150; ++i) {
    int k = 1 + static_cast<int>(rng.next_below(3));
    int n = k + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(11 - k)));
    int m = 1 + static_cast<int>(rng.next_below(50));
    CnfFormula f = generate_instance(GenSpec{k, n, m, rng.next()});
    OptResult ref = reference_solve(f);
    OptResult ex = solve_exhaustive(f);
    OptResult bb = solve_branch_bound(f);
    REQUIRE(ex.optimum == ref.optimum);
    REQUIRE(bb.optimum == ref.optimum);
    REQUIRE(ex.witness == ref.witness);
    REQUIRE(bb.witness == ref.witness);
    REQUIRE(eval_assignment(f, ex.witness).satisfied == ref.optimum);
    REQUIRE(eval_assignment(f, bb.witness).satisfied == ref.optimum);
  }
}

TEST_CASE("branch and bound prunes an easy instance far below full enumeration") {
  // Eighteen unit clauses, one per variable: the first descent already
  // satisfies everything, so the incumbent bound closes every other branch.
  std::ostringstream dimacs;
  dimacs << "p cnf 18 18\n";
  for (int v = 1; v <= 18; ++v) dimacs << v << " 0\n";
  CnfFormula f = parse_dimacs(dimacs.str());
  OptResult ex = solve_exhaustive(f);
  OptResult bb = solve_branch_bound(f);
  CHECK(ex.optimum == 18);
  CHECK(bb.optimum == 18);
  CHECK(bb.witness == Assignment(18, true));
  CHECK(ex.nodes_explored == (1ull << 18));
  CHECK(bb.nodes_explored < ex.nodes_explored / 100);
}

TEST_CASE("exhaustive solver rejects more than 26 variables") {
  CnfFormula f = generate_instance(GenSpec{2, 27, 5, 1});
  CHECK_THROWS_AS(solve_exhaustive(f), std::invalid_argument);
  OptResult r = solve_branch_bound(f);
  CHECK(r.optimum >= 3);
  CHECK(r.optimum <= 5);
  CHECK(eval_assignment(f, r.witness).satisfied == r.optimum);
}

TEST_CASE("labels file round-trips and rejects bad input") {
  std::vector<LabelRecord> recs{{"a.cnf", 3, Assignment{false, true, false}},
                                {"b.cnf", 7, Assignment{true, true}}};
  std::ostringstream out;
  write_labels(out, recs);
  std::istringstream in(out.str());
  std::vector<LabelRecord> back = parse_labels(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0].path == "a.cnf");
  CHECK(back[0].optimum == 3);
  CHECK(back[0].witness == recs[0].witness);
  CHECK(back[1].path == "b.cnf");
  CHECK(back[1].witness == recs[1].witness);

  std::istringstream empty("");
  CHECK_THROWS_AS(parse_labels(empty), std::runtime_error);
  std::istringstream magic("labels v0\n");
  CHECK_THROWS_AS(parse_labels(magic), std::runtime_error);
  std::istringstream truncated(std::string(detail::kLabelsMagic) + "\na.cnf 3\n");
  CHECK_THROWS_AS(parse_labels(truncated), std::runtime_error);
}

TEST_CASE("labelling a dataset is reproducible byte for byte") {
  fs::path dir = fs::temp_directory_path() / "msgnn_test_labels";
  fs::remove_all(dir);
  generate_dataset(GenSpec{2, 10, 30, 4242}, 6, dir);
  fs::path manifest = dir / "manifest.txt";
  fs::path labels = dir / "labels.txt";

  std::vector<LabelRecord> first = label_dataset(manifest);
  std::string bytes1 = file_bytes(labels);
  fs::remove(labels);
  std::vector<LabelRecord> second = label_dataset(manifest, 2);
  std::string bytes2 = file_bytes(labels);
  CHECK(bytes1 == bytes2);

  REQUIRE(first.size() == 6);
  DatasetManifest man = load_manifest(manifest);
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].path == man.entries[i].path);
    CnfFormula f = load_instance(dir, man.entries[i]);
    CHECK(eval_assignment(f, first[i].witness).satisfied == first[i].optimum);
    CHECK(first[i].optimum == solve_exhaustive(f).optimum);
  }
  std::vector<LabelRecord> loaded = load_labels(labels);
  REQUIRE(loaded.size() == second.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].path == second[i].path);
    CHECK(loaded[i].optimum == second[i].optimum);
    CHECK(loaded[i].witness == second[i].witness);
  }
  fs::remove_all(dir);
}
