#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "msgnn/cnf.hpp"

using namespace msgnn;

namespace {
// Three clauses over three variables: (x1 v x2 v x3), (x1 v -x3), (-x1 v -x2 v -x3).
const char* kExample = "p cnf 3 3\n1 2 3 0\n1 -3 0\n-1 -2 -3 0\n";
}  // namespace

TEST_CASE("literals expose variable, polarity, and negation") {
  Lit a(3), b(-5);
  CHECK(a.var() == 3);
  CHECK(a.positive());
  CHECK(b.var() == 5);
  CHECK_FALSE(b.positive());
  CHECK(a.negated() == Lit(-3));
  CHECK(b.negated().negated() == b);
  CHECK_THROWS_AS(Lit(0), std::invalid_argument);
}

TEST_CASE("clauses reject duplicates and emptiness") {
  CHECK_THROWS_AS(Clause({}), std::invalid_argument);
  CHECK_THROWS_AS(Clause({Lit(1), Lit(1)}), std::invalid_argument);
  CHECK_THROWS_AS(Clause({Lit(1), Lit(-1)}), std::invalid_argument);
  CHECK(Clause({Lit(1), Lit(-2)}).width() == 2);
}

TEST_CASE("formula validates variable range and reports uniform width") {
  CHECK_THROWS_AS(CnfFormula(0, {}), std::invalid_argument);
  CHECK_THROWS_AS(CnfFormula(2, {Clause({Lit(3)})}), std::invalid_argument);
  CnfFormula f = parse_dimacs(kExample);
  CHECK(f.num_vars() == 3);
  CHECK(f.num_clauses() == 3);
  CHECK_FALSE(f.uniform_width().has_value());
  CnfFormula u = parse_dimacs("p cnf 2 2\n1 2 0\n-1 -2 0\n");
  REQUIRE(u.uniform_width().has_value());
  CHECK(*u.uniform_width() == 2);
}

TEST_CASE("assignment evaluation counts satisfied clauses") {
  CnfFormula f = parse_dimacs(kExample);
  CHECK(eval_assignment(f, {true, false, false}).satisfied == 3);
  CHECK(eval_assignment(f, {true, true, true}).satisfied == 2);
  CHECK(eval_assignment(f, {false, false, true}).satisfied == 2);
  CHECK(eval_assignment(f, {true, false, false}).total == 3);
  CHECK_THROWS_AS(eval_assignment(f, {true, false}), std::invalid_argument);
}

TEST_CASE("assignment strings round-trip") {
  Assignment a{true, false, true, true};
  CHECK(assignment_to_string(a) == "1011");
  CHECK(assignment_from_string("1011") == a);
  CHECK_THROWS_AS(assignment_from_string("10x1"), std::invalid_argument);
}

TEST_CASE("dimacs parsing tolerates comments, blank lines, CRLF, and split clauses") {
  std::string text =
      "c a comment\n"
      "\n"
      "p cnf 3 2\r\n"
      "c mid comment\n"
      "1 -2\n"
      "3 0\n"
      "  -1 2 0\n";
  CnfFormula f = parse_dimacs(text);
  REQUIRE(f.num_clauses() == 2);
  CHECK(f.clauses()[0] == Clause({Lit(1), Lit(-2), Lit(3)}));
  CHECK(f.clauses()[1] == Clause({Lit(-1), Lit(2)}));
}

TEST_CASE("dimacs parsing rejects malformed input") {
  CHECK_THROWS_AS(parse_dimacs(""), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("1 2 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p dnf 2 1\n1 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1 extra\n1 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\np cnf 2 1\n1 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 0 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n3 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 1 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 -1 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 x 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 2\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 2\n1 0\n"), DimacsError);
  CHECK_THROWS_AS(parse_dimacs("p cnf 2 1\n1 0\n2 0\n"), DimacsError);
}

TEST_CASE("dimacs writing round-trips and is byte-stable") {
  CnfFormula f = parse_dimacs(kExample);
  std::string text = write_dimacs(f);
  CHECK(text == kExample);
  CHECK(parse_dimacs(text) == f);
}
