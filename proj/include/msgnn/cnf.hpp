#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msgnn {

// Literal in DIMACS convention: a nonzero signed integer whose absolute value
// is the 1-based variable index and whose sign is the polarity.
class Lit {
 public:
  explicit Lit(int code) : code_(code) {
    if (code == 0) throw std::invalid_argument("literal code must be nonzero");
  }

  int code() const { return code_; }
  int var() const { return code_ < 0 ? -code_ : code_; }
  bool positive() const { return code_ > 0; }
  Lit negated() const { return Lit(-code_); }

  friend bool operator==(const Lit&, const Lit&) = default;

 private:
  int code_;
};

// Disjunction of literals. Non-empty, and no variable appears twice (neither
// repeated nor in both polarities).
class Clause {
 public:
  explicit Clause(std::vector<Lit> lits) : lits_(std::move(lits)) {
    if (lits_.empty()) throw std::invalid_argument("clause must be non-empty");
    std::vector<int> vars;
    vars.reserve(lits_.size());
    for (const Lit& l : lits_) vars.push_back(l.var());
    std::sort(vars.begin(), vars.end());
    if (std::adjacent_find(vars.begin(), vars.end()) != vars.end())
      throw std::invalid_argument("clause repeats a variable");
  }

  const std::vector<Lit>& lits() const { return lits_; }
  int width() const { return static_cast<int>(lits_.size()); }

  friend bool operator==(const Clause&, const Clause&) = default;

 private:
  std::vector<Lit> lits_;
};

// CNF formula over variables 1..num_vars. Clause order is meaningful: it is
// preserved by parsing/serialization and fixes graph construction order.
class CnfFormula {
 public:
  CnfFormula(int num_vars, std::vector<Clause> clauses)
      : num_vars_(num_vars), clauses_(std::move(clauses)) {
    if (num_vars < 1) throw std::invalid_argument("num_vars must be >= 1");
    for (const Clause& c : clauses_)
      for (const Lit& l : c.lits())
        if (l.var() > num_vars_)
          throw std::invalid_argument("literal references variable beyond num_vars");
  }

  int num_vars() const { return num_vars_; }
  int num_clauses() const { return static_cast<int>(clauses_.size()); }
  const std::vector<Clause>& clauses() const { return clauses_; }

  // Clause width if every clause has the same one, otherwise empty.
  std::optional<int> uniform_width() const {
    if (clauses_.empty()) return std::nullopt;
    int k = clauses_.front().width();
    for (const Clause& c : clauses_)
      if (c.width() != k) return std::nullopt;
    return k;
  }

  friend bool operator==(const CnfFormula&, const CnfFormula&) = default;

 private:
  int num_vars_;
  std::vector<Clause> clauses_;
};

// Truth assignment; index i holds the value of variable i+1.
using Assignment = std::vector<bool>;

struct EvalResult {
  int satisfied = 0;
  int total = 0;
};

inline EvalResult eval_assignment(const CnfFormula& f, const Assignment& a) {
  if (static_cast<int>(a.size()) != f.num_vars())
    throw std::invalid_argument("assignment size does not match num_vars");
  EvalResult r;
  r.total = f.num_clauses();
  for (const Clause& c : f.clauses()) {
    for (const Lit& l : c.lits()) {
      if (a[l.var() - 1] == l.positive()) {
        ++r.satisfied;
        break;
      }
    }
  }
  return r;
}

inline std::string assignment_to_string(const Assignment& a) {
  std::string s;
  s.reserve(a.size());
  for (bool b : a) s.push_back(b ? '1' : '0');
  return s;
}

inline Assignment assignment_from_string(std::string_view s) {
  Assignment a;
  a.reserve(s.size());
  for (char c : s) {
    if (c == '0')
      a.push_back(false);
    else if (c == '1')
      a.push_back(true);
    else
      throw std::invalid_argument("assignment string must be over {0,1}");
  }
  return a;
}

class DimacsError : public std::runtime_error {
 public:
  explicit DimacsError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

// Strict DIMACS CNF reader. Accepts comment lines anywhere, requires exactly
// one "p cnf <vars> <clauses>" header before any clause data, allows clauses
// to span lines, and rejects: missing/duplicate headers, literals naming
// variable 0 or a variable beyond the declared count, clause count mismatch,
// empty clauses, and a variable repeated within one clause.
inline CnfFormula parse_dimacs(std::istream& in) {
  int num_vars = -1;
  long declared_clauses = -1;
  bool seen_header = false;
  std::vector<Clause> clauses;
  std::vector<Lit> current;
  std::string line;
  long line_no = 0;

  auto fail = [&](const std::string& what) {
    throw DimacsError("dimacs line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::is_blank(line)) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "c") continue;
    if (!tok.empty() && tok[0] == 'c' && tok.size() > 1) continue;
    if (tok == "p") {
      if (seen_header) fail("duplicate header");
      std::string fmt;
      ls >> fmt >> num_vars >> declared_clauses;
      if (ls.fail() || fmt != "cnf") fail("malformed header, expected 'p cnf <vars> <clauses>'");
      std::string rest;
      if (ls >> rest) fail("trailing tokens after header");
      if (num_vars < 1) fail("header declares no variables");
      if (declared_clauses < 0) fail("header declares negative clause count");
      seen_header = true;
      continue;
    }
    if (!seen_header) fail("clause data before header");
    // Re-scan the whole line as integers.
    std::istringstream is(line);
    long v;
    while (is >> v) {
      if (v == 0) {
        if (current.empty()) fail("empty clause");
        clauses.emplace_back(std::move(current));
        current.clear();
        continue;
      }
      long mag = v < 0 ? -v : v;
      if (mag > num_vars) fail("literal references variable beyond declared count");
      for (const Lit& l : current)
        if (l.var() == mag) fail("variable repeated within a clause");
      current.emplace_back(static_cast<int>(v));
    }
    if (!is.eof()) fail("unexpected token in clause data");
  }
  if (!seen_header) throw DimacsError("dimacs: missing header");
  if (!current.empty()) throw DimacsError("dimacs: unterminated clause at end of input");
  if (static_cast<long>(clauses.size()) != declared_clauses)
    throw DimacsError("dimacs: header declares " + std::to_string(declared_clauses) +
                      " clauses but file contains " + std::to_string(clauses.size()));
  return CnfFormula(num_vars, std::move(clauses));
}

inline CnfFormula parse_dimacs(const std::string& text) {
  std::istringstream in(text);
  return parse_dimacs(in);
}

inline void write_dimacs(std::ostream& out, const CnfFormula& f) {
  out << "p cnf " << f.num_vars() << ' ' << f.num_clauses() << '\n';
  for (const Clause& c : f.clauses()) {
    for (const Lit& l : c.lits()) out << l.code() << ' ';
    out << "0\n";
  }
}

inline std::string write_dimacs(const CnfFormula& f) {
  std::ostringstream out;
  write_dimacs(out, f);
  return out.str();
}

}  // namespace msgnn
