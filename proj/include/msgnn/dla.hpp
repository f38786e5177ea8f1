#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msgnn/cnf.hpp"
#include "msgnn/rng.hpp"

namespace msgnn {

// How a clause picks the one literal whose counter it increments.
enum class PickPolicy { FirstLiteral, SeededRandom };

inline const char* pick_policy_name(PickPolicy p) {
  return p == PickPolicy::FirstLiteral ? "first" : "random";
}

inline PickPolicy pick_policy_from_name(const std::string& s) {
  if (s == "first") return PickPolicy::FirstLiteral;
  if (s == "random") return PickPolicy::SeededRandom;
  throw std::invalid_argument("unknown pick policy: " + s + " (want first|random)");
}

// Per-literal vote counters W. pos[i] / neg[i] belong to the positive /
// negative literal of variable i+1.
struct DlaState {
  std::vector<int> pos;
  std::vector<int> neg;

  int total() const {
    int t = 0;
    for (int v : pos) t += v;
    for (int v : neg) t += v;
    return t;
  }
};

// One-round local approximation. Each clause independently picks a single one
// of its literals (its first, or a seeded uniform draw) and increments that
// literal's counter; then each variable is set True iff the positive counter
// is at least the negative one. Guarantees 2 * satisfied >= m on every input.
inline Assignment run_dla(const CnfFormula& f, PickPolicy policy = PickPolicy::FirstLiteral,
                          std::uint64_t seed = 0, DlaState* state_out = nullptr) {
  DlaState st;
  st.pos.assign(static_cast<size_t>(f.num_vars()), 0);
  st.neg.assign(static_cast<size_t>(f.num_vars()), 0);
  SplitMix64 rng(seed);
  for (const Clause& c : f.clauses()) {
    size_t pick = 0;
    if (policy == PickPolicy::SeededRandom)
      pick = static_cast<size_t>(rng.next_below(static_cast<std::uint64_t>(c.width())));
    const Lit& l = c.lits()[pick];
    if (l.positive())
      ++st.pos[static_cast<size_t>(l.var() - 1)];
    else
      ++st.neg[static_cast<size_t>(l.var() - 1)];
  }
  Assignment a(static_cast<size_t>(f.num_vars()));
  for (int i = 0; i < f.num_vars(); ++i)
    a[static_cast<size_t>(i)] = st.pos[static_cast<size_t>(i)] >= st.neg[static_cast<size_t>(i)];
  if (state_out) *state_out = std::move(st);
  return a;
}

// The approximation guarantee: twice the satisfied count covers all clauses.
inline bool verify_half_bound(const CnfFormula& f, const Assignment& a) {
  return 2 * eval_assignment(f, a).satisfied >= f.num_clauses();
}

}  // namespace msgnn
