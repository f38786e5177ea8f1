#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "msgnn/dla.hpp"
#include "msgnn/exact.hpp"
#include "msgnn/gradcheck.hpp"
#include "msgnn/train_eval.hpp"

namespace msgnn {

// Worked 3-variable example used across tests:
//   (x1 v x2 v x3) ^ (x1 v ~x3) ^ (~x1 v ~x2 v ~x3)
inline CnfFormula example_formula() {
  return parse_dimacs(std::string("p cnf 3 3\n1 2 3 0\n1 -3 0\n-1 -2 -3 0\n"));
}

// Visits every formula with exactly m clauses of width k over variables 1..n,
// where a clause is any ordered k-tuple of distinct variables with any
// polarities. Clause order matters, so permutations count as distinct
// formulas.
template <class F>
void for_each_width_k_formula(int k, int n, int m, F&& visit) {
  std::vector<Clause> types;
  std::vector<int> tuple(static_cast<size_t>(k));
  std::vector<bool> used(static_cast<size_t>(n) + 1, false);
  auto tuples = [&](auto&& self, int depth) -> void {
    if (depth == k) {
      for (int pol = 0; pol < (1 << k); ++pol) {
        std::vector<Lit> lits;
        lits.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i)
          lits.emplace_back(((pol >> i) & 1) ? tuple[static_cast<size_t>(i)]
                                             : -tuple[static_cast<size_t>(i)]);
        types.emplace_back(std::move(lits));
      }
      return;
    }
    for (int v = 1; v <= n; ++v) {
      if (used[static_cast<size_t>(v)]) continue;
      used[static_cast<size_t>(v)] = true;
      tuple[static_cast<size_t>(depth)] = v;
      self(self, depth + 1);
      used[static_cast<size_t>(v)] = false;
    }
  };
  tuples(tuples, 0);
  std::vector<size_t> digits(static_cast<size_t>(m), 0);
  for (;;) {
    std::vector<Clause> clauses;
    clauses.reserve(static_cast<size_t>(m));
    for (size_t d : digits) clauses.push_back(types[d]);
    visit(CnfFormula(n, std::move(clauses)));
    size_t pos = 0;
    while (pos < digits.size()) {
      if (++digits[pos] < types.size()) break;
      digits[pos] = 0;
      ++pos;
    }
    if (pos == digits.size()) return;
  }
}

namespace detail {

struct SelftestCheck {
  std::ostream& os;
  int failed = 0;

  void operator()(const std::string& name, bool ok, const std::string& info) {
    os << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!info.empty()) os << " -- " << info;
    os << '\n';
    if (!ok) ++failed;
  }
};

inline GenSpec random_small_spec(SplitMix64& rng, int max_n) {
  GenSpec gs;
  gs.k = 1 + static_cast<int>(rng.next_below(3));
  gs.n = gs.k + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_n - gs.k + 1)));
  gs.m = 1 + static_cast<int>(rng.next_below(40));
  gs.seed = rng.next();
  return gs;
}

}  // namespace detail

// Fast end-to-end invariant suites: the local algorithm's guarantee, solver
// agreement, gradient checks, batch equivalence, checkpoint round-trips.
// Returns true when everything passed.
inline bool selftest_run(std::ostream& os) {
  detail::SelftestCheck check{os};

  {
    std::uint64_t count = 0, violations = 0;
    auto verify = [&](const CnfFormula& f) {
      for (PickPolicy p : {PickPolicy::FirstLiteral, PickPolicy::SeededRandom}) {
        Assignment a = run_dla(f, p, count);
        if (!verify_half_bound(f, a)) ++violations;
      }
      ++count;
    };
    for (int n = 1; n <= 3; ++n)
      for (int m = 1; m <= 4; ++m) for_each_width_k_formula(1, n, m, verify);
    for (int n = 2; n <= 3; ++n)
      for (int m = 1; m <= 2; ++m) for_each_width_k_formula(2, n, m, verify);
    SplitMix64 rng(2024);
    for (int i = 0; i < 2000; ++i) {
      GenSpec gs = detail::random_small_spec(rng, 20);
      verify(generate_instance(gs));
    }
    check("local algorithm half bound", violations == 0,
          std::to_string(count) + " formulas, both pick policies");
  }

  {
    SplitMix64 rng(515151);
    int mismatches = 0;
    for (int i = 0; i < 200; ++i) {
      GenSpec gs = detail::random_small_spec(rng, 10);
      CnfFormula f = generate_instance(gs);
      OptResult a = solve_exhaustive(f);
      OptResult b = solve_branch_bound(f);
      if (a.optimum != b.optimum || a.witness != b.witness) ++mismatches;
    }
    check("exact solver agreement", mismatches == 0, "200 random instances, optimum and witness");
  }

  {
    CnfFormula f = example_formula();
    Assignment wit = solve_exhaustive(f).witness;
    Nsfg ng = build_nsfg(f);
    Esfg eg = build_esfg(f);
    Tensor<double> targets(f.num_vars(), 1), weights(f.num_vars(), 1);
    for (int i = 0; i < f.num_vars(); ++i) {
      targets.at(i, 0) = wit[static_cast<size_t>(i)] ? 1.0 : 0.0;
      weights.at(i, 0) = 1.0 / f.num_vars();
    }
    std::vector<std::uint64_t> seeds{mix_seed(7, 0)};
    for (ModelKind kind : {ModelKind::Nsfg, ModelKind::Esfg}) {
      ModelConfig cfg{kind, 3, 2};
      ParamStore<double> ps = init_model_params<double>(cfg, 99);
      jitter_params(ps, 100);
      auto build = [&](Tape<double>& tape, const TapeParams<double>& tp) {
        return model_loss(tape, tp, cfg, &ng, &eg, seeds, targets, weights);
      };
      GradCheckResult r = gradcheck(ps, build);
      std::ostringstream info;
      info << model_kind_name(kind) << " max rel err " << r.max_rel_err << " at "
           << (r.worst.empty() ? "-" : r.worst) << ", " << r.checked << " scalars";
      check("gradient check", r.max_rel_err < 1e-4, info.str());
    }
  }

  {
    const int b = 4;
    ModelConfig cfg{ModelKind::Nsfg, 16, 3};
    ParamStore<float> ps = init_model_params<float>(cfg, 5);
    std::vector<CnfFormula> fs;
    std::vector<Nsfg> gs;
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < b; ++i) {
      fs.push_back(generate_instance(GenSpec{2, 8, 20, mix_seed(77, static_cast<std::uint64_t>(i))}));
      gs.push_back(build_nsfg(fs.back()));
      seeds.push_back(mix_seed(99, static_cast<std::uint64_t>(i)));
    }
    Nsfg batch = batch_nsfg(gs);
    Tape<float> bt;
    TapeParams<float> btp = register_params(bt, ps);
    auto blog = nsfg_forward(bt, btp, cfg, batch, seeds);
    double max_diff = 0.0;
    for (int i = 0; i < b; ++i) {
      Tape<float> st;
      TapeParams<float> stp = register_params(st, ps);
      auto slog = nsfg_forward(st, stp, cfg, gs[static_cast<size_t>(i)], {seeds[static_cast<size_t>(i)]});
      const Span& span = batch.spans[static_cast<size_t>(i)];
      for (std::int32_t v = 0; v < span.n; ++v) {
        double diff = std::abs(static_cast<double>(bt.val(blog).at(span.var_offset + v, 0)) -
                               static_cast<double>(st.val(slog).at(v, 0)));
        if (diff > max_diff) max_diff = diff;
      }
    }
    std::ostringstream info;
    info << b << " instances, max |batch - single| = " << max_diff;
    check("batch equivalence", max_diff <= 1e-5, info.str());
  }

  {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() / "msgnn_selftest_ckpt.bin";
    bool ok = true;
    std::string info;
    for (ModelKind kind : {ModelKind::Nsfg, ModelKind::Esfg}) {
      ModelConfig cfg{kind, 8, 3};
      Checkpoint ck{cfg, init_model_params<float>(cfg, 42)};
      save_checkpoint(tmp, ck);
      Checkpoint back = load_checkpoint(tmp);
      if (back.config.kind != cfg.kind || back.config.d != cfg.d || back.config.T != cfg.T) {
        ok = false;
        info = "config mismatch";
      }
      for (const auto& [name, t] : ck.params.params) {
        const Tensor<float>& u = back.params.at(name);
        if (u.data != t.data) {
          ok = false;
          info = "payload mismatch in " + name;
        }
      }
    }
    std::error_code ec;
    fs::remove(tmp, ec);
    check("checkpoint round-trip", ok, info.empty() ? "bit-identical parameters" : info);
  }

  os << (check.failed == 0 ? "selftest passed" : "selftest FAILED") << '\n';
  return check.failed == 0;
}

}  // namespace msgnn
