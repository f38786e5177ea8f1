#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "msgnn/rng.hpp"
#include "msgnn/tape.hpp"

using namespace msgnn;
using Id = Tape<double>::Id;
using Builder = std::function<Id(Tape<double>&, const std::vector<Id>&)>;

namespace {

Tensor<double> rnd(std::int32_t r, std::int32_t c, std::uint64_t seed, double lo = -1.0,
                   double hi = 1.0) {
  Tensor<double> t(r, c);
  SplitMix64 g(seed);
  for (double& v : t.data) v = lo + (hi - lo) * g.next_double01();
  return t;
}

Tensor<double> loss_weights(std::int32_t r, std::int32_t c) {
  return rnd(r, c, 555);
}

double eval_loss(const std::vector<Tensor<double>>& ins, const Builder& build) {
  Tape<double> t;
  std::vector<Id> ids;
  for (const Tensor<double>& x : ins) ids.push_back(t.leaf(x));
  Id out = build(t, ids);
  Id loss = t.weighted_sum(out, loss_weights(t.val(out).rows, t.val(out).cols));
  return t.val(loss).data[0];
}

// Central finite differences on every input scalar against one analytic
// backward pass, on the scalar loss sum(out (*) fixed_weights).
void check_grads(std::vector<Tensor<double>> ins, const Builder& build, double tol = 1e-5) {
  Tape<double> t;
  std::vector<Id> ids;
  for (const Tensor<double>& x : ins) ids.push_back(t.leaf(x, true));
  Id out = build(t, ids);
  Id loss = t.weighted_sum(out, loss_weights(t.val(out).rows, t.val(out).cols));
  t.backward(loss);
  std::vector<Tensor<double>> analytic;
  for (Id id : ids) analytic.push_back(t.grad(id));

  const double h = 1e-5;
  for (size_t i = 0; i < ins.size(); ++i) {
    for (size_t s = 0; s < ins[i].data.size(); ++s) {
      double keep = ins[i].data[s];
      ins[i].data[s] = keep + h;
      double lp = eval_loss(ins, build);
      ins[i].data[s] = keep - h;
      double lm = eval_loss(ins, build);
      ins[i].data[s] = keep;
      double fd = (lp - lm) / (2 * h);
      double a = analytic[i].data[s];
      double rel = std::abs(a - fd) / std::max({1e-6, std::abs(a), std::abs(fd)});
      INFO("input " << i << " scalar " << s << " analytic " << a << " fd " << fd);
      REQUIRE(rel < tol);
    }
  }
}

void matmul_ref(const Tensor<double>& a, const Tensor<double>& b, Tensor<double>& c) {
  for (std::int32_t i = 0; i < a.rows; ++i)
    for (std::int32_t j = 0; j < b.cols; ++j) {
      double acc = 0;
      for (std::int32_t k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
}

Tensor<double> transpose(const Tensor<double>& a) {
  Tensor<double> t(a.cols, a.rows);
  for (std::int32_t i = 0; i < a.rows; ++i)
    for (std::int32_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

bool approx_equal(const Tensor<double>& a, const Tensor<double>& b, double tol = 1e-12) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (std::abs(a.data[i] - b.data[i]) > tol) return false;
  return true;
}

}  // namespace

TEST_CASE("matrix products match a naive reference in all three layouts") {
  Tensor<double> a = rnd(4, 3, 1), b = rnd(3, 5, 2);
  Tensor<double> want(4, 5);
  matmul_ref(a, b, want);

  Tensor<double> c(4, 5);
  matmul_nn(a, b, c);
  CHECK(approx_equal(c, want));
  matmul_nn(a, b, c, true);
  Tensor<double> doubled = want;
  for (double& v : doubled.data) v *= 2;
  CHECK(approx_equal(c, doubled));

  Tensor<double> c2(4, 5);
  matmul_nt(a, transpose(b), c2);
  CHECK(approx_equal(c2, want));
  Tensor<double> c3(4, 5);
  matmul_tn(transpose(a), b, c3);
  CHECK(approx_equal(c3, want));

  CHECK_THROWS_AS(matmul_nn(a, a, c), std::invalid_argument);
  CHECK_THROWS_AS(matmul_nt(a, b, c), std::invalid_argument);
  CHECK_THROWS_AS(matmul_tn(a, b, c), std::invalid_argument);
}

TEST_CASE("gradients match finite differences per op") {
  SECTION("matmul") {
    check_grads({rnd(3, 4, 10), rnd(4, 2, 11)},
                [](Tape<double>& t, const std::vector<Id>& in) { return t.matmul(in[0], in[1]); });
  }
  SECTION("add") {
    check_grads({rnd(3, 4, 12), rnd(3, 4, 13)},
                [](Tape<double>& t, const std::vector<Id>& in) { return t.add(in[0], in[1]); });
  }
  SECTION("add_rowvec") {
    check_grads({rnd(3, 4, 14), rnd(1, 4, 15)}, [](Tape<double>& t, const std::vector<Id>& in) {
      return t.add_rowvec(in[0], in[1]);
    });
  }
  SECTION("relu away from the kink") {
    Tensor<double> x = rnd(3, 4, 16);
    for (double& v : x.data) v += (v >= 0 ? 0.1 : -0.1);
    check_grads({x}, [](Tape<double>& t, const std::vector<Id>& in) { return t.relu(in[0]); });
  }
  SECTION("sigmoid") {
    check_grads({rnd(3, 4, 17, -3, 3)},
                [](Tape<double>& t, const std::vector<Id>& in) { return t.sigmoid(in[0]); });
  }
  SECTION("concat_cols") {
    check_grads({rnd(3, 2, 18), rnd(3, 3, 19)}, [](Tape<double>& t, const std::vector<Id>& in) {
      return t.concat_cols(in[0], in[1]);
    });
  }
  SECTION("gather_rows with a repeated row") {
    check_grads({rnd(5, 3, 20)}, [](Tape<double>& t, const std::vector<Id>& in) {
      return t.gather_rows(in[0], {0, 2, 2, 4});
    });
  }
  SECTION("aggregate in both graph directions") {
    Nsfg g = build_nsfg(parse_dimacs("p cnf 3 3\n1 2 3 0\n1 -3 0\n-1 -2 -3 0\n"));
    check_grads({rnd(6, 3, 21)}, [&g](Tape<double>& t, const std::vector<Id>& in) {
      return t.aggregate(g.by_clause, g.by_lit, in[0]);
    });
    check_grads({rnd(3, 3, 22)}, [&g](Tape<double>& t, const std::vector<Id>& in) {
      return t.aggregate(g.by_lit, g.by_clause, in[0]);
    });
  }
  SECTION("lstm via the paired hidden state only") {
    check_grads({rnd(2, 8, 23), rnd(2, 2, 24)}, [](Tape<double>& t, const std::vector<Id>& in) {
      return t.lstm_gates(in[0], in[1]).first;
    });
  }
  SECTION("lstm via the cell state only") {
    check_grads({rnd(2, 8, 25), rnd(2, 2, 26)}, [](Tape<double>& t, const std::vector<Id>& in) {
      return t.lstm_gates(in[0], in[1]).second;
    });
  }
  SECTION("lstm via both outputs") {
    check_grads({rnd(2, 8, 27), rnd(2, 2, 28)}, [](Tape<double>& t, const std::vector<Id>& in) {
      auto [h, c] = t.lstm_gates(in[0], in[1]);
      return t.concat_cols(h, c);
    });
  }
  SECTION("bce inside the clamp band") {
    Tensor<double> targets = rnd(3, 2, 30, 0, 1);
    check_grads({rnd(3, 2, 29, 0.05, 0.95)},
                [targets](Tape<double>& t, const std::vector<Id>& in) {
                  return t.bce_elem(in[0], targets);
                });
  }
  SECTION("chained ops") {
    check_grads({rnd(2, 3, 31), rnd(3, 3, 32), rnd(1, 3, 33)},
                [](Tape<double>& t, const std::vector<Id>& in) {
                  return t.sigmoid(t.add_rowvec(t.matmul(in[0], in[1]), in[2]));
                });
  }
}

TEST_CASE("lstm cell with zero preactivations halves the cell state") {
  // All gates sigmoid(0) = 1/2 and the candidate tanh(0) = 0, so
  // c' = c/2 and h' = tanh(c/2)/2.
  Tape<double> t;
  Tensor<double> c0 = rnd(3, 4, 40, -2, 2);
  Id z = t.leaf(Tensor<double>(3, 16));
  Id c = t.leaf(c0);
  auto [h_id, c_id] = t.lstm_gates(z, c);
  for (std::int32_t r = 0; r < 3; ++r)
    for (std::int32_t j = 0; j < 4; ++j) {
      CHECK(t.val(c_id).at(r, j) == Catch::Approx(0.5 * c0.at(r, j)).margin(1e-15));
      CHECK(t.val(h_id).at(r, j) == Catch::Approx(0.5 * std::tanh(0.5 * c0.at(r, j))).margin(1e-15));
    }
}

TEST_CASE("binary cross entropy values and clamping") {
  Tape<double> t;
  Tensor<double> p(1, 3);
  p.data = {0.5, 0.0, 1.0};
  Tensor<double> targets(1, 3);
  targets.data = {1.0, 1.0, 0.0};
  Id pid = t.leaf(p, true);
  Id y = t.bce_elem(pid, targets);
  CHECK(t.val(y).data[0] == Catch::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(t.val(y).data[1] == Catch::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(t.val(y).data[2] == Catch::Approx(-std::log(1e-7)).epsilon(1e-9));
  Tensor<double> w(1, 3);
  w.data = {1, 1, 1};
  t.backward(t.weighted_sum(y, std::move(w)));
  // Outside the clamp band the loss is locally constant in p.
  CHECK(t.grad(pid).data[1] == 0.0);
  CHECK(t.grad(pid).data[2] == 0.0);
  CHECK(t.grad(pid).data[0] == Catch::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("a leaf used twice accumulates both contributions") {
  Tape<double> t;
  Tensor<double> x = rnd(2, 2, 50);
  Id xid = t.leaf(x, true);
  Id y = t.add(xid, xid);
  Tensor<double> w(2, 2);
  w.data = {1, 2, 3, 4};
  t.backward(t.weighted_sum(y, w));
  for (size_t i = 0; i < 4; ++i) CHECK(t.grad(xid).data[i] == 2.0 * w.data[i]);
}

TEST_CASE("backward bookkeeping") {
  Tape<double> t;
  Id x = t.leaf(rnd(2, 2, 60), true);
  Id mid = t.relu(x);
  Id not_retained = t.leaf(rnd(2, 2, 61));
  Id loss = t.weighted_sum(mid, rnd(2, 2, 62));
  t.backward(loss);
  CHECK(t.has_grad(x));
  CHECK_FALSE(t.has_grad(mid));
  CHECK_FALSE(t.has_grad(not_retained));
  CHECK_THROWS_AS(t.grad(mid), std::logic_error);
  CHECK_THROWS_AS(t.backward(loss), std::logic_error);

  Tape<double> t2;
  Id big = t2.leaf(rnd(2, 2, 63));
  CHECK_THROWS_AS(t2.backward(big), std::invalid_argument);
}

TEST_CASE("op shape validation") {
  Tape<double> t;
  Id a = t.leaf(rnd(2, 3, 70));
  Id b = t.leaf(rnd(3, 3, 71));
  Id v = t.leaf(rnd(1, 2, 72));
  CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.add_rowvec(a, v), std::invalid_argument);
  CHECK_THROWS_AS(t.concat_cols(a, v), std::invalid_argument);
  CHECK_THROWS_AS(t.lstm_gates(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.bce_elem(a, Tensor<double>(3, 3)), std::invalid_argument);
  CHECK_THROWS_AS(t.weighted_sum(a, Tensor<double>(3, 3)), std::invalid_argument);
  Nsfg g = build_nsfg(parse_dimacs("p cnf 2 1\n1 2 0\n"));
  CHECK_THROWS_AS(t.aggregate(g.by_clause, g.by_lit, a), std::invalid_argument);
}

TEST_CASE("aggregate leaves rows without sources at zero") {
  Nsfg g = build_nsfg(parse_dimacs("p cnf 3 1\n1 3 0\n"));
  Tape<double> t;
  Id x = t.leaf(rnd(1, 4, 80));
  Id y = t.aggregate(g.by_lit, g.by_clause, x);
  REQUIRE(t.val(y).rows == 6);
  for (std::int32_t j = 0; j < 4; ++j) {
    CHECK(t.val(y).at(0, j) == t.val(x).at(0, j));
    CHECK(t.val(y).at(2, j) == 0.0);
    CHECK(t.val(y).at(3, j) == 0.0);
    CHECK(t.val(y).at(4, j) == t.val(x).at(0, j));
  }
}
