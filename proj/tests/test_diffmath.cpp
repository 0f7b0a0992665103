#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "spargcp/common.hpp"
#include "spargcp/matrix.hpp"
#include "spargcp/ops.hpp"
#include "spargcp/tape.hpp"

using namespace spargcp;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i)
    m[i] = lo + (hi - lo) * rng.uniform01();
  return m;
}

// Push every entry away from zero so kinked activations are locally smooth.
Matrix away_from_zero(Matrix m, double margin = 5e-2) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (std::abs(m[i]) < margin) m[i] = m[i] < 0.0 ? -margin : margin;
  }
  return m;
}

// Distinct values with pairwise gaps far above the finite-difference step.
Matrix distinct_row(Rng& rng, std::size_t k) {
  std::vector<double> v(k);
  for (std::size_t i = 0; i < k; ++i)
    v[i] = static_cast<double>(i) * 0.1 + 0.02 * rng.uniform01();
  shuffle(v, rng);
  Matrix m(1, k);
  for (std::size_t i = 0; i < k; ++i) m(0, i) = v[i];
  return m;
}

// Scalar loss that weights every output entry differently, so backward is
// exercised with a non-uniform upstream gradient.
Tensor weighted_sum(Tape&, const Tensor& out, const Matrix& weights) {
  return sum_all(mul_const(out, weights));
}

constexpr double kFdTol = 1e-4;
constexpr int kFdInstances = 100;

}  // namespace

TEST_CASE("relu zeroes negative entries and keeps positives") {
  Tape t;
  Tensor out = relu(t.constant(Matrix::from_rows({{-1.0, 2.0}})));
  CHECK(out.value()(0, 0) == 0.0);
  CHECK(out.value()(0, 1) == 2.0);
}

TEST_CASE("matmul by the identity returns the input") {
  Rng rng(11);
  Matrix a = random_matrix(rng, 3, 5);
  Matrix id(3, 3);
  for (std::size_t i = 0; i < 3; ++i) id(i, i) = 1.0;
  Tape t;
  Tensor out = matmul(t.constant(id), t.constant(a));
  CHECK(max_abs_diff(out.value(), a) == 0.0);
}

TEST_CASE("matmul matches the naive triple loop") {
  Rng rng(12);
  for (int it = 0; it < 50; ++it) {
    const std::size_t m = 1 + rng.bounded(6), k = 1 + rng.bounded(6),
                      n = 1 + rng.bounded(6);
    Matrix a = random_matrix(rng, m, k);
    Matrix b = random_matrix(rng, k, n);
    Tape t;
    Tensor out = matmul(t.constant(a), t.constant(b));
    CHECK(max_abs_diff(out.value(), oracles::matmul_naive(a, b)) < 1e-12);
  }
}

TEST_CASE("log_softmax of a constant row is the negative log of the width") {
  Tape t;
  Tensor out = log_softmax_rows(t.constant(Matrix::from_rows({{0.0, 0.0}})));
  CHECK(out.value()(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(out.value()(0, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(13);
  for (int it = 0; it < 100; ++it) {
    Matrix a = random_matrix(rng, 1 + rng.bounded(5), 1 + rng.bounded(6),
                             -30.0, 30.0);
    Tape t;
    Tensor sm = exp(log_softmax_rows(t.constant(a)));
    for (std::size_t r = 0; r < sm.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < sm.cols(); ++c) s += sm.value()(r, c);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("log_softmax is invariant to per-row shifts") {
  Rng rng(14);
  for (int it = 0; it < 100; ++it) {
    Matrix a = random_matrix(rng, 1 + rng.bounded(5), 2 + rng.bounded(5));
    Matrix shifted = a;
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double c = -5.0 + 10.0 * rng.uniform01();
      for (std::size_t j = 0; j < a.cols(); ++j) shifted(r, j) += c;
    }
    Tape t;
    Tensor o1 = log_softmax_rows(t.constant(a));
    Tensor o2 = log_softmax_rows(t.constant(shifted));
    CHECK(max_abs_diff(o1.value(), o2.value()) < 1e-9);
  }
}

TEST_CASE("segment_sum groups message rows by destination") {
  Tape t;
  Tensor out = segment_sum(
      t.constant(Matrix::from_rows({{1.0}, {2.0}, {3.0}})), {0, 0, 1}, 2);
  CHECK(out.value()(0, 0) == 3.0);
  CHECK(out.value()(1, 0) == 3.0);
}

TEST_CASE("segment_sum with no messages yields zero rows") {
  Tape t;
  Tensor out = segment_sum(t.constant(Matrix(0, 1)), {}, 2);
  CHECK(out.rows() == 2);
  CHECK(out.value()(0, 0) == 0.0);
  CHECK(out.value()(1, 0) == 0.0);
}

TEST_CASE("segment_sum matches the per-segment loop") {
  Rng rng(15);
  for (int it = 0; it < 50; ++it) {
    const std::size_t edges = 50, segs = 1 + rng.bounded(10);
    Matrix msg = random_matrix(rng, edges, 3);
    std::vector<std::uint32_t> dest(edges);
    for (auto& d : dest) d = static_cast<std::uint32_t>(rng.bounded(segs));
    Tape t;
    Tensor out = segment_sum(t.constant(msg), dest, segs);
    CHECK(max_abs_diff(out.value(),
                       oracles::segment_sum_naive(msg, dest, segs)) < 1e-12);
  }
}

TEST_CASE("quantile_value selects the ceil(q*k)-th smallest element") {
  Tape t;
  Tensor a = quantile_value(
      t.constant(Matrix::from_rows({{0.2, 0.4, 0.6, 0.8}})), 0.9);
  CHECK(a.value()(0, 0) == 0.8);
  Tensor b = quantile_value(t.constant(Matrix::from_rows({{0.9, 0.1}})), 0.5);
  CHECK(b.value()(0, 0) == 0.1);
}

TEST_CASE("quantile of a singleton is the element with unit gradient") {
  Tape t;
  Parameter p("c", Matrix::from_rows({{0.37}}));
  Tensor out = quantile_value(t.param(p), 0.42);
  CHECK(out.value()(0, 0) == 0.37);
  t.backward(out);
  CHECK(p.grad(0, 0) == 1.0);
}

TEST_CASE("quantile_value agrees with a full sort") {
  Rng rng(16);
  for (int it = 0; it < 1000; ++it) {
    const std::size_t k = 1 + rng.bounded(50);
    std::vector<double> v(k);
    // Duplicates on purpose: draws from a small grid collide often.
    for (auto& x : v) x = 0.125 * static_cast<double>(rng.bounded(12));
    const double q = 1e-9 + (1.0 - 1e-9) * rng.uniform01();
    Matrix m(1, k);
    for (std::size_t i = 0; i < k; ++i) m(0, i) = v[i];
    Tape t;
    Tensor out = quantile_value(t.constant(m), q);
    CHECK(out.value()(0, 0) == oracles::quantile_sorted(v, q));
  }
}

TEST_CASE("quantile index is exact when q*k is an integer in floating point") {
  // 0.9 * 20 evaluates to 18.000000000000004; the rule must still give j=18.
  CHECK(quantile_order_index(20, 0.9) == 17);
  CHECK(quantile_order_index(10, 0.3) == 2);
  CHECK(quantile_order_index(5, 1.0) == 4);
  CHECK(quantile_order_index(7, 1e-12) == 0);
  CHECK(quantile_order_index(4, 0.9) == 3);
}

TEST_CASE("quantile gradient is one-hot at the selected element") {
  Tape t;
  Parameter p("x", Matrix::from_rows({{0.2, 0.4, 0.6, 0.8}}));
  Tensor out = quantile_value(t.param(p), 0.9);
  t.backward(out);
  CHECK(p.grad(0, 0) == 0.0);
  CHECK(p.grad(0, 1) == 0.0);
  CHECK(p.grad(0, 2) == 0.0);
  CHECK(p.grad(0, 3) == 1.0);
}

TEST_CASE("cross_entropy closed forms") {
  {
    Tape t;
    Tensor loss = cross_entropy(
        t.constant(Matrix::from_rows({{1e6, 0.0}})), {0});
    CHECK(loss.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    Tape t;
    Tensor loss =
        cross_entropy(t.constant(Matrix::from_rows({{0.0, 0.0}})), {1});
    CHECK(loss.value()(0, 0) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  {
    Tape t;
    Tensor loss = cross_entropy(
        t.constant(Matrix::from_rows(
            {{0.5, 0.5, 0.5, 0.5}, {-1.0, -1.0, -1.0, -1.0}})),
        {2, 0});
    CHECK(loss.value()(0, 0) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
}

TEST_CASE("backward of a plain sum gives an all-ones gradient") {
  Tape t;
  Parameter w("w", Matrix::from_rows({{1.0, -2.0}, {3.0, 0.5}}));
  Tensor loss = sum_all(t.param(w));
  t.backward(loss);
  for (std::size_t i = 0; i < 4; ++i) CHECK(w.grad[i] == 1.0);
}

TEST_CASE("parameter used twice accumulates both gradient paths") {
  Tape t;
  Parameter w("w", Matrix::from_rows({{2.0, -1.0}}));
  Tensor x = t.param(w);
  Tensor loss = sum_all(mul(x, x));
  t.backward(loss);
  CHECK(w.grad(0, 0) == 4.0);
  CHECK(w.grad(0, 1) == -2.0);
}

TEST_CASE("gradients accumulate across tapes until cleared") {
  Parameter w("w", Matrix::from_rows({{1.5}}));
  {
    Tape t;
    t.backward(sum_all(t.param(w)));
  }
  {
    Tape t;
    t.backward(smul(sum_all(t.param(w)), 2.0));
  }
  CHECK(w.grad(0, 0) == 3.0);
  w.zero_grad();
  CHECK(w.grad(0, 0) == 0.0);
}

TEST_CASE("finite differences: binary elementwise ops and matmul") {
  Rng rng(21);
  for (int it = 0; it < kFdInstances; ++it) {
    const std::size_t m = 1 + rng.bounded(4), k = 1 + rng.bounded(4),
                      n = 1 + rng.bounded(4);
    Parameter a("a", random_matrix(rng, m, k));
    Parameter b("b", random_matrix(rng, k, n));
    Matrix w = random_matrix(rng, m, n);
    CHECK(oracles::fd_max_rel_err({&a, &b}, [&](Tape& t) {
            return weighted_sum(t, matmul(t.param(a), t.param(b)), w);
          }) < kFdTol);

    Parameter c("c", random_matrix(rng, m, k));
    Matrix w2 = random_matrix(rng, m, k);
    CHECK(oracles::fd_max_rel_err({&a, &c}, [&](Tape& t) {
            return weighted_sum(t, add(t.param(a), t.param(c)), w2);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a, &c}, [&](Tape& t) {
            return weighted_sum(t, sub(t.param(a), t.param(c)), w2);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a, &c}, [&](Tape& t) {
            return weighted_sum(t, mul(t.param(a), t.param(c)), w2);
          }) < kFdTol);

    Matrix denom = random_matrix(rng, m, k, 0.5, 1.5);
    for (std::size_t i = 0; i < denom.size(); ++i)
      if (rng.uniform01() < 0.5) denom[i] = -denom[i];
    Parameter d("d", denom);
    CHECK(oracles::fd_max_rel_err({&a, &d}, [&](Tape& t) {
            return weighted_sum(t, div(t.param(a), t.param(d)), w2);
          }) < kFdTol);
  }
}

TEST_CASE("finite differences: scalar, constant and row-scaling ops") {
  Rng rng(22);
  for (int it = 0; it < kFdInstances; ++it) {
    const std::size_t m = 1 + rng.bounded(4), n = 1 + rng.bounded(4);
    Parameter a("a", random_matrix(rng, m, n));
    Matrix w = random_matrix(rng, m, n);
    const double c = -2.0 + 4.0 * rng.uniform01();
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, smul(t.param(a), c), w);
          }) < kFdTol);

    Matrix cm = random_matrix(rng, m, n);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, add_const(t.param(a), cm), w);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, mul_const(t.param(a), cm), w);
          }) < kFdTol);

    Parameter s("s", random_matrix(rng, m, 1));
    CHECK(oracles::fd_max_rel_err({&a, &s}, [&](Tape& t) {
            return weighted_sum(t, scale_rows(t.param(a), t.param(s)), w);
          }) < kFdTol);

    std::vector<double> sc(m);
    for (auto& x : sc) x = -1.0 + 2.0 * rng.uniform01();
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, scale_rows_const(t.param(a), sc), w);
          }) < kFdTol);

    Parameter bias("bias", random_matrix(rng, 1, n));
    CHECK(oracles::fd_max_rel_err({&a, &bias}, [&](Tape& t) {
            return weighted_sum(t, add_bias(t.param(a), t.param(bias)), w);
          }) < kFdTol);
  }
}

TEST_CASE("finite differences: activations and log_softmax") {
  Rng rng(23);
  for (int it = 0; it < kFdInstances; ++it) {
    const std::size_t m = 1 + rng.bounded(4), n = 1 + rng.bounded(4);
    Matrix w = random_matrix(rng, m, n);
    Parameter a("a", away_from_zero(random_matrix(rng, m, n, -2.0, 2.0)));
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, relu(t.param(a)), w);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, leaky_relu(t.param(a), 0.2), w);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, elu(t.param(a)), w);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, sigmoid(t.param(a)), w);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, exp(t.param(a)), w);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, log_softmax_rows(t.param(a)), w);
          }) < kFdTol);
  }
}

TEST_CASE("finite differences: structural ops") {
  Rng rng(24);
  for (int it = 0; it < kFdInstances; ++it) {
    const std::size_t m = 2 + rng.bounded(4), n = 1 + rng.bounded(3),
                      n2 = 1 + rng.bounded(3);
    Parameter a("a", random_matrix(rng, m, n));
    Parameter b("b", random_matrix(rng, m, n2));
    Matrix wcat = random_matrix(rng, m, n + n2);
    CHECK(oracles::fd_max_rel_err({&a, &b}, [&](Tape& t) {
            return weighted_sum(t, concat_cols(t.param(a), t.param(b)), wcat);
          }) < kFdTol);

    // Gather with repeats so the scatter-add backward path is exercised.
    std::vector<std::size_t> idx(m + 2);
    for (auto& i : idx) i = rng.bounded(m);
    Matrix wg = random_matrix(rng, idx.size(), n);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, row_gather(t.param(a), idx), wg);
          }) < kFdTol);

    const std::size_t total = m + 3;
    std::vector<std::size_t> slots(total);
    for (std::size_t i = 0; i < total; ++i) slots[i] = i;
    shuffle(slots, rng);
    slots.resize(m);
    Matrix ws = random_matrix(rng, total, n);
    const double fill = -1.0 + 2.0 * rng.uniform01();
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, row_scatter(t.param(a), slots, total, fill),
                                ws);
          }) < kFdTol);

    const std::size_t segs = 1 + rng.bounded(4);
    std::vector<std::uint32_t> dest(m);
    for (auto& d : dest) d = static_cast<std::uint32_t>(rng.bounded(segs));
    Matrix wseg = random_matrix(rng, segs, n);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, segment_sum(t.param(a), dest, segs), wseg);
          }) < kFdTol);

    Matrix wrow = random_matrix(rng, m, 1);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return weighted_sum(t, row_sums(t.param(a)), wrow);
          }) < kFdTol);
    CHECK(oracles::fd_max_rel_err({&a}, [&](Tape& t) {
            return smul(sum_all(t.param(a)), 1.7);
          }) < kFdTol);
  }
}

TEST_CASE("finite differences: quantile and cross-entropy") {
  Rng rng(25);
  for (int it = 0; it < kFdInstances; ++it) {
    const std::size_t k = 2 + rng.bounded(12);
    Parameter x("x", distinct_row(rng, k));
    const double q = 0.05 + 0.9 * rng.uniform01();
    CHECK(oracles::fd_max_rel_err({&x}, [&](Tape& t) {
            return quantile_value(t.param(x), q);
          }) < kFdTol);

    const std::size_t b = 1 + rng.bounded(5), cls = 2 + rng.bounded(4);
    Parameter logits("logits", random_matrix(rng, b, cls, -2.0, 2.0));
    std::vector<std::int32_t> labels(b);
    for (auto& y : labels) y = static_cast<std::int32_t>(rng.bounded(cls));
    CHECK(oracles::fd_max_rel_err({&logits}, [&](Tape& t) {
            return cross_entropy(t.param(logits), labels);
          }) < kFdTol);
  }
}

TEST_CASE("finite differences: composite network-shaped expression") {
  Rng rng(26);
  for (int it = 0; it < 20; ++it) {
    const std::size_t n = 4, d = 3, h = 5, cls = 3;
    Parameter x("x", random_matrix(rng, n, d));
    Parameter w1("w1", random_matrix(rng, d, h));
    Parameter b1("b1", random_matrix(rng, 1, h));
    Parameter w2("w2", random_matrix(rng, h, cls));
    std::vector<std::int32_t> labels = {0, 2, 1, 2};
    std::vector<std::uint32_t> dest = {0, 0, 1, 2};
    CHECK(oracles::fd_max_rel_err({&x, &w1, &b1, &w2}, [&](Tape& t) {
            Tensor hcol =
                elu(add_bias(matmul(t.param(x), t.param(w1)), t.param(b1)));
            Tensor agg = segment_sum(hcol, dest, n);
            Tensor logits = matmul(agg, t.param(w2));
            Tensor ce = cross_entropy(logits, labels);
            Tensor gate = quantile_value(sigmoid(row_sums(hcol)), 0.75);
            return add(ce, smul(gate, 0.5));
          }) < kFdTol);
  }
}

TEST_CASE("shape and validity errors are reported by category") {
  Tape t;
  Tensor a = t.constant(Matrix(2, 3));
  Tensor b = t.constant(Matrix(3, 3));
  CHECK_THROWS_AS((void)add(a, b), DimensionError);
  CHECK_THROWS_AS((void)matmul(a, a), DimensionError);
  CHECK_THROWS_AS((void)add_bias(a, t.constant(Matrix(1, 2))), DimensionError);
  CHECK_THROWS_AS((void)segment_sum(a, {0}, 2), DimensionError);
  CHECK_THROWS_AS((void)segment_sum(a, {0, 9}, 4), ValidationError);
  CHECK_THROWS_AS((void)row_gather(a, {5}), ValidationError);
  CHECK_THROWS_AS((void)row_scatter(a, {1, 1}, 4, 0.0), ValidationError);
  CHECK_THROWS_AS((void)cross_entropy(b, {0, 1, 3}), ValidationError);
  CHECK_THROWS_AS((void)quantile_value(t.constant(Matrix(1, 0)), 0.5),
                  ValidationError);
  CHECK_THROWS_AS((void)quantile_value(a, 0.0), ValidationError);
  CHECK_THROWS_AS((void)quantile_value(a, 1.5), ValidationError);
}

TEST_CASE("non-finite values are rejected at creation and after ops") {
  Tape t;
  Matrix bad(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS((void)t.constant(bad), NumericError);
  Tensor big = t.constant(Matrix::from_rows({{1000.0}}));
  CHECK_THROWS_AS((void)exp(big), NumericError);
  Tensor zero = t.constant(Matrix::from_rows({{0.0}}));
  Tensor one = t.constant(Matrix::from_rows({{1.0}}));
  CHECK_THROWS_AS((void)div(one, zero), NumericError);
}

TEST_CASE("backward misuse is a usage error") {
  Tape t;
  Parameter w("w", Matrix::from_rows({{1.0, 2.0}}));
  Tensor x = t.param(w);
  CHECK_THROWS_AS(t.backward(x), UsageError);  // non-scalar root
  Tensor loss = sum_all(x);
  t.backward(loss);
  CHECK_THROWS_AS(t.backward(loss), UsageError);  // second sweep

  Tape other;
  Tensor y = other.constant(Matrix(1, 1));
  CHECK_THROWS_AS(t.backward(y), UsageError);
}
