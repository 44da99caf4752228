#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "tsproto/adam.hpp"
#include "tsproto/rng.hpp"
#include "tsproto/tape.hpp"

using namespace tsproto;

namespace {

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

double eval_loss(const std::vector<Matrix>& inputs, const BuildFn& build,
                 const Matrix& weight) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
  const Var y = build(tape, vars);
  const Var loss = tape.sum(tape.cmul(y, tape.constant(weight)));
  return tape.value(loss)(0, 0);
}

/**
 * Checks d(sum(output * W))/d(every input coordinate) against central
 * differences for a random fixed weight W.
 */
void check_op(std::vector<Matrix> inputs, const BuildFn& build,
              std::uint64_t seed) {
  Rng rng(seed);
  Matrix weight;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
    const Var y = build(tape, vars);
    weight = random_matrix(tape.value(y).rows(), tape.value(y).cols(), rng);
  }

  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& m : inputs) vars.push_back(tape.leaf(m));
  const Var y = build(tape, vars);
  const Var loss = tape.sum(tape.cmul(y, tape.constant(weight)));
  tape.backward(loss);
  std::vector<Matrix> grads;
  for (const Var v : vars) grads.push_back(tape.grad(v));

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (Index r = 0; r < inputs[i].rows(); ++r) {
      for (Index c = 0; c < inputs[i].cols(); ++c) {
        const double original = inputs[i](r, c);
        const double h = 1e-5 * std::max(1.0, std::abs(original));
        inputs[i](r, c) = original + h;
        const double up = eval_loss(inputs, build, weight);
        inputs[i](r, c) = original - h;
        const double down = eval_loss(inputs, build, weight);
        inputs[i](r, c) = original;
        const double fd = (up - down) / (2.0 * h);
        const double analytic = grads[i](r, c);
        const double err = std::abs(analytic - fd);
        const double bound =
            1e-6 + 1e-4 * std::max(std::abs(analytic), std::abs(fd));
        CAPTURE(i);
        CAPTURE(r);
        CAPTURE(c);
        CAPTURE(analytic);
        CAPTURE(fd);
        CHECK(err <= bound);
      }
    }
  }
}

}  // namespace

TEST_CASE("tape values match direct evaluation") {
  Tape tape;
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  const Var va = tape.leaf(a), vb = tape.leaf(b);
  CHECK(tape.value(tape.matmul(va, vb)) == Matrix(a * b));
  CHECK(tape.value(tape.add(va, vb)) == Matrix(a + b));
  CHECK(tape.value(tape.sub(va, vb)) == Matrix(a - b));
  CHECK(tape.value(tape.cmul(va, vb)) == Matrix(a.cwiseProduct(b)));
  CHECK(tape.value(tape.scale(va, 3.0)) == Matrix(3.0 * a));
  CHECK(tape.value(tape.sum(va))(0, 0) == 10.0);
  CHECK(tape.value(tape.mean(va))(0, 0) == 2.5);

  std::vector<Index> argmin;
  const Var m = tape.min_cols(va, &argmin);
  CHECK(tape.value(m)(0, 0) == 1.0);
  CHECK(tape.value(m)(1, 0) == 3.0);
  CHECK(argmin == std::vector<Index>{0, 0});
}

TEST_CASE("gradients of constants are rejected") {
  Tape tape;
  const Var c = tape.constant(Matrix::Ones(2, 2));
  const Var l = tape.leaf(Matrix::Ones(2, 2));
  const Var loss = tape.sum(tape.cmul(c, l));
  tape.backward(loss);
  CHECK_FALSE(tape.requires_grad(c));
  CHECK_THROWS_AS(tape.grad(c), std::logic_error);
  CHECK(tape.grad(l) == Matrix::Ones(2, 2));
}

TEST_CASE("elementwise and linear ops differentiate correctly") {
  Rng rng(1);
  check_op({random_matrix(3, 4, rng), random_matrix(4, 2, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); },
           101);
  check_op({random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); },
           102);
  check_op({random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.sub(v[0], v[1]); },
           103);
  check_op({random_matrix(3, 4, rng), random_matrix(3, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.cmul(v[0], v[1]); },
           104);
  check_op({random_matrix(3, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -2.5); },
           105);
  check_op({random_matrix(3, 4, rng), random_matrix(1, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.add_rowvec(v[0], v[1]);
           },
           106);
  check_op({random_matrix(3, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.tanh(v[0]); }, 107);
  check_op({random_matrix(2, 1, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.mean(v[0]); }, 108);
}

TEST_CASE("relu differentiates away from the kink") {
  Rng rng(2);
  Matrix x = random_matrix(4, 3, rng);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 3; ++c)
      if (std::abs(x(r, c)) < 0.1) x(r, c) = 0.5;
  check_op({x}, [](Tape& t, const std::vector<Var>& v) { return t.relu(v[0]); },
           109);
}

TEST_CASE("convolution differentiates for input and kernel") {
  Rng rng(3);
  const Index B = 2, T = 7;
  const int k = 3, Cin = 2, F = 4;
  check_op({random_matrix(B * T, Cin, rng), random_matrix(k * Cin, F, rng)},
           [=](Tape& t, const std::vector<Var>& v) {
             return t.conv1d(v[0], v[1], B, T, k);
           },
           110);
}

TEST_CASE("batch normalization differentiates in both modes") {
  Rng rng(4);
  RowVector run_mean = RowVector::Zero(3);
  RowVector run_var = RowVector::Ones(3);
  for (const bool training : {true, false}) {
    CAPTURE(training);
    check_op(
        {random_matrix(6, 3, rng), random_matrix(1, 3, rng),
         random_matrix(1, 3, rng)},
        [&run_mean, &run_var, training](Tape& t, const std::vector<Var>& v) {
          return t.batchnorm(v[0], v[1], v[2], run_mean, run_var, training, 0.9,
                             1e-5);
        },
        111);
  }
}

TEST_CASE("training batchnorm normalizes with batch statistics") {
  Rng rng(41);
  const Matrix x = random_matrix(8, 2, rng);
  RowVector run_mean = RowVector::Zero(2);
  RowVector run_var = RowVector::Ones(2);
  Tape tape;
  const Var out = tape.batchnorm(tape.leaf(x), tape.constant(Matrix::Ones(1, 2)),
                                 tape.constant(Matrix::Zero(1, 2)), run_mean,
                                 run_var, true, 0.9, 1e-5);
  const Matrix y = tape.value(out);
  for (Index c = 0; c < 2; ++c) {
    CHECK(y.col(c).mean() == doctest::Approx(0.0).epsilon(1e-9));
    const double batch_mean = x.col(c).mean();
    const double biased_var = (x.col(c).array() - batch_mean).square().mean();
    CHECK((y.col(c).array().square().sum() / 8.0) ==
          doctest::Approx(biased_var / (biased_var + 1e-5)));
    // Running buffers blend in the batch statistics (unbiased variance).
    CHECK(run_mean[c] == doctest::Approx(0.1 * batch_mean));
    CHECK(run_var[c] ==
          doctest::Approx(0.9 + 0.1 * biased_var * 8.0 / 7.0));
  }
}

TEST_CASE("segment and gather ops differentiate correctly") {
  Rng rng(5);
  const Index B = 2, T = 5;
  check_op({random_matrix(B * T, 3, rng)},
           [=](Tape& t, const std::vector<Var>& v) {
             return t.segment_mean(v[0], B, T);
           },
           112);
  check_op({random_matrix(4, 3, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.tile_rows(v[0], 3); },
           113);
  check_op({random_matrix(B * 4, 3, rng), random_matrix(B, 3, rng)},
           [=](Tape& t, const std::vector<Var>& v) {
             return t.add_segment_rowvec(v[0], v[1], B, 4);
           },
           114);
  Vector w(B * 3);
  for (Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(0.1, 1.0);
  check_op({random_matrix(B * 3, 2, rng)},
           [=](Tape& t, const std::vector<Var>& v) {
             return t.weighted_rowsum_segments(v[0], w, B, 3);
           },
           115);

  // Positions strictly inside interpolation cells, away from integers.
  Matrix positions(2, 4);
  positions << 1.3, 2.6, 4.4, 5.7,
               1.6, 3.3, 3.9, 5.2;
  check_op({random_matrix(6, 2, rng), positions},
           [](Tape& t, const std::vector<Var>& v) {
             return t.gather_rows(v[0], v[1]);
           },
           116);
}

TEST_CASE("gather_rows samples rows with linear interpolation") {
  Matrix p(3, 2);
  p << 0, 10,
       1, 20,
       2, 30;
  Matrix positions(1, 3);
  positions << 2.0, 1.5, 9.0;
  Tape tape;
  const Var out =
      tape.gather_rows(tape.leaf(p), tape.constant(positions));
  const Matrix y = tape.value(out);
  CHECK(y.row(0) == p.row(1));           // integer position: exact copy
  CHECK(y(1, 0) == doctest::Approx(0.5));
  CHECK(y(1, 1) == doctest::Approx(15.0));
  CHECK(y.row(2) == p.row(2));           // clamped to the last row
}

TEST_CASE("column restructuring ops differentiate correctly") {
  Rng rng(6);
  check_op({random_matrix(3, 2, rng), random_matrix(3, 1, rng),
            random_matrix(3, 3, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.concat_cols({v[0], v[1], v[2]});
           },
           117);
  check_op({random_matrix(3, 5, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.slice_cols(v[0], 1, 3);
           },
           118);
  check_op({random_matrix(4, 3, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.select_cols(v[0], {2, 0, 1, 1});
           },
           119);
  check_op({random_matrix(3, 4, rng)},
           [](Tape& t, const std::vector<Var>& v) {
             return t.logsumexp_neg_cols(v[0]);
           },
           120);
  check_op({random_matrix(5, 2, rng)},
           [](Tape& t, const std::vector<Var>& v) { return t.time_diff(v[0]); },
           121);
}

TEST_CASE("min over columns differentiates at the argmin") {
  Matrix a(2, 3);
  a << 3.0, 1.0, 2.0,
       0.5, 4.0, 0.9;
  check_op({a},
           [](Tape& t, const std::vector<Var>& v) { return t.min_cols(v[0]); },
           122);
}

TEST_CASE("row norms differentiate away from zero rows") {
  Rng rng(7);
  Matrix a = random_matrix(4, 3, rng);
  a.array() += 3.0;  // keep rows away from the origin
  check_op({a},
           [](Tape& t, const std::vector<Var>& v) { return t.rownorm(v[0]); },
           123);

  // A zero row propagates a zero subgradient instead of NaN.
  Tape tape;
  const Var z = tape.leaf(Matrix::Zero(2, 3));
  tape.backward(tape.sum(tape.rownorm(z)));
  CHECK(tape.grad(z) == Matrix::Zero(2, 3));
}

TEST_CASE("logsumexp of negated columns is stable and correct") {
  Matrix a(1, 3);
  a << 1000.0, 1001.0, 1002.0;
  Tape tape;
  const Var out = tape.logsumexp_neg_cols(tape.leaf(a));
  // log(exp(-1000) + exp(-1001) + exp(-1002)) computed stably.
  const double expected =
      -1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0));
  CHECK(tape.value(out)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam first step follows the bias-corrected update") {
  Matrix p(2, 2);
  p << 1, 2, 3, 4;
  Matrix g(2, 2);
  g << 0.5, -0.25, 1.5, 0.0;
  Matrix expected = p;
  const AdamConfig cfg;
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 2; ++c) {
      const double m_hat = (1.0 - cfg.beta1) * g(r, c) / (1.0 - cfg.beta1);
      const double v_hat =
          (1.0 - cfg.beta2) * g(r, c) * g(r, c) / (1.0 - cfg.beta2);
      expected(r, c) -= 0.1 * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }

  AdamState state;
  Matrix actual = p;
  CHECK(adam_step({&actual}, {&g}, state, 0.1));
  CHECK(state.step == 1);
  CHECK(actual.isApprox(expected, 1e-14));
}

TEST_CASE("adam trajectory matches an independent reimplementation") {
  Rng rng(8);
  Matrix p = random_matrix(3, 2, rng);
  Matrix ref = p;
  Matrix m = Matrix::Zero(3, 2), v = Matrix::Zero(3, 2);
  AdamState state;
  const AdamConfig cfg;
  const double lr = 0.01;
  for (int step = 1; step <= 5; ++step) {
    const Matrix g = random_matrix(3, 2, rng);
    adam_step({&p}, {&g}, state, lr);
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g).eval();
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    ref.array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
    CHECK(p.isApprox(ref, 1e-13));
  }
}

TEST_CASE("adam skips steps with non-finite gradients") {
  Matrix p = Matrix::Ones(2, 2);
  const Matrix before = p;
  Matrix g = Matrix::Ones(2, 2);
  g(1, 1) = std::numeric_limits<double>::quiet_NaN();
  AdamState state;
  CHECK_FALSE(adam_step({&p}, {&g}, state, 0.1));
  CHECK(p == before);
  CHECK(state.step == 0);
}
