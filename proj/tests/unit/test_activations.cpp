#include <doctest.h>

#include <cmath>
#include <numeric>

#include "scornn/activations.hpp"
#include "scornn/tasks.hpp"
#include "support.hpp"

using namespace scornn;
using namespace scornn::test;

TEST_CASE("modrelu: hand values") {
  CHECK(modrelu(0.0, 5.0) == 0);
  CHECK(modrelu(0.0, -5.0) == 0);
  CHECK(modrelu(-2.0, -1.0) == -1);
  CHECK(modrelu(3.0, 0.5) == 3.5);
  CHECK(modrelu(0.2, -0.5) == 0);
  CHECK(modrelu(-0.2, -0.2) == 0);
}

TEST_CASE("modrelu: odd in z and saturated for b <= -max|z|") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Real z = static_cast<Real>(rng.uniform(-3, 3));
    const Real b = static_cast<Real>(rng.uniform(-2, 2));
    CHECK(modrelu(-z, b) == -modrelu(z, b));
  }
  const std::vector<Real> z = random_vector(50, rng, 2.0);
  Real zmax = 0;
  for (Real x : z) zmax = std::max(zmax, std::abs(x));
  const std::vector<Real> b(z.size(), -zmax);
  for (Real y : modrelu(z, b)) CHECK(y == 0);
}

TEST_CASE("modrelu_backward: trivial cases and the kink") {
  const std::vector<Real> z{1.5, -0.5, 0.0, 0.25, -3.0};
  const std::vector<Real> b{0.0, 0.2, 1.0, -0.25, -4.0};
  const std::vector<Real> zero(5, 0.0);
  const ModReluGrads none = modrelu_backward(z, b, zero);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(none.dz[i] == 0);
    CHECK(none.db[i] == 0);
  }
  const std::vector<Real> up{2.0, 3.0, 4.0, 5.0, 6.0};
  const ModReluGrads g = modrelu_backward(z, b, up);
  CHECK(g.dz[0] == 2.0);
  CHECK(g.db[0] == 2.0);
  CHECK(g.dz[1] == 3.0);
  CHECK(g.db[1] == -3.0);
  // z = 0 and |z| + b = 0 both take the zero subgradient.
  CHECK(g.dz[2] == 0);
  CHECK(g.db[2] == 0);
  CHECK(g.dz[3] == 0);
  CHECK(g.db[3] == 0);
  CHECK(g.dz[4] == 0);
  CHECK(g.db[4] == 0);
}

TEST_CASE("modrelu_backward matches central differences away from the kink") {
  Rng rng(11);
  const double h = 1e-6;
  double worst = 0;
  int checked = 0;
  while (checked < 500) {
    const double z = rng.uniform(-2, 2);
    const double b = rng.uniform(-1, 1);
    const double up = rng.uniform(-1, 1);
    if (std::abs(z) < 10 * h || std::abs(std::abs(z) + b) < 10 * h) continue;
    const double nz = up * (modrelu(z + h, b) - modrelu(z - h, b)) / (2 * h);
    const double nb = up * (modrelu(z, b + h) - modrelu(z, b - h)) / (2 * h);
    const std::vector<Real> zs{z}, bs{b}, us{up};
    const ModReluGrads g = modrelu_backward(zs, bs, us);
    worst = std::max({worst, rel_error(g.dz[0], nz, 1e-3), rel_error(g.db[0], nb, 1e-3)});
    ++checked;
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("batched modrelu agrees with the vector form") {
  Rng rng(12);
  const Matrix z = random_matrix(4, 6, rng, 2.0);
  const std::vector<Real> b = random_vector(6, rng);
  Matrix out(4, 6);
  modrelu_rows(z, b, out);
  const Matrix up = random_matrix(4, 6, rng);
  Matrix dz(4, 6);
  std::vector<Real> db(6, 1.0);  // accumulates into existing values
  modrelu_rows_backward(z, b, up, dz, db);
  std::vector<Real> db_ref(6, 1.0);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto row = z.row(r);
    const std::vector<Real> zr(row.begin(), row.end());
    const std::vector<Real> ur(up.row(r).begin(), up.row(r).end());
    const std::vector<Real> y = modrelu(zr, b);
    const ModReluGrads g = modrelu_backward(zr, b, ur);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(out(r, j) == y[j]);
      CHECK(dz(r, j) == g.dz[j]);
      db_ref[j] += g.db[j];
    }
  }
  for (std::size_t j = 0; j < 6; ++j) CHECK(db[j] == doctest::Approx(db_ref[j]).epsilon(1e-15));
  CHECK_THROWS_AS(modrelu_rows(z, std::vector<Real>(5), out), ShapeError);
}

TEST_CASE("softmax_xent: uniform logits give ln k, rows of the gradient sum to 0") {
  for (std::size_t k : {2, 8, 10}) {
    const Matrix logits(3, k);
    const std::vector<int> targets{0, 1, static_cast<int>(k - 1)};
    const LossResult r = softmax_xent(logits, targets);
    CHECK(r.loss == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-15));
  }
  Rng rng(5);
  const Matrix logits = random_matrix(7, 10, rng, 4.0);
  std::vector<int> targets(7);
  for (int& t : targets) t = static_cast<int>(rng.uniform_index(10));
  const LossResult r = softmax_xent(logits, targets);
  CHECK(r.loss >= 0);
  for (std::size_t i = 0; i < 7; ++i) {
    const auto row = r.grad.row(i);
    CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0)) <= 1e-16);
  }
}

TEST_CASE("softmax_xent: stable for large logits") {
  const Matrix logits{{1000, 0, -1000}};
  const LossResult r = softmax_xent(logits, std::vector<int>{0});
  CHECK(r.loss == doctest::Approx(0.0));
  CHECK(all_finite(r.grad.entries()));
  const LossResult wrong = softmax_xent(logits, std::vector<int>{1});
  CHECK(wrong.loss == doctest::Approx(1000.0));
}

TEST_CASE("softmax_xent gradient matches central differences") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix logits = random_matrix(4, 5, rng, 2.0);
    std::vector<int> targets(4);
    for (int& t : targets) t = static_cast<int>(rng.uniform_index(5));
    const LossResult r = softmax_xent(logits, targets);
    const double h = 1e-5;
    double worst = 0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
      const Real orig = logits.entries()[k];
      logits.entries()[k] = orig + h;
      const double up = softmax_xent(logits, targets).loss;
      logits.entries()[k] = orig - h;
      const double down = softmax_xent(logits, targets).loss;
      logits.entries()[k] = orig;
      worst = std::max(worst, rel_error(r.grad.entries()[k], (up - down) / (2 * h), 1e-3));
    }
    CHECK(worst < 1e-7);
  }
}

TEST_CASE("softmax_xent: target range and shapes") {
  const Matrix logits(2, 3);
  CHECK_THROWS_AS(softmax_xent(logits, std::vector<int>{0, 3}), TargetRangeError);
  CHECK_THROWS_AS(softmax_xent(logits, std::vector<int>{-1, 0}), TargetRangeError);
  CHECK_THROWS_AS(softmax_xent(logits, std::vector<int>{0}), ShapeError);
}

TEST_CASE("copying random-guess strategy scores 10 ln 8 / (T + 20)") {
  // Blank steps predicted with certainty; the ten recall steps uniform over 1..8.
  for (std::size_t length : {1000, 2000}) {
    const std::size_t steps = length + 20;
    Matrix logits(steps, 10);
    std::vector<int> targets(steps, 0);
    for (std::size_t t = 0; t < steps; ++t) {
      if (t + 10 < steps) {
        logits(t, 0) = 100;
      } else {
        for (std::size_t c = 1; c <= 8; ++c) logits(t, c) = 100;
        targets[t] = static_cast<int>(1 + t % 8);
      }
    }
    const double loss = softmax_xent(logits, targets).loss;
    const double expected = length == 1000 ? 0.020388 : 0.010297;
    CHECK(loss == doctest::Approx(expected).epsilon(5e-5));
    CHECK(copying_baseline(length) == doctest::Approx(loss).epsilon(1e-12));
  }
}

TEST_CASE("mse: values and gradient") {
  const Matrix p{{1.0}, {2.0}, {3.0}};
  const LossResult same = mse(p, p);
  CHECK(same.loss == 0);
  for (Real g : same.grad.entries()) CHECK(g == 0);
  const Matrix t{{0.0}, {2.0}, {5.0}};
  const LossResult r = mse(p, t);
  CHECK(r.loss == doctest::Approx(5.0 / 3.0).epsilon(1e-15));
  CHECK(r.grad(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.grad(2, 0) == doctest::Approx(-4.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(mse(p, Matrix(2, 1)), ShapeError);

  Rng rng(8);
  Matrix pred = random_matrix(6, 1, rng);
  const Matrix target = random_matrix(6, 1, rng);
  const LossResult g = mse(pred, target);
  const double h = 1e-4;  // quadratic: central differences have no truncation error
  double worst = 0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const Real orig = pred.entries()[k];
    pred.entries()[k] = orig + h;
    const double up = mse(pred, target).loss;
    pred.entries()[k] = orig - h;
    const double down = mse(pred, target).loss;
    pred.entries()[k] = orig;
    worst = std::max(worst, rel_error(g.grad.entries()[k], (up - down) / (2 * h), 1e-3));
  }
  CHECK(worst < 1e-8);
}
