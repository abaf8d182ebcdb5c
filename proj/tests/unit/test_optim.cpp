#include <doctest.h>

#include <cmath>
#include <limits>

#include "scornn/cayley.hpp"
#include "scornn/optim.hpp"
#include "scornn/stiefel.hpp"
#include "support.hpp"

using namespace scornn;
using namespace scornn::test;

namespace {

/// Scalar Adam written out from the update equations.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0, v = 0;
  int t = 0;
  double step(double p, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return p - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("optimizer kind names") {
  for (OptimizerKind k : {OptimizerKind::Sgd, OptimizerKind::Rmsprop, OptimizerKind::Adam})
    CHECK(parse_optimizer_kind(to_string(k)) == k);
  CHECK_THROWS(parse_optimizer_kind("adagrad"));
}

TEST_CASE("SGD: p - lr g exactly") {
  ParamGroup group("w", 3, OptimizerSettings{OptimizerKind::Sgd, 0.25});
  std::vector<Real> p{1.0, -2.0, 0.5};
  const std::vector<Real> g{4.0, 1.0, -2.0};
  group.step(p, g);
  CHECK(p == std::vector<Real>{0.0, -2.25, 1.0});
  CHECK(group.steps_taken() == 1);
}

TEST_CASE("zero gradient: parameters unchanged, accumulators only decay") {
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Rmsprop, OptimizerKind::Adam}) {
    ParamGroup group("w", 2, OptimizerSettings{kind, 0.1});
    std::vector<Real> p{0.3, -0.7};
    group.step(p, std::vector<Real>{1.0, -1.0});
    const std::vector<Real> before = p;
    const std::vector<Real> m(group.first_moment().begin(), group.first_moment().end());
    const std::vector<Real> v(group.second_moment().begin(), group.second_moment().end());
    group.step(p, std::vector<Real>{0.0, 0.0});
    CAPTURE(to_string(kind));
    if (kind == OptimizerKind::Sgd) {
      CHECK(p == before);
    } else if (kind == OptimizerKind::Rmsprop) {
      CHECK(p == before);
      for (std::size_t i = 0; i < 2; ++i) CHECK(group.second_moment()[i] == doctest::Approx(0.9 * v[i]));
    } else {
      // Adam keeps moving on momentum; both moments decay.
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(group.first_moment()[i] == doctest::Approx(0.9 * m[i]));
        CHECK(group.second_moment()[i] == doctest::Approx(0.999 * v[i]));
      }
    }
  }
}

TEST_CASE("RMSprop matches the scalar recursion") {
  ParamGroup group("w", 1, OptimizerSettings{OptimizerKind::Rmsprop, 1e-2});
  std::vector<Real> p{1.0};
  double ref = 1.0, s = 0;
  const double grads[] = {0.5, -1.5, 2.0, 0.1, -0.3};
  for (double g : grads) {
    group.step(p, std::vector<Real>{g});
    s = 0.9 * s + 0.1 * g * g;
    ref -= 1e-2 * g / (std::sqrt(s) + 1e-8);
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("Adam matches a scalar oracle over 5 steps") {
  OptimizerSettings settings{OptimizerKind::Adam, 1e-3};
  ParamGroup group("w", 2, settings);
  std::vector<Real> p{0.4, -1.0};
  ScalarAdam o0{1e-3, 0.9, 0.999, 1e-8}, o1 = o0;
  double r0 = 0.4, r1 = -1.0;
  const double g0[] = {0.3, -0.2, 1.0, 0.0, 5.0};
  const double g1[] = {-2.0, -2.0, 0.5, 1e-3, -0.7};
  for (int k = 0; k < 5; ++k) {
    group.step(p, std::vector<Real>{g0[k], g1[k]});
    r0 = o0.step(r0, g0[k]);
    r1 = o1.step(r1, g1[k]);
    CHECK(p[0] == doctest::Approx(r0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(r1).epsilon(1e-14));
  }
  // The first bias-corrected step moves each entry by lr·sign(g).
  ParamGroup fresh("w", 1, settings);
  std::vector<Real> q{0.0};
  fresh.step(q, std::vector<Real>{-42.0});
  CHECK(q[0] == doctest::Approx(1e-3).epsilon(1e-9));
}

TEST_CASE("non-finite gradients and shape mismatches are rejected before any change") {
  ParamGroup group("w", 3, OptimizerSettings{OptimizerKind::Adam, 0.1});
  std::vector<Real> p{1, 2, 3};
  const std::vector<Real> bad{0.5, std::numeric_limits<Real>::quiet_NaN(), 0.5};
  CHECK_THROWS_AS(group.step(p, bad), NonFiniteGradientError);
  const std::vector<Real> inf{std::numeric_limits<Real>::infinity(), 0, 0};
  CHECK_THROWS_AS(group.step(p, inf), NonFiniteGradientError);
  CHECK(p == std::vector<Real>{1, 2, 3});
  CHECK(group.steps_taken() == 0);
  for (Real m : group.first_moment()) CHECK(m == 0);
  CHECK_THROWS_AS(group.step(p, std::vector<Real>{1, 2}), ShapeError);
  CHECK_THROWS_AS(ParamGroup("w", 2, OptimizerSettings{OptimizerKind::Sgd, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("restore_state reproduces the continuation") {
  ParamGroup a("w", 2, OptimizerSettings{OptimizerKind::Adam, 1e-2});
  std::vector<Real> pa{0.1, 0.2};
  a.step(pa, std::vector<Real>{1, -1});
  a.step(pa, std::vector<Real>{0.5, 2});
  ParamGroup b("w", 2, OptimizerSettings{OptimizerKind::Adam, 1e-2});
  b.restore_state({a.first_moment().begin(), a.first_moment().end()},
                  {a.second_moment().begin(), a.second_moment().end()}, a.steps_taken());
  std::vector<Real> pb = pa;
  a.step(pa, std::vector<Real>{-0.3, 0.7});
  b.step(pb, std::vector<Real>{-0.3, 0.7});
  CHECK(pa == pb);
}

TEST_CASE("step_skew") {
  Rng rng(7);
  const std::size_t n = 6;
  auto [a, d] = init_block_diag<Real>(n, n / 2, rng);

  SUBCASE("zero gradient leaves W bitwise unchanged") {
    ParamGroup group("skew", a.size(), OptimizerSettings{OptimizerKind::Rmsprop, 1e-3});
    const Matrix w0 = scaled_cayley(a, d);
    CHECK(step_skew(group, a, d, SkewParams(n)) == w0);
  }
  SUBCASE("SGD then inverse transform recovers v - lr grad") {
    const Real lr = 0.05;
    ParamGroup group("skew", a.size(), OptimizerSettings{OptimizerKind::Sgd, lr});
    const SkewParams before = a;
    const SkewParams g = random_skew(n, rng);
    const Matrix w = step_skew(group, a, d, g);
    const SkewParams recovered = inverse_scaled_cayley(w, d);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k] == before[k] - lr * g[k]);
      CHECK(recovered[k] == doctest::Approx(before[k] - lr * g[k]).epsilon(1e-12));
    }
    CHECK(w == scaled_cayley(a, d));
  }
  SUBCASE("shape mismatch") {
    ParamGroup group("skew", a.size(), OptimizerSettings{OptimizerKind::Sgd, 0.1});
    CHECK_THROWS_AS(step_skew(group, a, d, SkewParams(n + 1)), ShapeError);
  }
}

TEST_CASE("10^4 RMSprop skew steps keep W orthogonal to 1e-12 n") {
  const std::size_t n = 16;
  Rng rng(8);
  auto [a, d] = init_block_diag<Real>(n, n / 2, rng);
  ParamGroup group("skew", a.size(), OptimizerSettings{OptimizerKind::Rmsprop, 1e-3});
  Matrix w = scaled_cayley(a, d);
  double worst = 0;
  for (int k = 0; k < 10000; ++k) {
    const Matrix g = random_matrix(n, n, rng);
    w = step_skew(group, a, d, grad_skew(g, a, w, d));
    worst = std::max(worst, static_cast<double>(orthogonality_score(w)));
  }
  CHECK(worst <= 1e-12 * n);
}

TEST_CASE("steps are deterministic and instantiate for float and long double") {
  auto run = [](auto zero) {
    using T = decltype(zero);
    BasicParamGroup<T> group("w", 3, OptimizerSettings{OptimizerKind::Adam, 1e-2});
    std::vector<T> p{T(1), T(2), T(3)};
    for (int k = 0; k < 20; ++k) {
      const std::vector<T> g{T(k) / 7, -T(k) / 3, T(1)};
      group.step(p, g);
    }
    return p;
  };
  CHECK(run(0.0) == run(0.0));
  CHECK(run(0.0f) == run(0.0f));
  const auto ld = run(0.0L);
  const auto dd = run(0.0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(static_cast<double>(ld[i]) == doctest::Approx(dd[i]).epsilon(1e-12));
}
