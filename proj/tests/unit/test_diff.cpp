#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "hsr/ad_ball.hpp"
#include "hsr/errors.hpp"
#include "hsr/rsgd.hpp"
#include "hsr/tape.hpp"

using namespace hsr;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

using Builder = std::function<ad::Var(ad::Tape&, ad::Var)>;

// Largest relative error between the taped gradient and central differences.
double fd_error(const Builder& f, const Vec& x0, double h = 1e-6) {
  ad::Tape tape;
  const ad::Var x = tape.variable(x0);
  const ad::Var loss = f(tape, x);
  const Vec g = tape.backward(loss)[x];
  double worst = 0.0;
  for (Eigen::Index k = 0; k < x0.size(); ++k) {
    Vec p = x0;
    Vec m = x0;
    p[k] += h;
    m[k] -= h;
    ad::Tape tp;
    ad::Tape tm;
    const double fp = f(tp, tp.variable(p)).scalar();
    const double fm = f(tm, tm.variable(m)).scalar();
    const double numeric = (fp - fm) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(g[k]), 1e-6});
    worst = std::max(worst, std::abs(numeric - g[k]) / scale);
  }
  return worst;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double norm) {
  std::normal_distribution<double> n01;
  Vec v(n);
  for (auto& x : v) x = n01(rng);
  return v * (norm / v.norm());
}

}  // namespace

TEST_SUITE("diff") {

TEST_CASE("squared norm gradient") {
  ad::Tape tape;
  const ad::Var x = tape.variable(v2(0.3, 0.4));
  const Vec g = tape.backward(ad::squared_norm(x))[x];
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
}

TEST_CASE("constant loss and unused leaves give zero gradients") {
  ad::Tape tape;
  const ad::Var x = tape.variable(v2(0.3, 0.4));
  const ad::Var unused = tape.variable(v2(1.0, 2.0));
  const ad::Var loss = ad::sum(tape.constant(v2(1.0, 1.0)));
  const ad::Adjoints adj = tape.backward(loss);
  CHECK(adj[x].isZero(0.0));
  CHECK(adj[unused].isZero(0.0));
  ad::Tape t2;
  const ad::Var y = t2.variable(v2(0.3, 0.4));
  const ad::Var z = t2.variable(v2(0.1, 0.1));
  CHECK(t2.backward(ad::squared_norm(y))[z].isZero(0.0));
}

TEST_CASE("shared subexpressions accumulate") {
  ad::Tape tape;
  const ad::Var x = tape.variable(v2(1.5, -2.0));
  const ad::Var y = ad::add(x, x);
  const Vec g = tape.backward(ad::sum(y))[x];
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 2.0);
}

TEST_CASE("non-scalar loss is rejected") {
  ad::Tape tape;
  const ad::Var x = tape.variable(v2(0.3, 0.4));
  CHECK_THROWS_AS(tape.backward(x), UsageError);
}

TEST_CASE("dist gradient matches finite differences") {
  std::mt19937_64 rng(21);
  for (const double c : {0.5, 1.0, 2.0}) {
    const ad::BallOps ops(c);
    for (int k = 0; k < 50; ++k) {
      const Vec y0 = random_vec(rng, 4, 0.8 / std::sqrt(c) * (k + 1) / 51.0);
      const Vec x0 = random_vec(rng, 4, 0.9 / std::sqrt(c) * (50 - k) / 51.0);
      const Builder f = [&](ad::Tape& t, ad::Var x) { return ops.dist(x, t.constant(y0)); };
      CHECK(fd_error(f, x0) < 1e-4);
      const Builder g = [&](ad::Tape& t, ad::Var y) { return ops.dist(t.constant(x0), y); };
      CHECK(fd_error(g, y0) < 1e-4);
    }
  }
}

TEST_CASE("dist gradient at coincident points is zero") {
  const ad::BallOps ops(1.0);
  ad::Tape tape;
  const ad::Var x = tape.variable(v2(0.2, -0.1));
  const ad::Var y = tape.variable(v2(0.2, -0.1));
  const ad::Adjoints adj = tape.backward(ops.dist(x, y));
  CHECK(adj[x].isZero(0.0));
  CHECK(adj[y].isZero(0.0));
}

TEST_CASE("ball maps match finite differences") {
  std::mt19937_64 rng(23);
  const Vec w = random_vec(rng, 5, 1.0);
  for (const double c : {0.5, 1.0, 2.0}) {
    const ad::BallOps ops(c);
    for (int k = 0; k < 30; ++k) {
      const Vec x0 = random_vec(rng, 5, 0.95 / std::sqrt(c) * (k + 1) / 31.0);
      const Vec y0 = random_vec(rng, 5, 0.5 / std::sqrt(c));
      const Vec v0 = random_vec(rng, 5, 0.1 * (k + 1));
      CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ops.log0(x), t.constant(w)); }, x0) < 1e-4);
      CHECK(fd_error([&](ad::Tape& t, ad::Var v) { return ad::dot(ops.exp0(v), t.constant(w)); }, v0) < 1e-4);
      CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ops.mobius_add(x, t.constant(y0)), t.constant(w)); }, x0) < 1e-4);
      CHECK(fd_error([&](ad::Tape& t, ad::Var y) { return ad::dot(ops.mobius_add(t.constant(x0), y), t.constant(w)); }, y0) < 1e-4);
      CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ops.mobius_scalar(1.7, x), t.constant(w)); }, x0) < 1e-4);
    }
  }
}

TEST_CASE("series branches near the origin") {
  const ad::BallOps ops(1.0);
  const Vec w = (Vec(3) << 0.3, -0.7, 0.2).finished();
  for (const double n : {1e-9, 1e-6, 1e-4, 2e-3}) {
    const Vec x0 = (Vec(3) << n, -0.5 * n, 0.25 * n).finished();
    const Vec y0 = (Vec(3) << 0.9 * n, -0.45 * n, 0.3 * n).finished();
    CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ops.log0(x), t.constant(w)); }, x0, 1e-10) < 1e-4);
    CHECK(fd_error([&](ad::Tape& t, ad::Var v) { return ad::dot(ops.exp0(v), t.constant(w)); }, x0, 1e-10) < 1e-4);
    ad::Tape tape;
    const ad::Var x = tape.variable(x0);
    const double d = ops.dist(x, tape.constant(y0)).scalar();
    CHECK(d == doctest::Approx(PoincareBall(1.0).dist(BallPoint(x0), BallPoint(y0))).epsilon(1e-12));
  }
}

TEST_CASE("matrix products and matrix gradients") {
  std::mt19937_64 rng(29);
  Mat m0(3, 4);
  for (auto& v : m0.reshaped()) v = std::normal_distribution<double>()(rng);
  const Vec x0 = random_vec(rng, 4, 0.7);
  const Vec w = random_vec(rng, 3, 1.0);
  const Vec x1 = random_vec(rng, 3, 0.7);
  const Vec w1 = random_vec(rng, 4, 1.0);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::matvec(t.matrix_variable(m0), x), t.constant(w)); }, x0) < 1e-6);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::matvec_t(t.matrix_variable(m0), x), t.constant(w1)); }, x1) < 1e-6);
  ad::Tape tape;
  const ad::Var m = tape.matrix_variable(m0);
  const ad::Var loss = ad::dot(ad::matvec(m, tape.constant(x0)), tape.constant(w));
  const Mat g = tape.backward(loss).matrix(m);
  CHECK((g - w * x0.transpose()).norm() < 1e-14);

  Mat big(6, 2);
  for (auto& v : big.reshaped()) v = std::normal_distribution<double>()(rng);
  const Vec xr = random_vec(rng, 3, 1.0);
  const Vec wr = random_vec(rng, 2, 1.0);
  ad::Tape t2;
  const ad::Var bm = t2.matrix_variable(big);
  const ad::Var xv = t2.variable(xr);
  const ad::Var out = ad::matvec_t_rows(bm, xv, 3);
  CHECK((out.value() - big.bottomRows(3).transpose() * xr).norm() < 1e-14);
  const ad::Adjoints adj = t2.backward(ad::dot(out, t2.constant(wr)));
  const Mat gm = adj.matrix(bm);
  CHECK(gm.topRows(3).isZero(0.0));
  CHECK((gm.bottomRows(3) - xr * wr.transpose()).norm() < 1e-14);
  CHECK((adj[xv] - big.bottomRows(3) * wr).norm() < 1e-14);
}

TEST_CASE("elementwise primitives match finite differences") {
  std::mt19937_64 rng(31);
  const Vec x0 = random_vec(rng, 4, 0.8);
  const Vec w = random_vec(rng, 4, 1.0);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::tanh(x), t.constant(w)); }, x0) < 1e-6);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::atanh(x), t.constant(w)); }, x0) < 1e-6);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::softmax(x, 0.1), t.constant(w)); }, x0) < 1e-5);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::leaky_relu(x, 0.01), t.constant(w)); }, x0) < 1e-6);
  CHECK(fd_error([&](ad::Tape&, ad::Var x) { return ad::sum(ad::log_sigmoid(x)); }, x0) < 1e-6);
  CHECK(fd_error([&](ad::Tape&, ad::Var x) { return ad::norm(x); }, x0) < 1e-6);
  CHECK(fd_error([&](ad::Tape& t, ad::Var x) { return ad::dot(ad::scale_by(x, ad::norm(x)), t.constant(w)); }, x0) < 1e-6);
}

TEST_CASE("riemannian rescale") {
  const Vec g = v2(1.0, -2.0);
  CHECK((riemannian_rescale(g, BallPoint(Vec::Zero(2)), 1.0) - g / 4).norm() < 1e-16);
  CHECK((riemannian_rescale(g, BallPoint(v2(0.5, 0.0)), 1.0) - 0.140625 * g).norm() < 1e-16);
  CHECK(riemannian_rescale(Vec::Zero(2), BallPoint(v2(0.5, 0.0)), 1.0).isZero(0.0));
}

TEST_CASE("rsgd step examples") {
  const PoincareBall ball(1.0);
  ParamStore params(1, 1, 2, 0, Geometry::kHyperbolic);
  params.users().setZero();
  params.items().col(0) = v2(0.1, 0.2);
  const ParamStore before = params;
  OptState opt{0.1, 0};
  rsgd_step(params, {}, opt, ball);
  CHECK(params == before);
  rsgd_step(params, {{ParamKey{ParamKind::kUser, 0}, v2(0.0, 0.0)}}, opt, ball);
  CHECK(params == before);

  rsgd_step(params, {{ParamKey{ParamKind::kUser, 0}, v2(1.0, 0.0)}}, opt, ball);
  const Vec expected = ball.expmap(BallPoint(Vec::Zero(2)), TangentVec(v2(-0.025, 0.0))).coords();
  CHECK((params.users().col(0) - expected).norm() < 1e-16);
  CHECK(params.users()(0, 0) == doctest::Approx(-std::tanh(0.025)).epsilon(1e-14));
  CHECK(params.users()(1, 0) == 0.0);
}

TEST_CASE("rsgd rejects non-finite gradients naming the parameter") {
  const PoincareBall ball(1.0);
  ParamStore params(2, 1, 2, 0, Geometry::kHyperbolic);
  OptState opt{0.1, 0};
  const ParamKey key{ParamKind::kUser, 1};
  try {
    rsgd_step(params, {{key, v2(NAN, 0.0)}}, opt, ball);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find(to_string(key)) != std::string::npos);
  }
}

TEST_CASE("manifold parameters stay in the ball over many random steps") {
  const PoincareBall ball(1.0);
  ParamStore params(3, 2, 4, 0, Geometry::kHyperbolic);
  params.users().setZero();
  params.items().setZero();
  OptState opt{0.5, 0};
  std::mt19937_64 rng(37);
  const double limit = ball.max_norm() * (1 + 1e-12);
  bool inside = true;
  for (int step = 0; step < 10000; ++step) {
    GradientMap g;
    for (const auto& key : params.keys()) g[key] = random_vec(rng, 4, std::exp(std::uniform_real_distribution<double>(-3, 5)(rng)));
    rsgd_step(params, g, opt, ball);
    for (Eigen::Index j = 0; j < params.users().cols(); ++j) inside = inside && params.users().col(j).norm() <= limit;
    for (Eigen::Index j = 0; j < params.items().cols(); ++j) inside = inside && params.items().col(j).norm() <= limit;
  }
  CHECK(inside);
}

TEST_CASE("euclidean parameters take plain gradient steps") {
  const PoincareBall ball(1.0);
  ParamStore params(1, 1, 2, 1, Geometry::kHyperbolic);
  params.layers()[0].setIdentity();
  OptState opt{0.1, 0};
  const ParamKey key{ParamKind::kLayer, 0};
  const Vec g = (Vec(4) << 1.0, 2.0, 3.0, 4.0).finished();
  const Vec before = params.get(key);
  rsgd_step(params, {{key, g}}, opt, ball);
  CHECK((params.get(key) - (before - 0.1 * g)).norm() < 1e-16);
}

}  // TEST_SUITE
