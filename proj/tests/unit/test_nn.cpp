#include <cmath>
#include <random>

#include "doctest.h"
#include "surnn/nn.hpp"

using namespace surnn;

namespace {

double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("gru step with zero weights") {
  GruCell cell(3, 4);
  Vector x = Vector::Zero(3), h = Vector::Zero(4);
  CHECK(gru_step(cell, x, h).isZero(0));
  x << 1.0, -2.0, 0.5;
  CHECK(gru_step(cell, x, h).isZero(0));
}

TEST_CASE("gru step against a scalar transcription") {
  // Two units, one input.
  GruCell cell(1, 2);
  cell.w_z << 0.5, -0.3;
  cell.w_r << 0.2, 0.7;
  cell.w_h << -0.4, 0.9;
  cell.u_z << 0.1, 0.2, -0.3, 0.4;
  cell.u_r << -0.5, 0.6, 0.7, -0.8;
  cell.u_h << 0.3, -0.2, 0.1, 0.05;
  cell.b_z << 0.01, -0.02;
  cell.b_r << 0.03, 0.04;
  cell.b_h << -0.05, 0.06;
  const double x = 0.8, h0 = -0.25, h1 = 0.6;
  Vector xv(1), hv(2);
  xv << x;
  hv << h0, h1;

  const double z0 = sigm(0.5 * x + 0.1 * h0 + 0.2 * h1 + 0.01);
  const double z1 = sigm(-0.3 * x - 0.3 * h0 + 0.4 * h1 - 0.02);
  const double r0 = sigm(0.2 * x - 0.5 * h0 + 0.6 * h1 + 0.03);
  const double r1 = sigm(0.7 * x + 0.7 * h0 - 0.8 * h1 + 0.04);
  const double c0 = std::tanh(-0.4 * x + 0.3 * r0 * h0 - 0.2 * r1 * h1 - 0.05);
  const double c1 = std::tanh(0.9 * x + 0.1 * r0 * h0 + 0.05 * r1 * h1 + 0.06);
  const Vector out = gru_step(cell, xv, hv);
  CHECK(out(0) == doctest::Approx((1 - z0) * h0 + z0 * c0).epsilon(1e-12));
  CHECK(out(1) == doctest::Approx((1 - z1) * h1 + z1 * c1).epsilon(1e-12));
}

TEST_CASE("softmax") {
  Vector a(2);
  a << 0.0, 0.0;
  CHECK(softmax(a)(0) == 0.5);
  Vector b = Vector::Constant(3, 4.2);
  for (Index i = 0; i < 3; ++i) CHECK(softmax(b)(i) == doctest::Approx(1.0 / 3));
  Vector c(2);
  c << 1.0, 0.0;
  CHECK(softmax(c)(0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(softmax(c)(1) == doctest::Approx(0.2689).epsilon(1e-4));
  Vector d(3);
  d << 1000.0, 999.0, -5.0;
  const Vector s = softmax(d);
  CHECK(s.sum() == doctest::Approx(1.0));
  CHECK(s.allFinite());
  Vector e = d.array() + 7.0;
  CHECK((softmax(e) - s).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(log_softmax(d)(0) == doctest::Approx(std::log(s(0))));
}

TEST_CASE("cross entropy gradient") {
  Vector dist(2);
  dist << 1.0, 0.0;
  CHECK(cross_entropy_grad(dist, 0).loss == 0.0);
  const Vector uni = Vector::Constant(7, 1.0 / 7);
  CHECK(cross_entropy_grad(uni, 3).loss == doctest::Approx(std::log(7.0)));

  // Gradient with respect to the logits by central differences.
  Vector logits(4);
  logits << 0.3, -1.2, 2.0, 0.1;
  const std::size_t target = 1;
  const auto g = cross_entropy_grad(softmax(logits), target);
  const double eps = 1e-5;
  for (Index i = 0; i < 4; ++i) {
    Vector lp = logits, lm = logits;
    lp(i) += eps;
    lm(i) -= eps;
    const double num = (-log_softmax(lp)(target) + log_softmax(lm)(target)) / (2 * eps);
    CHECK(std::abs(num - g.dlogits(i)) <= 1e-6 * std::max(1.0, std::abs(num)));
  }
}

TEST_CASE("sgd step") {
  Matrix p = Matrix::Constant(2, 2, 1.0), g = Matrix::Zero(2, 2);
  ParamList params{param_ref("p", p)}, grads{param_ref("g", g)};
  sgd_step(params, grads, 0.5, 1.0);
  CHECK(p.isApprox(Matrix::Constant(2, 2, 1.0)));

  g << 6.0, 0.0, 8.0, 0.0;  // norm 10
  sgd_step(params, grads, 0.0, 1.0);
  CHECK(p == Matrix::Constant(2, 2, 1.0));

  const double norm = sgd_step(params, grads, 1.0, 1.0);
  CHECK(norm == doctest::Approx(10.0));
  CHECK(p(0, 0) == doctest::Approx(1.0 - 0.6));
  CHECK(p(1, 0) == doctest::Approx(1.0 - 0.8));
  CHECK(p(0, 1) == 1.0);
}
