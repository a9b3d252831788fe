#include "hsr/ad_ball.hpp"

#include <cmath>

#include "hsr/errors.hpp"

namespace hsr::ad {

BallOps::BallOps(double curvature, double eps)
    : c_(curvature), sqrt_c_(std::sqrt(curvature)), eps_(eps) {
  if (!(curvature > 0.0)) {
    throw UsageError("BallOps: curvature must be positive");
  }
}

Var BallOps::project(Var x) const {
  if (!x.value().allFinite()) {
    throw NumericError("project: non-finite coordinates");
  }
  const double n = x.value().norm();
  if (sqrt_c_ * n >= 1.0 - eps_) {
    return scale_by(x, scale(recip(norm(x)), (1.0 - eps_) / sqrt_c_));
  }
  return x;
}

Var BallOps::mobius_add_raw(Var x, Var y) const {
  const Var xy = dot(x, y);
  const Var x2 = squared_norm(x);
  const Var y2 = squared_norm(y);
  const Var two_cxy = scale(xy, 2.0 * c_);
  const Var num_x = add_const(add(two_cxy, scale(y2, c_)), 1.0);
  const Var num_y = add_const(scale(x2, -c_), 1.0);
  const Var denom = add_const(add(two_cxy, scale(mul(x2, y2), c_ * c_)), 1.0);
  const Var inv = recip(denom);
  return add(scale_by(x, mul(num_x, inv)), scale_by(y, mul(num_y, inv)));
}

Var BallOps::mobius_add(Var x, Var y) const {
  if (x.size() != y.size()) {
    throw UsageError("mobius_add: dimension mismatch");
  }
  return project(mobius_add_raw(x, y));
}

Var BallOps::mobius_scalar(double r, Var x) const {
  const Var n = norm(x);
  if (n.scalar() < kZeroNorm) {
    return x.tape()->constant(Vec::Zero(x.size()));
  }
  const Var scaled = scale(tanh(scale(atanh(scale(n, sqrt_c_)), r)), 1.0 / sqrt_c_);
  return project(scale_by(x, mul(scaled, recip(n))));
}

Var BallOps::mobius_matvec(Var m, Var x) const {
  // M (x) x = exp0(M log0 x)
  return exp0(matvec(m, log0(x)));
}

Var BallOps::exp0(Var v) const { return ad::exp0(v, c_, eps_); }

Var BallOps::log0(Var x) const { return ad::log0(x, c_); }

Var BallOps::expmap(Var x, Var v) const {
  const Var n = norm(v);
  if (n.scalar() < kZeroNorm) {
    return project(x);
  }
  // lambda_x / 2 = 1 / (1 - c |x|^2)
  const Var half_lambda = recip(add_const(scale(squared_norm(x), -c_), 1.0));
  const Var t = tanh(scale(mul(half_lambda, n), sqrt_c_));
  const Var step = scale_by(v, mul(t, recip(scale(n, sqrt_c_))));
  return project(mobius_add_raw(x, step));
}

Var BallOps::dist(Var x, Var y) const {
  if (x.size() != y.size()) {
    throw UsageError("dist: dimension mismatch");
  }
  return ball_dist(x, y, c_);
}

}  // namespace hsr::ad
