#include "hsr/ball.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a != b) {
    throw UsageError(std::string(op) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
  }
}

}  // namespace

double safe_tanh(double x) { return std::tanh(std::clamp(x, -kTanhMax, kTanhMax)); }

double safe_atanh(double x) { return std::atanh(std::clamp(x, -kAtanhMax, kAtanhMax)); }

PoincareBall::PoincareBall(double curvature, double eps)
    : c_(curvature), sqrt_c_(std::sqrt(curvature)), eps_(eps) {
  if (!(curvature > 0.0) || !std::isfinite(curvature)) {
    throw UsageError("PoincareBall: curvature must be positive and finite");
  }
  if (!(eps > 0.0 && eps < 1.0)) {
    throw UsageError("PoincareBall: eps must lie in (0, 1)");
  }
}

bool PoincareBall::contains(const Vec& x) const { return c_ * x.squaredNorm() < 1.0; }

BallPoint PoincareBall::origin(Eigen::Index dim) const { return BallPoint(Vec::Zero(dim)); }

BallPoint PoincareBall::project(const Vec& x) const {
  if (!x.allFinite()) {
    throw NumericError("project: non-finite coordinates");
  }
  const double bound = 1.0 - eps_;
  const double norm = x.norm();
  if (sqrt_c_ * norm >= bound) {
    return BallPoint(x * (max_norm() / norm));
  }
  return BallPoint(x);
}

BallPoint PoincareBall::point(const Vec& x) const {
  if (!contains(x)) {
    throw UsageError("point: coordinates lie outside the ball");
  }
  return project(x);
}

Vec PoincareBall::mobius_add_raw(const Vec& x, const Vec& y) const {
  require_same_dim(x.size(), y.size(), "mobius_add");
  const double xy = x.dot(y);
  const double x2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  const double num_x = 1.0 + 2.0 * c_ * xy + c_ * y2;
  const double num_y = 1.0 - c_ * x2;
  const double denom = 1.0 + 2.0 * c_ * xy + c_ * c_ * x2 * y2;
  return (num_x * x + num_y * y) / denom;
}

BallPoint PoincareBall::mobius_add(const BallPoint& x, const BallPoint& y) const {
  return project(mobius_add_raw(x.coords(), y.coords()));
}

BallPoint PoincareBall::mobius_neg(const BallPoint& x) const { return BallPoint(-x.coords()); }

BallPoint PoincareBall::mobius_scalar(double r, const BallPoint& x) const {
  const double norm = x.norm();
  if (norm < kZeroNorm) {
    return origin(x.dim());
  }
  const double scaled = safe_tanh(r * safe_atanh(sqrt_c_ * norm)) / sqrt_c_;
  return project(x.coords() * (scaled / norm));
}

BallPoint PoincareBall::mobius_matvec(const Mat& m, const BallPoint& x) const {
  require_same_dim(m.cols(), x.dim(), "mobius_matvec");
  const Vec mx = m * x.coords();
  const double mx_norm = mx.norm();
  const double x_norm = x.norm();
  if (mx_norm < kZeroNorm || x_norm < kZeroNorm) {
    return origin(m.rows());
  }
  const double scaled = safe_tanh(mx_norm / x_norm * safe_atanh(sqrt_c_ * x_norm)) / sqrt_c_;
  return project(mx * (scaled / mx_norm));
}

BallPoint PoincareBall::exp0(const TangentVec& v) const {
  const double norm = v.norm();
  if (norm < kZeroNorm) {
    return project(v.coords());
  }
  return project(v.coords() * (safe_tanh(sqrt_c_ * norm) / (sqrt_c_ * norm)));
}

TangentVec PoincareBall::log0(const BallPoint& x) const {
  const double norm = x.norm();
  if (norm < kZeroNorm) {
    return TangentVec(x.coords());
  }
  return TangentVec(x.coords() * (safe_atanh(sqrt_c_ * norm) / (sqrt_c_ * norm)));
}

double PoincareBall::conformal_factor(const BallPoint& x) const {
  return 2.0 / (1.0 - c_ * x.coords().squaredNorm());
}

BallPoint PoincareBall::expmap(const BallPoint& x, const TangentVec& v) const {
  require_same_dim(x.dim(), v.dim(), "expmap");
  const double norm = v.norm();
  if (norm < kZeroNorm) {
    return project(x.coords());
  }
  const double lambda = conformal_factor(x);
  const Vec step = v.coords() * (safe_tanh(sqrt_c_ * lambda * norm / 2.0) / (sqrt_c_ * norm));
  return project(mobius_add_raw(x.coords(), step));
}

TangentVec PoincareBall::logmap(const BallPoint& x, const BallPoint& y) const {
  require_same_dim(x.dim(), y.dim(), "logmap");
  const Vec diff = mobius_add_raw(-x.coords(), y.coords());
  const double norm = diff.norm();
  if (norm < kZeroNorm) {
    return TangentVec(Vec::Zero(x.dim()));
  }
  const double lambda = conformal_factor(x);
  return TangentVec(diff * (2.0 / (sqrt_c_ * lambda) * safe_atanh(sqrt_c_ * norm) / norm));
}

double PoincareBall::dist(const BallPoint& x, const BallPoint& y) const {
  require_same_dim(x.dim(), y.dim(), "dist");
  if (x.coords() == y.coords()) return 0.0;
  const double norm = mobius_add_raw(-x.coords(), y.coords()).norm();
  return 2.0 / sqrt_c_ * safe_atanh(sqrt_c_ * norm);
}

}  // namespace hsr
