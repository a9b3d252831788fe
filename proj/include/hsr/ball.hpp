#pragma once

// Gyrovector arithmetic on the Poincare ball of curvature c.
//
// The ball of curvature c is the open set { x : c |x|^2 < 1 }. Every
// operation that produces a ball point finishes with a projection that keeps
// the point at most (1 - eps) / sqrt(c) from the origin, so downstream
// atanh evaluations never see an argument of 1.

#include <Eigen/Dense>

namespace hsr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kBallEps = 1e-5;
inline constexpr double kAtanhMax = 1.0 - 1e-15;
inline constexpr double kTanhMax = 15.0;
inline constexpr double kZeroNorm = 1e-15;

// Clamped versions of tanh/atanh shared by every code path (plain and taped).
double safe_tanh(double x);
double safe_atanh(double x);

class BallPoint {
 public:
  BallPoint() = default;
  explicit BallPoint(Vec coords) : coords_(std::move(coords)) {}

  const Vec& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double norm() const { return coords_.norm(); }

 private:
  Vec coords_;
};

class TangentVec {
 public:
  TangentVec() = default;
  explicit TangentVec(Vec coords) : coords_(std::move(coords)) {}

  const Vec& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double norm() const { return coords_.norm(); }

 private:
  Vec coords_;
};

class PoincareBall {
 public:
  explicit PoincareBall(double curvature, double eps = kBallEps);

  double curvature() const { return c_; }
  double eps() const { return eps_; }
  // Largest admissible Euclidean norm after projection.
  double max_norm() const { return (1.0 - eps_) / sqrt_c_; }

  bool contains(const Vec& x) const;
  BallPoint origin(Eigen::Index dim) const;

  // Rescales x onto the radius (1-eps)/sqrt(c) sphere when it lies on or
  // beyond it. Throws NumericError for non-finite input.
  BallPoint project(const Vec& x) const;
  // Validates an in-ball vector without altering it (beyond projection).
  BallPoint point(const Vec& x) const;

  BallPoint mobius_add(const BallPoint& x, const BallPoint& y) const;
  BallPoint mobius_neg(const BallPoint& x) const;
  BallPoint mobius_scalar(double r, const BallPoint& x) const;
  BallPoint mobius_matvec(const Mat& m, const BallPoint& x) const;

  BallPoint exp0(const TangentVec& v) const;
  TangentVec log0(const BallPoint& x) const;

  // General base-point maps. The model only needs the origin; the optimizer
  // retracts with expmap at the current parameter.
  double conformal_factor(const BallPoint& x) const;
  BallPoint expmap(const BallPoint& x, const TangentVec& v) const;
  TangentVec logmap(const BallPoint& x, const BallPoint& y) const;

  double dist(const BallPoint& x, const BallPoint& y) const;

  // Mobius addition without the final projection; dist uses it so that the
  // stability margin does not cap distances.
  Vec mobius_add_raw(const Vec& x, const Vec& y) const;

 private:
  double c_;
  double sqrt_c_;
  double eps_;
};

}  // namespace hsr
