#pragma once

// Poincare-ball operations recorded on a Tape, built from the primitives and
// fused maps in tape.hpp. Branching (zero-norm guards, projection) mirrors
// PoincareBall so taped and plain values agree to rounding.

#include "hsr/ball.hpp"
#include "hsr/tape.hpp"

namespace hsr::ad {

class BallOps {
 public:
  explicit BallOps(double curvature, double eps = kBallEps);

  double curvature() const { return c_; }

  Var project(Var x) const;
  Var mobius_add(Var x, Var y) const;
  Var mobius_scalar(double r, Var x) const;
  // m is a matrix node.
  Var mobius_matvec(Var m, Var x) const;
  Var exp0(Var v) const;
  Var log0(Var x) const;
  Var expmap(Var x, Var v) const;
  Var dist(Var x, Var y) const;

 private:
  Var mobius_add_raw(Var x, Var y) const;

  double c_;
  double sqrt_c_;
  double eps_;
};

}  // namespace hsr::ad
