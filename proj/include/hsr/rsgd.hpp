#pragma once

#include "hsr/ball.hpp"
#include "hsr/params.hpp"

namespace hsr {

struct OptState {
  double learning_rate = 1e-3;
  long step = 0;
};

// Converts a Euclidean gradient at theta into the Riemannian gradient of the
// curvature-c Poincare ball: ((1 - c |theta|^2)^2 / 4) * grad.
Vec riemannian_rescale(const Vec& grad, const BallPoint& theta, double curvature);

// One Riemannian SGD step. Manifold parameters move along the exponential
// map at their current value by -lr * riemannian gradient and are projected
// back into the ball; euclidean parameters take theta - lr * grad.
// Throws NumericError naming the first non-finite gradient.
void rsgd_step(ParamStore& params, const GradientMap& grads, OptState& opt,
               const PoincareBall& ball);

}  // namespace hsr
