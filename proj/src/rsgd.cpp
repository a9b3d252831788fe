#include "hsr/rsgd.hpp"

#include "hsr/errors.hpp"

namespace hsr {

Vec riemannian_rescale(const Vec& grad, const BallPoint& theta, double curvature) {
  if (grad.size() != theta.dim()) {
    throw UsageError("riemannian_rescale: dimension mismatch");
  }
  const double shrink = 1.0 - curvature * theta.coords().squaredNorm();
  return grad * (shrink * shrink / 4.0);
}

void rsgd_step(ParamStore& params, const GradientMap& grads, OptState& opt,
               const PoincareBall& ball) {
  if (!(opt.learning_rate > 0.0)) {
    throw UsageError("rsgd_step: learning rate must be positive");
  }
  for (const auto& [key, grad] : grads) {
    if (!grad.allFinite()) {
      throw NumericError("rsgd_step: non-finite gradient for " + to_string(key));
    }
  }
  for (const auto& [key, grad] : grads) {
    const Vec theta = params.get(key);
    if (params.tag(key) == ParamTag::kManifold) {
      const BallPoint point(theta);
      const Vec rgrad = riemannian_rescale(grad, point, ball.curvature());
      params.set(key, ball.expmap(point, TangentVec(-opt.learning_rate * rgrad)).coords());
    } else {
      params.set(key, theta - opt.learning_rate * grad);
    }
  }
  ++opt.step;
}

}  // namespace hsr
