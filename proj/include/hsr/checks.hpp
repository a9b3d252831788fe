#pragma once

// Self-verification suites: manifold identities on random points, the
// small-curvature limit against Euclidean counterparts, and autodiff
// gradients against central finite differences on random micro-models.

#include <cstdint>
#include <string>
#include <vector>

namespace hsr {

struct CheckResult {
  std::string suite;
  std::string property;
  bool pass = false;
  std::size_t cases = 0;
  double worst = 0.0;  // largest observed error (or the witness gap)
  std::string detail;  // first violation with its operands
};

struct CheckOptions {
  std::uint64_t seed = 42;
  // Overrides each suite's default tolerance when positive.
  double tolerance = 0.0;
};

inline constexpr double kBallSuiteTolerance = 1e-8;
inline constexpr double kLimitSuiteTolerance = 1e-4;
inline constexpr double kGradSuiteTolerance = 1e-4;

// 1000 random pairs for every dim in {2, 8, 64} and c in {0.5, 1, 2}.
std::vector<CheckResult> run_ball_suite(const CheckOptions& opts = {});
// c = 1e-6: Mobius addition / matvec against x + y / M x, and 100
// nearest-neighbor rankings under dist against Euclidean rankings.
std::vector<CheckResult> run_limit_suite(const CheckOptions& opts = {});
// 50 micro-models (d = 4, L = 1, at most 5 neighbors), every parameter
// coordinate, central differences with h = 1e-6; coordinates where both
// gradients are below 1e-8 are skipped.
std::vector<CheckResult> run_grad_suite(const CheckOptions& opts = {});

std::string format_check(const CheckResult& r);

}  // namespace hsr
