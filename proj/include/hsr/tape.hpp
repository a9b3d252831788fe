#pragma once

// Reverse-mode automatic differentiation over vector-valued primitives.
//
// A Tape records nodes in creation order; every node's inputs therefore
// precede it and a single reverse sweep visits each node once. Scalars are
// size-1 vectors. Matrices are stored flattened (column-major) with their
// shape kept on the node.

#include <cstdint>
#include <vector>

#include "hsr/ball.hpp"

namespace hsr::ad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

  const Vec& value() const;
  double scalar() const;
  Eigen::Index size() const { return value().size(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kNeg,
  kMul,
  kScale,
  kScaleBy,
  kAddConst,
  kDot,
  kSquaredNorm,
  kNorm,
  kSum,
  kTanh,
  kAtanh,
  kExp,
  kLog,
  kLogSigmoid,
  kLeakyRelu,
  kConcat,
  kMatVec,
  kMatTVec,
  kStack,
  kSoftmax,
  kElement,
  kClamp,
  kRecip,
  kSqrt,
  kMatTVecRows,
  kLog0,
  kExp0,
  kBallDist,
};

class Adjoints;

class Tape {
 public:
  struct Node {
    Op op = Op::kConst;
    int a = -1;
    int b = -1;
    std::vector<int> inputs;  // only for variable-arity ops (stack)
    Vec value;
    double k = 0.0;
    double k2 = 0.0;
    int rows = 0;
    int cols = 0;
  };

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Vec value);
  Var matrix_variable(const Mat& m);
  Var constant(Vec value);
  Var constant(double value);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

  // Reverse sweep from a scalar loss. Throws UsageError if loss is not
  // size-1 or belongs to another tape.
  Adjoints backward(Var loss) const;

  Var push(Node node);

 private:
  std::vector<Node> nodes_;
};

// Euclidean gradients of one backward sweep.
class Adjoints {
 public:
  // Gradient w.r.t. any recorded node; zero when the loss does not depend
  // on it.
  Vec operator[](Var v) const;
  Mat matrix(Var v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Vec> grads_;
};

// Elementwise and structural primitives. Binary elementwise ops require
// equal sizes; use scale_by for vector-times-scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var mul(Var a, Var b);
Var scale(Var a, double k);
Var scale_by(Var v, Var s);
Var add_const(Var a, double k);
Var dot(Var a, Var b);
Var squared_norm(Var a);
// Gradient at the zero vector is defined as zero.
Var norm(Var a);
Var sum(Var a);
// tanh with its argument clamped to [-15, 15]; zero gradient outside.
Var tanh(Var a);
// atanh with its argument clamped to +-(1 - 1e-15); zero gradient outside.
Var atanh(Var a);
Var exp(Var a);
Var log(Var a);
Var log_sigmoid(Var a);
Var leaky_relu(Var a, double slope);
Var concat(Var a, Var b);
// m is a matrix node (rows x cols); returns m * x or m^T * x.
Var matvec(Var m, Var x);
Var matvec_t(Var m, Var x);
// Rows [offset, offset + |x|) of m, transposed, times x.
Var matvec_t_rows(Var m, Var x, int offset);
Var stack(const std::vector<Var>& scalars);
// softmax(a / temperature).
Var softmax(Var a, double temperature);
Var element(Var a, int index);
// Clamps into [lo, hi]; the gradient passes only for entries inside.
Var clamp(Var a, double lo, double hi);
Var recip(Var a);
Var sqrt(Var a);

// Fused maps of the curvature-c Poincare ball, matching PoincareBall's
// branches: log0 and exp0 at the origin (exp0 includes the projection with
// margin eps) and the geodesic distance.
Var log0(Var x, double c);
Var exp0(Var v, double c, double eps);
Var ball_dist(Var x, Var y, double c);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(Var a, double k) { return scale(a, k); }
inline Var operator*(double k, Var a) { return scale(a, k); }
inline Var operator+(Var a, double k) { return add_const(a, k); }
inline Var operator+(double k, Var a) { return add_const(a, k); }

}  // namespace hsr::ad
