#include "hsr/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hsr/errors.hpp"

namespace hsr::ad {

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) {
    throw UsageError("ad: operation on an unbound variable");
  }
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) {
    throw UsageError("ad: operands recorded on different tapes");
  }
  return t;
}

void require_same_size(Var a, Var b, const char* op) {
  if (a.size() != b.size()) {
    throw UsageError(std::string("ad::") + op + ": size mismatch (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
}

void require_scalar(Var a, const char* op) {
  if (a.size() != 1) {
    throw UsageError(std::string("ad::") + op + ": expected a scalar operand");
  }
}

Tape::Node unary(Op op, Var a, Vec value) {
  Tape::Node n;
  n.op = op;
  n.a = a.id();
  n.value = std::move(value);
  return n;
}

Tape::Node binary(Op op, Var a, Var b, Vec value) {
  Tape::Node n;
  n.op = op;
  n.a = a.id();
  n.b = b.id();
  n.value = std::move(value);
  return n;
}

Vec scalar_vec(double x) {
  Vec v(1);
  v[0] = x;
  return v;
}

void accumulate(std::vector<Vec>& grads, int id, const Vec& g) {
  Vec& slot = grads[static_cast<std::size_t>(id)];
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

Vec& matrix_slot(std::vector<Vec>& grads, int id, const Tape::Node& m) {
  Vec& slot = grads[static_cast<std::size_t>(id)];
  if (slot.size() == 0) slot = Vec::Zero(static_cast<Eigen::Index>(m.rows) * m.cols);
  return slot;
}

void accumulate_scalar(std::vector<Vec>& grads, int id, double g) {
  Vec& slot = grads[static_cast<std::size_t>(id)];
  if (slot.size() == 0) {
    slot = scalar_vec(g);
  } else {
    slot[0] += g;
  }
}

}  // namespace

const Vec& Var::value() const { return tape_->node(id_).value; }

double Var::scalar() const {
  const Vec& v = value();
  if (v.size() != 1) {
    throw UsageError("ad::Var::scalar: variable is not a scalar");
  }
  return v[0];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Vec value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::matrix_variable(const Mat& m) {
  Node n;
  n.op = Op::kLeaf;
  n.value = Eigen::Map<const Vec>(m.data(), m.size());
  n.rows = static_cast<int>(m.rows());
  n.cols = static_cast<int>(m.cols());
  return push(std::move(n));
}

Var Tape::constant(Vec value) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double value) { return constant(scalar_vec(value)); }

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_size(a, b, "add");
  return t.push(binary(Op::kAdd, a, b, a.value() + b.value()));
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_size(a, b, "sub");
  return t.push(binary(Op::kSub, a, b, a.value() - b.value()));
}

Var neg(Var a) { return tape_of(a).push(unary(Op::kNeg, a, -a.value())); }

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_size(a, b, "mul");
  return t.push(binary(Op::kMul, a, b, a.value().cwiseProduct(b.value())));
}

Var scale(Var a, double k) {
  auto n = unary(Op::kScale, a, a.value() * k);
  n.k = k;
  return tape_of(a).push(std::move(n));
}

Var scale_by(Var v, Var s) {
  Tape& t = tape_of(v, s);
  require_scalar(s, "scale_by");
  return t.push(binary(Op::kScaleBy, v, s, v.value() * s.value()[0]));
}

Var add_const(Var a, double k) {
  auto n = unary(Op::kAddConst, a, a.value().array() + k);
  n.k = k;
  return tape_of(a).push(std::move(n));
}

Var dot(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_size(a, b, "dot");
  return t.push(binary(Op::kDot, a, b, scalar_vec(a.value().dot(b.value()))));
}

Var squared_norm(Var a) {
  return tape_of(a).push(unary(Op::kSquaredNorm, a, scalar_vec(a.value().squaredNorm())));
}

Var norm(Var a) { return tape_of(a).push(unary(Op::kNorm, a, scalar_vec(a.value().norm()))); }

Var sum(Var a) { return tape_of(a).push(unary(Op::kSum, a, scalar_vec(a.value().sum()))); }

Var tanh(Var a) {
  Vec y = a.value().unaryExpr([](double x) { return safe_tanh(x); });
  return tape_of(a).push(unary(Op::kTanh, a, std::move(y)));
}

Var atanh(Var a) {
  Vec y = a.value().unaryExpr([](double x) { return safe_atanh(x); });
  return tape_of(a).push(unary(Op::kAtanh, a, std::move(y)));
}

Var exp(Var a) { return tape_of(a).push(unary(Op::kExp, a, a.value().array().exp())); }

Var log(Var a) { return tape_of(a).push(unary(Op::kLog, a, a.value().array().log())); }

Var log_sigmoid(Var a) {
  // log sigma(x) = -softplus(-x), evaluated without overflow.
  Vec y = a.value().unaryExpr([](double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  });
  return tape_of(a).push(unary(Op::kLogSigmoid, a, std::move(y)));
}

Var leaky_relu(Var a, double slope) {
  Vec y = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  auto n = unary(Op::kLeakyRelu, a, std::move(y));
  n.k = slope;
  return tape_of(a).push(std::move(n));
}

Var concat(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Vec y(a.size() + b.size());
  y << a.value(), b.value();
  return t.push(binary(Op::kConcat, a, b, std::move(y)));
}

Var matvec(Var m, Var x) {
  Tape& t = tape_of(m, x);
  const auto& mn = t.node(m.id());
  if (mn.cols != x.size() || mn.rows == 0) {
    throw UsageError("ad::matvec: matrix columns do not match vector size");
  }
  Eigen::Map<const Mat> mat(mn.value.data(), mn.rows, mn.cols);
  return t.push(binary(Op::kMatVec, m, x, mat * x.value()));
}

Var matvec_t(Var m, Var x) {
  Tape& t = tape_of(m, x);
  const auto& mn = t.node(m.id());
  if (mn.rows != x.size() || mn.cols == 0) {
    throw UsageError("ad::matvec_t: matrix rows do not match vector size");
  }
  Eigen::Map<const Mat> mat(mn.value.data(), mn.rows, mn.cols);
  return t.push(binary(Op::kMatTVec, m, x, mat.transpose() * x.value()));
}

Var matvec_t_rows(Var m, Var x, int offset) {
  Tape& t = tape_of(m, x);
  const auto& mn = t.node(m.id());
  if (offset < 0 || offset + x.size() > mn.rows || mn.cols == 0) {
    throw UsageError("ad::matvec_t_rows: row block outside the matrix");
  }
  Eigen::Map<const Mat> mat(mn.value.data(), mn.rows, mn.cols);
  auto n = binary(Op::kMatTVecRows, m, x, mat.middleRows(offset, x.size()).transpose() * x.value());
  n.rows = offset;
  return t.push(std::move(n));
}

Var stack(const std::vector<Var>& scalars) {
  if (scalars.empty()) {
    throw UsageError("ad::stack: empty input");
  }
  Tape& t = tape_of(scalars.front());
  Tape::Node n;
  n.op = Op::kStack;
  n.value.resize(static_cast<Eigen::Index>(scalars.size()));
  n.inputs.reserve(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    tape_of(scalars.front(), scalars[i]);
    require_scalar(scalars[i], "stack");
    n.value[static_cast<Eigen::Index>(i)] = scalars[i].value()[0];
    n.inputs.push_back(scalars[i].id());
  }
  return t.push(std::move(n));
}

Var softmax(Var a, double temperature) {
  if (!(temperature > 0.0)) {
    throw UsageError("ad::softmax: temperature must be positive");
  }
  if (a.size() == 0) {
    throw UsageError("ad::softmax: empty input");
  }
  const Vec z = a.value() / temperature;
  Vec y = (z.array() - z.maxCoeff()).exp();
  y /= y.sum();
  auto n = unary(Op::kSoftmax, a, std::move(y));
  n.k = 1.0 / temperature;
  return tape_of(a).push(std::move(n));
}

Var element(Var a, int index) {
  if (index < 0 || index >= a.size()) {
    throw UsageError("ad::element: index out of range");
  }
  auto n = unary(Op::kElement, a, scalar_vec(a.value()[index]));
  n.rows = index;
  return tape_of(a).push(std::move(n));
}

Var clamp(Var a, double lo, double hi) {
  auto n = unary(Op::kClamp, a, a.value().cwiseMax(lo).cwiseMin(hi));
  n.k = lo;
  n.k2 = hi;
  return tape_of(a).push(std::move(n));
}

Var recip(Var a) { return tape_of(a).push(unary(Op::kRecip, a, a.value().cwiseInverse())); }

Var sqrt(Var a) { return tape_of(a).push(unary(Op::kSqrt, a, a.value().cwiseSqrt())); }

namespace {

// f(n) = atanh(z) / z with z = sqrt(c) n, and df/dn.
void atanh_ratio(double n, double sqrt_c, double& f, double& df) {
  const double z = sqrt_c * n;
  const double a = safe_atanh(z);
  f = a / z;
  if (z < 1e-3) {
    df = sqrt_c * (2.0 * z / 3.0 + 4.0 * z * z * z / 5.0);
  } else {
    const double da = z <= kAtanhMax ? sqrt_c / (1.0 - z * z) : 0.0;
    df = (da * n - a) / (sqrt_c * n * n);
  }
}

// f(n) = tanh(z) / z with z = sqrt(c) n, and df/dn.
void tanh_ratio(double n, double sqrt_c, double& f, double& df) {
  const double z = sqrt_c * n;
  const double t = safe_tanh(z);
  f = t / z;
  if (z < 1e-3) {
    df = sqrt_c * (-2.0 * z / 3.0 + 8.0 * z * z * z / 15.0);
  } else {
    const double dt = z <= kTanhMax ? sqrt_c * (1.0 - t * t) : 0.0;
    df = (dt * n - t) / (sqrt_c * n * n);
  }
}

struct MobiusTerms {
  double alpha;
  double beta;
  double gamma;
  Vec d;
};

// (-x) (+) y, unprojected.
MobiusTerms neg_mobius_add(const Vec& x, const Vec& y, double c) {
  const double uy = -x.dot(y);
  const double u2 = x.squaredNorm();
  const double y2 = y.squaredNorm();
  MobiusTerms m;
  m.alpha = 1.0 + 2.0 * c * uy + c * y2;
  m.beta = 1.0 - c * u2;
  m.gamma = 1.0 + 2.0 * c * uy + c * c * u2 * y2;
  m.d = (m.beta * y - m.alpha * x) / m.gamma;
  return m;
}

}  // namespace

Var log0(Var x, double c) {
  const double n = x.value().norm();
  Vec y = x.value();
  if (n >= kZeroNorm) {
    const double sqrt_c = std::sqrt(c);
    y *= safe_atanh(sqrt_c * n) / (sqrt_c * n);
  }
  auto node = unary(Op::kLog0, x, std::move(y));
  node.k = c;
  return tape_of(x).push(std::move(node));
}

Var exp0(Var v, double c, double eps) {
  const Vec& x = v.value();
  if (!x.allFinite()) {
    throw NumericError("exp0: non-finite coordinates");
  }
  const double sqrt_c = std::sqrt(c);
  const double n = x.norm();
  Vec y = x;
  if (n >= kZeroNorm) y *= safe_tanh(sqrt_c * n) / (sqrt_c * n);
  const double yn = y.norm();
  int projected = 0;
  if (sqrt_c * yn >= 1.0 - eps) {
    y *= ((1.0 - eps) / sqrt_c) / yn;
    projected = 1;
  }
  auto node = unary(Op::kExp0, v, std::move(y));
  node.k = c;
  node.k2 = eps;
  node.rows = projected;
  return tape_of(v).push(std::move(node));
}

Var ball_dist(Var x, Var y, double c) {
  Tape& t = tape_of(x, y);
  require_same_size(x, y, "ball_dist");
  const double sqrt_c = std::sqrt(c);
  const double n = neg_mobius_add(x.value(), y.value(), c).d.norm();
  auto node = binary(Op::kBallDist, x, y, scalar_vec(2.0 / sqrt_c * safe_atanh(sqrt_c * n)));
  node.k = c;
  return t.push(std::move(node));
}

Adjoints Tape::backward(Var loss) const {
  if (loss.tape() != this) {
    throw UsageError("ad::backward: loss was recorded on another tape");
  }
  if (loss.size() != 1) {
    throw UsageError("ad::backward: loss must be a scalar");
  }
  Adjoints out;
  out.tape_ = this;
  out.grads_.resize(nodes_.size());
  std::vector<Vec>& grads = out.grads_;
  grads[static_cast<std::size_t>(loss.id())] = scalar_vec(1.0);

  for (int id = loss.id(); id >= 0; --id) {
    if (grads[static_cast<std::size_t>(id)].size() == 0) {
      continue;
    }
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    // Inputs always precede a node, so this slot is not written below.
    const Vec& g = grads[static_cast<std::size_t>(id)];
    auto val = [&](int i) -> const Vec& { return nodes_[static_cast<std::size_t>(i)].value; };

    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
        accumulate(grads, n.a, g);
        accumulate(grads, n.b, g);
        break;
      case Op::kSub:
        accumulate(grads, n.a, g);
        accumulate(grads, n.b, -g);
        break;
      case Op::kNeg:
        accumulate(grads, n.a, -g);
        break;
      case Op::kMul:
        accumulate(grads, n.a, g.cwiseProduct(val(n.b)));
        accumulate(grads, n.b, g.cwiseProduct(val(n.a)));
        break;
      case Op::kScale:
        accumulate(grads, n.a, g * n.k);
        break;
      case Op::kScaleBy:
        accumulate(grads, n.a, g * val(n.b)[0]);
        accumulate_scalar(grads, n.b, g.dot(val(n.a)));
        break;
      case Op::kAddConst:
        accumulate(grads, n.a, g);
        break;
      case Op::kDot:
        accumulate(grads, n.a, g[0] * val(n.b));
        accumulate(grads, n.b, g[0] * val(n.a));
        break;
      case Op::kSquaredNorm:
        accumulate(grads, n.a, (2.0 * g[0]) * val(n.a));
        break;
      case Op::kNorm:
        if (n.value[0] >= kZeroNorm) {
          accumulate(grads, n.a, (g[0] / n.value[0]) * val(n.a));
        }
        break;
      case Op::kSum:
        accumulate(grads, n.a, Vec::Constant(val(n.a).size(), g[0]));
        break;
      case Op::kTanh: {
        const Vec& x = val(n.a);
        Vec d(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          d[i] = std::abs(x[i]) <= kTanhMax ? (1.0 - n.value[i] * n.value[i]) * g[i] : 0.0;
        }
        accumulate(grads, n.a, d);
        break;
      }
      case Op::kAtanh: {
        const Vec& x = val(n.a);
        Vec d(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          d[i] = std::abs(x[i]) <= kAtanhMax ? g[i] / (1.0 - x[i] * x[i]) : 0.0;
        }
        accumulate(grads, n.a, d);
        break;
      }
      case Op::kExp:
        accumulate(grads, n.a, g.cwiseProduct(n.value));
        break;
      case Op::kLog:
        accumulate(grads, n.a, g.cwiseQuotient(val(n.a)));
        break;
      case Op::kLogSigmoid: {
        // d/dx log sigma(x) = sigma(-x) = 1 - exp(log sigma(x)).
        Vec d = g.cwiseProduct((1.0 - n.value.array().exp()).matrix());
        accumulate(grads, n.a, d);
        break;
      }
      case Op::kLeakyRelu: {
        const Vec& x = val(n.a);
        Vec d(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          d[i] = x[i] > 0.0 ? g[i] : n.k * g[i];
        }
        accumulate(grads, n.a, d);
        break;
      }
      case Op::kConcat: {
        const Eigen::Index na = val(n.a).size();
        accumulate(grads, n.a, g.head(na));
        accumulate(grads, n.b, g.tail(g.size() - na));
        break;
      }
      case Op::kMatVec: {
        const Node& mn = nodes_[static_cast<std::size_t>(n.a)];
        Eigen::Map<const Mat> m(mn.value.data(), mn.rows, mn.cols);
        Mat::MapType gm(matrix_slot(grads, n.a, mn).data(), mn.rows, mn.cols);
        gm.noalias() += g * val(n.b).transpose();
        accumulate(grads, n.b, m.transpose() * g);
        break;
      }
      case Op::kMatTVec: {
        const Node& mn = nodes_[static_cast<std::size_t>(n.a)];
        Eigen::Map<const Mat> m(mn.value.data(), mn.rows, mn.cols);
        Mat::MapType gm(matrix_slot(grads, n.a, mn).data(), mn.rows, mn.cols);
        gm.noalias() += val(n.b) * g.transpose();
        accumulate(grads, n.b, m * g);
        break;
      }
      case Op::kMatTVecRows: {
        const Node& mn = nodes_[static_cast<std::size_t>(n.a)];
        Eigen::Map<const Mat> m(mn.value.data(), mn.rows, mn.cols);
        const Vec& x = val(n.b);
        Mat::MapType gm(matrix_slot(grads, n.a, mn).data(), mn.rows, mn.cols);
        gm.middleRows(n.rows, x.size()).noalias() += x * g.transpose();
        accumulate(grads, n.b, m.middleRows(n.rows, x.size()) * g);
        break;
      }
      case Op::kStack:
        for (std::size_t i = 0; i < n.inputs.size(); ++i) {
          accumulate_scalar(grads, n.inputs[i], g[static_cast<Eigen::Index>(i)]);
        }
        break;
      case Op::kSoftmax: {
        const Vec& y = n.value;
        const double yg = y.dot(g);
        accumulate(grads, n.a, n.k * (y.cwiseProduct(g) - yg * y));
        break;
      }
      case Op::kElement: {
        Vec d = Vec::Zero(val(n.a).size());
        d[n.rows] = g[0];
        accumulate(grads, n.a, d);
        break;
      }
      case Op::kClamp: {
        const Vec& x = val(n.a);
        Vec d(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          d[i] = (x[i] >= n.k && x[i] <= n.k2) ? g[i] : 0.0;
        }
        accumulate(grads, n.a, d);
        break;
      }
      case Op::kRecip: {
        const Vec& y = n.value;
        accumulate(grads, n.a, -g.cwiseProduct(y.cwiseProduct(y)));
        break;
      }
      case Op::kSqrt:
        accumulate(grads, n.a, (0.5 * g.array() / n.value.array()).matrix());
        break;
      case Op::kLog0: {
        const Vec& x = val(n.a);
        const double norm = x.norm();
        if (norm < kZeroNorm) {
          accumulate(grads, n.a, g);
          break;
        }
        double f = 0.0;
        double df = 0.0;
        atanh_ratio(norm, std::sqrt(n.k), f, df);
        accumulate(grads, n.a, f * g + (df / norm * x.dot(g)) * x);
        break;
      }
      case Op::kExp0: {
        const Vec& v = val(n.a);
        const double norm = v.norm();
        if (n.rows == 1) {
          // Projected: y = r v / |v|.
          const double r = (1.0 - n.k2) / std::sqrt(n.k);
          const Vec unit = v / norm;
          accumulate(grads, n.a, (r / norm) * (g - unit.dot(g) * unit));
          break;
        }
        if (norm < kZeroNorm) {
          accumulate(grads, n.a, g);
          break;
        }
        double f = 0.0;
        double df = 0.0;
        tanh_ratio(norm, std::sqrt(n.k), f, df);
        accumulate(grads, n.a, f * g + (df / norm * v.dot(g)) * v);
        break;
      }
      case Op::kBallDist: {
        const double c = n.k;
        const Vec& x = val(n.a);
        const Vec& y = val(n.b);
        const MobiusTerms m = neg_mobius_add(x, y, c);
        const double norm = m.d.norm();
        if (norm < kZeroNorm || std::sqrt(c) * norm > kAtanhMax) break;
        const Vec gd = (2.0 * g[0] / (1.0 - c * norm * norm) / norm) * m.d;
        const double ug = -x.dot(gd);
        const double yg = y.dot(gd);
        const double dg = m.d.dot(gd);
        // Gradient with respect to u = -x.
        const Vec gu = (m.alpha * gd + (2.0 * c * ug) * y + (2.0 * c * yg) * x -
                        dg * (2.0 * c * y - (2.0 * c * c * y.squaredNorm()) * x)) /
                       m.gamma;
        const Vec gy = (m.beta * gd + ug * (2.0 * c * (y - x)) -
                        dg * (-2.0 * c * x + (2.0 * c * c * x.squaredNorm()) * y)) /
                       m.gamma;
        accumulate(grads, n.a, -gu);
        accumulate(grads, n.b, gy);
        break;
      }
    }
  }
  return out;
}

Vec Adjoints::operator[](Var v) const {
  if (v.tape() != tape_) {
    throw UsageError("ad::Adjoints: variable belongs to another tape");
  }
  const Vec& g = grads_[static_cast<std::size_t>(v.id())];
  if (g.size() == 0) {
    return Vec::Zero(v.size());
  }
  return g;
}

Mat Adjoints::matrix(Var v) const {
  const auto& n = tape_->node(v.id());
  if (n.rows == 0) {
    throw UsageError("ad::Adjoints::matrix: variable is not a matrix");
  }
  const Vec g = (*this)[v];
  return Eigen::Map<const Mat>(g.data(), n.rows, n.cols);
}

}  // namespace hsr::ad
