#include "hsr/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

long memo_key(int user, int layer) { return static_cast<long>(user) * 64 + layer; }

// Geometry-dependent building blocks on plain values.
class PlainGeometry {
 public:
  explicit PlainGeometry(const ModelConfig& cfg)
      : cfg_(cfg),
        ball_(cfg.geometry == Geometry::kHyperbolic ? cfg.curvature : 1.0, cfg.ball_eps) {}

  bool hyperbolic() const { return cfg_.geometry == Geometry::kHyperbolic; }

  Vec to_tangent(const Vec& x) const {
    return hyperbolic() ? ball_.log0(BallPoint(x)).coords() : x;
  }
  Vec to_ball(const Vec& v) const {
    return hyperbolic() ? ball_.exp0(TangentVec(v)).coords() : v;
  }
  Vec transform(const Mat& m, const Vec& x) const {
    return hyperbolic() ? ball_.mobius_matvec(m, BallPoint(x)).coords() : Vec(m * x);
  }
  Vec leaky(const Vec& x) const {
    const double slope = cfg_.leaky_slope;
    return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  }
  Vec activate(const Vec& x) const {
    return hyperbolic() ? to_ball(leaky(to_tangent(x))) : leaky(x);
  }
  double distance(const Vec& x, const Vec& y) const {
    return hyperbolic() ? ball_.dist(BallPoint(x), BallPoint(y)) : (x - y).norm();
  }

  // Logit from tangent vectors: (ta * tb)^T tanh(w^T [tb, ti]).
  static double logit(const Vec& ta, const Vec& tb, const Vec& ti, const Mat& w) {
    if (w.rows() != tb.size() + ti.size() || w.cols() != ta.size()) {
      throw UsageError("attention_logit: attention matrix must be 2d x d");
    }
    Vec cat(tb.size() + ti.size());
    cat << tb, ti;
    const Vec gate = (w.transpose() * cat).unaryExpr([](double v) { return safe_tanh(v); });
    return ta.cwiseProduct(tb).dot(gate);
  }

  // Weights over the neighbor tangents for one user.
  std::vector<double> weights(const Vec& self_t, const std::vector<const Vec*>& nb_t,
                              const Vec& item_t, const Mat& w) const {
    if (cfg_.attention == AttentionMode::kMean) {
      return std::vector<double>(nb_t.size(), 1.0 / static_cast<double>(nb_t.size()));
    }
    std::vector<double> logits;
    logits.reserve(nb_t.size());
    for (const Vec* tb : nb_t) logits.push_back(logit(self_t, *tb, item_t, w));
    return attention_weights(logits, cfg_.tau);
  }

  // New representation of one user given its own and its neighbors' tangent
  // vectors at the previous layer.
  Vec aggregate(const Vec& self_t, const std::vector<const Vec*>& nb_t, const Vec& item_t,
                const Mat& m, const Mat& w) const {
    if (nb_t.empty()) return combine(self_t, nb_t, {}, m);
    return combine(self_t, nb_t, weights(self_t, nb_t, item_t, w), m);
  }

  Vec combine(const Vec& self_t, const std::vector<const Vec*>& nb_t,
              const std::vector<double>& wts, const Mat& m) const {
    Vec t = self_t;
    if (!nb_t.empty()) {
      Vec acc = Vec::Zero(self_t.size());
      for (std::size_t k = 0; k < nb_t.size(); ++k) acc += wts[k] * *nb_t[k];
      t += cfg_.gamma * acc;
    }
    return activate(transform(m, to_ball(t)));
  }

 private:
  const ModelConfig& cfg_;
  PoincareBall ball_;
};

}  // namespace

void ModelConfig::validate() const {
  if (dim < 1) throw UsageError("model: dim must be >= 1");
  if (layers < 0) throw UsageError("model: layers must be >= 0");
  if (layers >= 64) throw UsageError("model: at most 63 layers are supported");
  if (geometry == Geometry::kHyperbolic && !(curvature > 0.0)) {
    throw UsageError("model: curvature must be positive in hyperbolic geometry");
  }
  if (!(tau > 0.0)) throw UsageError("model: attention temperature must be positive");
  if (!(fd_temperature > 0.0)) throw UsageError("model: Fermi-Dirac t must be positive");
  if (!(ball_eps > 0.0 && ball_eps < 1.0)) throw UsageError("model: ball eps must lie in (0,1)");
}

ParamStore init_params(const ModelConfig& cfg, int num_users, int num_items, std::uint64_t seed) {
  cfg.validate();
  ParamStore params(num_users, num_items, cfg.dim, cfg.layers, cfg.geometry);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> emb(-1e-3, 1e-3);
  const PoincareBall ball(cfg.geometry == Geometry::kHyperbolic ? cfg.curvature : 1.0,
                          cfg.ball_eps);
  auto fill_embeddings = [&](Mat& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      Vec v(m.rows());
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = emb(rng);
      m.col(j) = cfg.geometry == Geometry::kHyperbolic ? ball.project(v).coords() : v;
    }
  };
  fill_embeddings(params.users());
  fill_embeddings(params.items());
  auto glorot = [&](Mat& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
    }
  };
  for (auto& m : params.layers()) glorot(m);
  for (auto& w : params.attention()) glorot(w);
  return params;
}

double attention_logit(const PoincareBall& ball, const BallPoint& ua, const BallPoint& ub,
                       const BallPoint& vi, const Mat& w) {
  if (ua.dim() != ub.dim() || ua.dim() != vi.dim()) {
    throw UsageError("attention_logit: dimension mismatch");
  }
  return PlainGeometry::logit(ball.log0(ua).coords(), ball.log0(ub).coords(),
                              ball.log0(vi).coords(), w);
}

std::vector<double> attention_weights(std::span<const double> logits, double tau) {
  if (logits.empty()) throw UsageError("attention_weights: empty logit list");
  if (!(tau > 0.0)) throw UsageError("attention_weights: temperature must be positive");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) / tau);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<BallPoint> aggregate_layer(const std::vector<BallPoint>& prev, const BallPoint& item,
                                       const SocialGraph& graph, const Mat& transform,
                                       const Mat& attention, const ModelConfig& cfg,
                                       std::span<const int> users) {
  cfg.validate();
  if (static_cast<int>(prev.size()) != graph.num_users()) {
    throw UsageError("aggregate_layer: one representation per user required");
  }
  const PlainGeometry geo(cfg);
  std::vector<Vec> tangents;
  tangents.reserve(prev.size());
  for (const auto& p : prev) tangents.push_back(geo.to_tangent(p.coords()));
  const Vec item_t = geo.to_tangent(item.coords());

  std::vector<int> all;
  if (users.empty()) {
    all.resize(prev.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    users = all;
  }
  std::vector<BallPoint> out = prev;
  for (int a : users) {
    std::vector<const Vec*> nb;
    for (int b : graph.neighbors(a)) nb.push_back(&tangents[static_cast<std::size_t>(b)]);
    out[static_cast<std::size_t>(a)] =
        BallPoint(geo.aggregate(tangents[static_cast<std::size_t>(a)], nb, item_t, transform,
                                attention));
  }
  return out;
}

BallPoint aggregate_exact(const PoincareBall& ball, const BallPoint& ua,
                          std::span<const BallPoint> neighbors, double gamma) {
  if (neighbors.empty()) return ua;
  BallPoint acc = neighbors.front();
  for (std::size_t k = 1; k < neighbors.size(); ++k) acc = ball.mobius_add(acc, neighbors[k]);
  return ball.mobius_add(ua, ball.mobius_scalar(gamma, acc));
}

BallPoint aggregate_tangent(const PoincareBall& ball, const BallPoint& ua,
                            std::span<const BallPoint> neighbors, std::span<const double> weights,
                            double gamma) {
  if (weights.size() != neighbors.size()) {
    throw UsageError("aggregate_tangent: one weight per neighbor required");
  }
  Vec t = ball.log0(ua).coords();
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    t += gamma * weights[k] * ball.log0(neighbors[k]).coords();
  }
  return ball.exp0(TangentVec(t));
}

double fermi_dirac(double distance, double r, double t) {
  return 1.0 / (std::exp((distance - r) / t) + 1.0);
}

double predict(const PoincareBall& ball, const BallPoint& user, const BallPoint& item, double r,
               double t) {
  return fermi_dirac(ball.dist(user, item), r, t);
}

// ---- Scorer ---------------------------------------------------------------

Scorer::Scorer(const ParamStore& params, const SocialGraph& graph, const ModelConfig& cfg)
    : params_(params), graph_(graph), cfg_(cfg) {
  cfg_.validate();
  if (params.dim() != cfg.dim || params.num_layers() != cfg.layers) {
    throw CompatibilityError("Scorer: parameter shapes do not match the model config");
  }
  if (graph.num_users() != params.num_users()) {
    throw CompatibilityError("Scorer: social graph and parameters disagree on user count");
  }
  const PlainGeometry geo(cfg_);
  user_tangent_.reserve(static_cast<std::size_t>(params.num_users()));
  for (int u = 0; u < params.num_users(); ++u) {
    user_tangent_.push_back(geo.to_tangent(params.users().col(u)));
  }
  if (cfg_.layers > 0 && cfg_.attention == AttentionMode::kAttention) {
    const Mat& w = params.attention().front();
    const Eigen::Index d = cfg_.dim;
    Mat tu(d, params.num_users());
    for (int u = 0; u < params.num_users(); ++u) tu.col(u) = user_tangent_[static_cast<std::size_t>(u)];
    Mat ti(d, params.num_items());
    for (int i = 0; i < params.num_items(); ++i) ti.col(i) = geo.to_tangent(params.items().col(i));
    user_gate_ = w.topRows(d).transpose() * tu;
    item_gate_ = w.bottomRows(d).transpose() * ti;
  }
}

namespace {

struct PlainRep {
  Vec point;
  Vec tangent;
};

struct PlainForward {
  const ParamStore& params;
  const SocialGraph& graph;
  const ModelConfig& cfg;
  const std::vector<Vec>& user_tangent;
  const PlainGeometry geo;
  Vec item_t;
  std::unordered_map<long, PlainRep> memo;
  const Mat* user_gate = nullptr;
  Vec item_gate;

  // Layer-0 reps are served from the precomputed tangents.
  const Vec& tangent(int user, int layer) {
    if (layer == 0) return user_tangent[static_cast<std::size_t>(user)];
    return rep(user, layer).tangent;
  }

  const PlainRep& rep(int user, int layer) {
    const long key = memo_key(user, layer);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    PlainRep out;
    if (layer == 0) {
      out.point = params.users().col(user);
      out.tangent = user_tangent[static_cast<std::size_t>(user)];
    } else {
      const auto& nbs = graph.neighbors(user);
      // unordered_map keeps element references stable across rehashing.
      std::vector<const Vec*> nb;
      nb.reserve(nbs.size());
      for (int b : nbs) nb.push_back(&tangent(b, layer - 1));
      const auto l = static_cast<std::size_t>(layer - 1);
      const Vec& self_t = tangent(user, layer - 1);
      if (layer == 1 && user_gate != nullptr && !nb.empty()) {
        std::vector<double> logits;
        logits.reserve(nbs.size());
        for (std::size_t k = 0; k < nbs.size(); ++k) {
          const Vec gate = (user_gate->col(nbs[k]) + item_gate).unaryExpr(
              [](double v) { return safe_tanh(v); });
          logits.push_back(self_t.cwiseProduct(*nb[k]).dot(gate));
        }
        out.point = geo.combine(self_t, nb, attention_weights(logits, cfg.tau), params.layers()[l]);
      } else {
        out.point = geo.aggregate(self_t, nb, item_t, params.layers()[l], params.attention()[l]);
      }
      out.tangent = geo.to_tangent(out.point);
    }
    return memo.emplace(key, std::move(out)).first->second;
  }
};

}  // namespace

Vec Scorer::user_representation(int user, int item) const {
  if (user < 0 || user >= params_.num_users() || item < 0 || item >= params_.num_items()) {
    throw UsageError("Scorer: unknown user or item id");
  }
  PlainForward fwd{params_, graph_, cfg_, user_tangent_, PlainGeometry(cfg_), {}, {}, nullptr, {}};
  fwd.item_t = fwd.geo.to_tangent(params_.items().col(item));
  if (user_gate_.size() > 0) {
    fwd.user_gate = &user_gate_;
    fwd.item_gate = item_gate_.col(item);
  }
  if (cfg_.layers == 0) return params_.users().col(user);
  return fwd.rep(user, cfg_.layers).point;
}

double Scorer::score(int user, int item) const {
  const Vec u = user_representation(user, item);
  const PlainGeometry geo(cfg_);
  return fermi_dirac(geo.distance(u, params_.items().col(item)), cfg_.fd_radius,
                     cfg_.fd_temperature);
}

std::vector<double> Scorer::score_items(int user, std::span<const int> items) const {
  std::vector<double> out;
  out.reserve(items.size());
  for (int i : items) out.push_back(score(user, i));
  return out;
}

std::vector<double> Scorer::first_layer_weights(int user, int item) const {
  if (user < 0 || user >= params_.num_users() || item < 0 || item >= params_.num_items()) {
    throw UsageError("Scorer: unknown user or item id");
  }
  const auto& nbs = graph_.neighbors(user);
  if (nbs.empty()) return {};
  const PlainGeometry geo(cfg_);
  const Vec item_t = geo.to_tangent(params_.items().col(item));
  std::vector<const Vec*> nb;
  for (int b : nbs) nb.push_back(&user_tangent_[static_cast<std::size_t>(b)]);
  if (params_.num_layers() == 0) {
    throw UsageError("first_layer_weights: model has no aggregation layer");
  }
  return geo.weights(user_tangent_[static_cast<std::size_t>(user)], nb, item_t,
                     params_.attention().front());
}

// ---- TapeModel ------------------------------------------------------------

TapeModel::TapeModel(ad::Tape& tape, const ParamStore& params, const SocialGraph& graph,
                     const ModelConfig& cfg)
    : tape_(tape),
      params_(params),
      graph_(graph),
      cfg_(cfg),
      ball_(cfg.geometry == Geometry::kHyperbolic ? cfg.curvature : 1.0, cfg.ball_eps) {
  cfg_.validate();
  if (params.dim() != cfg.dim || params.num_layers() != cfg.layers) {
    throw CompatibilityError("TapeModel: parameter shapes do not match the model config");
  }
  if (graph.num_users() != params.num_users()) {
    throw CompatibilityError("TapeModel: social graph and parameters disagree on user count");
  }
  layers_.resize(static_cast<std::size_t>(cfg.layers));
  attention_.resize(static_cast<std::size_t>(cfg.layers));
}

ad::Var TapeModel::user_leaf(int user) {
  if (user < 0 || user >= params_.num_users()) throw UsageError("TapeModel: unknown user id");
  auto [it, inserted] = users_.try_emplace(user);
  if (inserted) it->second = tape_.variable(params_.users().col(user));
  return it->second;
}

ad::Var TapeModel::item_leaf(int item) {
  if (item < 0 || item >= params_.num_items()) throw UsageError("TapeModel: unknown item id");
  auto [it, inserted] = items_.try_emplace(item);
  if (inserted) it->second = tape_.variable(params_.items().col(item));
  return it->second;
}

ad::Var TapeModel::layer_leaf(int layer) {
  auto& slot = layers_.at(static_cast<std::size_t>(layer));
  if (!slot.valid()) slot = tape_.matrix_variable(params_.layers()[static_cast<std::size_t>(layer)]);
  return slot;
}

ad::Var TapeModel::attention_leaf(int layer) {
  auto& slot = attention_.at(static_cast<std::size_t>(layer));
  if (!slot.valid()) {
    slot = tape_.matrix_variable(params_.attention()[static_cast<std::size_t>(layer)]);
  }
  return slot;
}

ad::Var TapeModel::to_tangent(ad::Var x) const {
  return cfg_.geometry == Geometry::kHyperbolic ? ball_.log0(x) : x;
}

ad::Var TapeModel::to_ball(ad::Var v) const {
  return cfg_.geometry == Geometry::kHyperbolic ? ball_.exp0(v) : v;
}

ad::Var TapeModel::transform(int layer, ad::Var x) {
  const ad::Var m = layer_leaf(layer);
  return cfg_.geometry == Geometry::kHyperbolic ? ball_.mobius_matvec(m, x) : ad::matvec(m, x);
}

ad::Var TapeModel::activate(ad::Var x) const {
  if (cfg_.geometry == Geometry::kHyperbolic) {
    return ball_.exp0(ad::leaky_relu(ball_.log0(x), cfg_.leaky_slope));
  }
  return ad::leaky_relu(x, cfg_.leaky_slope);
}

ad::Var TapeModel::distance(ad::Var x, ad::Var y) const {
  if (cfg_.geometry == Geometry::kHyperbolic) return ball_.dist(x, y);
  return ad::norm(ad::sub(x, y));
}

ad::Var TapeModel::user_tangent0(int user) {
  auto it = user_tangents_.find(user);
  if (it != user_tangents_.end()) return it->second;
  const ad::Var t = to_tangent(user_leaf(user));
  user_tangents_.emplace(user, t);
  return t;
}

ad::Var TapeModel::item_tangent0(int item) {
  auto it = item_tangents_.find(item);
  if (it != item_tangents_.end()) return it->second;
  const ad::Var t = to_tangent(item_leaf(item));
  item_tangents_.emplace(item, t);
  return t;
}

ad::Var TapeModel::item_gate(int layer, int item) {
  const long key = memo_key(item, layer);
  auto it = item_gates_.find(key);
  if (it != item_gates_.end()) return it->second;
  const ad::Var g = ad::matvec_t_rows(attention_leaf(layer), item_tangent0(item), cfg_.dim);
  item_gates_.emplace(key, g);
  return g;
}

ad::Var TapeModel::neighbor_gate(int layer, int user, ad::Var tangent) {
  // Only first-layer inputs are item independent and worth sharing.
  if (layer != 0) return ad::matvec_t_rows(attention_leaf(layer), tangent, 0);
  auto it = user_gates_.find(user);
  if (it != user_gates_.end()) return it->second;
  const ad::Var g = ad::matvec_t_rows(attention_leaf(0), tangent, 0);
  user_gates_.emplace(user, g);
  return g;
}

TapeModel::Rep TapeModel::representation(int user, int layer, int item,
                                         std::unordered_map<long, Rep>& memo) {
  if (layer == 0) return {user_leaf(user), user_tangent0(user)};
  const long key = memo_key(user, layer);
  if (auto it = memo.find(key); it != memo.end()) return it->second;

  const auto l = layer - 1;
  const Rep self = representation(user, l, item, memo);
  ad::Var t = self.tangent;
  const auto& nbs = graph_.neighbors(user);
  if (!nbs.empty()) {
    std::vector<ad::Var> nb_t;
    nb_t.reserve(nbs.size());
    for (int b : nbs) nb_t.push_back(representation(b, l, item, memo).tangent);
    ad::Var acc;
    if (cfg_.attention == AttentionMode::kMean) {
      acc = nb_t.front();
      for (std::size_t k = 1; k < nb_t.size(); ++k) acc = ad::add(acc, nb_t[k]);
      acc = ad::scale(acc, 1.0 / static_cast<double>(nb_t.size()));
    } else {
      const ad::Var ig = item_gate(l, item);
      std::vector<ad::Var> logits;
      logits.reserve(nb_t.size());
      for (std::size_t k = 0; k < nb_t.size(); ++k) {
        const ad::Var gate = ad::tanh(ad::add(neighbor_gate(l, nbs[k], nb_t[k]), ig));
        logits.push_back(ad::dot(ad::mul(self.tangent, nb_t[k]), gate));
      }
      const ad::Var weights = ad::softmax(ad::stack(logits), cfg_.tau);
      for (std::size_t k = 0; k < nb_t.size(); ++k) {
        const ad::Var term = ad::scale_by(nb_t[k], ad::element(weights, static_cast<int>(k)));
        acc = acc.valid() ? ad::add(acc, term) : term;
      }
    }
    t = ad::add(t, ad::scale(acc, cfg_.gamma));
  }
  const ad::Var point = activate(transform(l, to_ball(t)));
  // The last layer's tangent is never consumed.
  Rep out{point, layer < cfg_.layers ? to_tangent(point) : ad::Var()};
  memo.emplace(key, out);
  return out;
}

ad::Var TapeModel::forward(int user, int item) {
  const ad::Var v = item_leaf(item);
  ad::Var u;
  if (cfg_.layers == 0) {
    u = user_leaf(user);
  } else {
    std::unordered_map<long, Rep> memo;
    u = representation(user, cfg_.layers, item, memo).point;
  }
  const ad::Var d = distance(u, v);
  // 1 / (exp((d - r) / t) + 1)
  const ad::Var e = ad::exp(ad::scale(ad::add_const(d, -cfg_.fd_radius), 1.0 / cfg_.fd_temperature));
  return ad::recip(ad::add_const(e, 1.0));
}

ad::Var TapeModel::social_score(int a, int b) {
  return ad::neg(distance(user_leaf(a), user_leaf(b)));
}

GradientMap TapeModel::gradients(const ad::Adjoints& adjoints) const {
  GradientMap out;
  for (const auto& [u, v] : users_) out.emplace(ParamKey{ParamKind::kUser, u}, adjoints[v]);
  for (const auto& [i, v] : items_) out.emplace(ParamKey{ParamKind::kItem, i}, adjoints[v]);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].valid()) {
      out.emplace(ParamKey{ParamKind::kLayer, static_cast<int>(l)}, adjoints[layers_[l]]);
    }
    if (attention_[l].valid()) {
      out.emplace(ParamKey{ParamKind::kAttention, static_cast<int>(l)}, adjoints[attention_[l]]);
    }
  }
  return out;
}

// ---- Checkpoints ----------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'H', 'S', 'R', '1'};

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is, const std::string& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw InputError("checkpoint " + path + ": truncated file");
  }
  return value;
}

void put_row_major(std::ostream& os, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(os, m(i, j));
  }
}

void take_row_major(std::istream& is, Mat& m, const std::string& path) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = take<double>(is, path);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params, const ModelConfig& cfg) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.dim()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.num_layers()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.num_users()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.num_items()));
  put<double>(os, cfg.curvature);
  put<double>(os, cfg.gamma);
  put<double>(os, cfg.tau);
  put<double>(os, cfg.fd_radius);
  put<double>(os, cfg.fd_temperature);
  // Embeddings are stored one column per entity, i.e. rows of the transpose.
  put_row_major(os, params.users().transpose());
  put_row_major(os, params.items().transpose());
  for (const auto& m : params.layers()) put_row_major(os, m);
  for (const auto& w : params.attention()) put_row_major(os, w);
  if (!os) throw InputError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path, Geometry geometry) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw InputError("checkpoint " + path + ": bad magic (expected HSR1)");
  }
  const auto d = take<std::uint32_t>(is, path);
  const auto layers = take<std::uint32_t>(is, path);
  const auto nu = take<std::uint32_t>(is, path);
  const auto ni = take<std::uint32_t>(is, path);
  if (d == 0 || layers >= 64) throw InputError("checkpoint " + path + ": implausible header");
  Checkpoint ck;
  ck.config.dim = static_cast<int>(d);
  ck.config.layers = static_cast<int>(layers);
  ck.config.geometry = geometry;
  ck.config.curvature = take<double>(is, path);
  ck.config.gamma = take<double>(is, path);
  ck.config.tau = take<double>(is, path);
  ck.config.fd_radius = take<double>(is, path);
  ck.config.fd_temperature = take<double>(is, path);
  ck.params = ParamStore(static_cast<int>(nu), static_cast<int>(ni), static_cast<int>(d),
                         static_cast<int>(layers), geometry);
  Mat users(nu, d);
  Mat items(ni, d);
  take_row_major(is, users, path);
  take_row_major(is, items, path);
  ck.params.users() = users.transpose();
  ck.params.items() = items.transpose();
  for (auto& m : ck.params.layers()) take_row_major(is, m, path);
  for (auto& w : ck.params.attention()) take_row_major(is, w, path);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw InputError("checkpoint " + path + ": trailing bytes");
  }
  return ck;
}

}  // namespace hsr
