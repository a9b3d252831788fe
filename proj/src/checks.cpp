#include "hsr/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/fmt/fmt.h>

#include "hsr/ball.hpp"
#include "hsr/model.hpp"
#include "hsr/objective.hpp"
#include "hsr/tape.hpp"

namespace hsr {

namespace {

double tol_or(const CheckOptions& opts, double fallback) {
  return opts.tolerance > 0.0 ? opts.tolerance : fallback;
}

Vec gaussian(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = n01(rng);
  return v;
}

// Uniform radius in [0, frac * max radius), Gaussian direction.
Vec random_in_ball(std::mt19937_64& rng, Eigen::Index dim, double c, double frac = 0.95) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Vec v = gaussian(rng, dim);
  return v * (frac * u01(rng) / (std::sqrt(c) * v.norm()));
}

std::string vec_str(const Vec& v) {
  std::string out = "(";
  for (Eigen::Index i = 0; i < v.size() && i < 4; ++i) {
    out += fmt::format("{}{:.6g}", i == 0 ? "" : ", ", v[i]);
  }
  if (v.size() > 4) out += fmt::format(", ... [{} dims]", v.size());
  return out + ")";
}

// Tracks the worst error of one property and the first violation.
struct Tracker {
  CheckResult r;
  double tol;

  Tracker(std::string suite, std::string property, double tolerance) : tol(tolerance) {
    r.suite = std::move(suite);
    r.property = std::move(property);
    r.pass = true;
  }

  template <typename Describe>
  void observe(double err, Describe&& describe) {
    ++r.cases;
    if (std::isnan(err) || err > r.worst) r.worst = err;
    if (!(err <= tol) && r.pass) {
      r.pass = false;
      r.detail = describe();
    }
  }
};

}  // namespace

std::vector<CheckResult> run_ball_suite(const CheckOptions& opts) {
  const double tol = tol_or(opts, kBallSuiteTolerance);
  std::mt19937_64 rng(opts.seed);
  Tracker identity("ball", "left identity 0 (+) x = x", tol);
  Tracker inverse("ball", "left inverse (-x) (+) x = 0", tol);
  Tracker symmetry("ball", "dist(x,y) = dist(y,x)", tol);
  Tracker positivity("ball", "dist(x,x) = 0 and dist(x,y) > 0", tol);
  Tracker log_exp("ball", "exp0(log0 x) = x", tol);
  Tracker exp_log("ball", "log0(exp0 v) = v", tol);
  CheckResult witness{"ball", "non-commutativity witness x (+) y != y (+) x", false, 0, 0.0, ""};

  for (const double c : {0.5, 1.0, 2.0}) {
    const PoincareBall ball(c);
    for (const Eigen::Index dim : {2, 8, 64}) {
      const BallPoint zero = ball.origin(dim);
      for (int k = 0; k < 1000; ++k) {
        const BallPoint x(random_in_ball(rng, dim, c));
        const BallPoint y(random_in_ball(rng, dim, c));
        auto where = [&](const char* what, double err) {
          return fmt::format("c={} dim={} x={} y={}: {} error {:.3g}", c, dim, vec_str(x.coords()),
                             vec_str(y.coords()), what, err);
        };
        const double e_id = (ball.mobius_add(zero, x).coords() - x.coords()).norm();
        identity.observe(e_id, [&] { return where("identity", e_id); });
        const double e_inv = ball.mobius_add(ball.mobius_neg(x), x).norm();
        inverse.observe(e_inv, [&] { return where("inverse", e_inv); });
        const double dxy = ball.dist(x, y);
        const double dyx = ball.dist(y, x);
        const double e_sym = std::abs(dxy - dyx) / std::max(1.0, dxy);
        symmetry.observe(e_sym, [&] { return where("symmetry", e_sym); });
        const double dxx = ball.dist(x, x);
        const bool distinct = (x.coords() - y.coords()).norm() > 0.0;
        const double e_pos = (distinct && !(dxy > 0.0)) ? 1.0 : dxx;
        positivity.observe(e_pos, [&] { return where("positivity", e_pos); });
        const double e_le = (ball.exp0(ball.log0(x)).coords() - x.coords()).norm();
        log_exp.observe(e_le, [&] { return where("exp0(log0)", e_le); });
        const TangentVec v(random_in_ball(rng, dim, c) * (std::atanh(0.95) / 0.95));
        const double e_el = (ball.log0(ball.exp0(v)).coords() - v.coords()).norm() /
                            std::max(1.0, v.norm());
        exp_log.observe(e_el, [&] {
          return fmt::format("c={} dim={} v={}: log0(exp0) error {:.3g}", c, dim,
                             vec_str(v.coords()), e_el);
        });
        const double gap =
            (ball.mobius_add(x, y).coords() - ball.mobius_add(y, x).coords()).norm();
        ++witness.cases;
        if (gap > witness.worst) {
          witness.worst = gap;
          witness.detail = fmt::format("c={} dim={} x={} y={} gap {:.3g}", c, dim,
                                       vec_str(x.coords()), vec_str(y.coords()), gap);
        }
      }
    }
  }
  witness.pass = witness.worst > 1e-6;
  if (!witness.pass) witness.detail = "no pair with |x (+) y - y (+) x| > 1e-6";
  return {identity.r, inverse.r, symmetry.r, positivity.r, log_exp.r, exp_log.r, witness};
}

std::vector<CheckResult> run_limit_suite(const CheckOptions& opts) {
  const double tol = tol_or(opts, kLimitSuiteTolerance);
  const double c = 1e-6;
  const PoincareBall ball(c);
  std::mt19937_64 rng(opts.seed + 1);
  std::uniform_real_distribution<double> radius(0.1, 2.0);
  Tracker add("limit", "c=1e-6 Mobius addition vs x + y", tol);
  Tracker matvec("limit", "c=1e-6 Mobius matvec vs M x", tol);
  for (const Eigen::Index dim : {2, 8, 64}) {
    for (int k = 0; k < 1000; ++k) {
      Vec xv = gaussian(rng, dim);
      Vec yv = gaussian(rng, dim);
      xv *= radius(rng) / xv.norm();
      yv *= radius(rng) / yv.norm();
      const BallPoint x(xv);
      const BallPoint y(yv);
      const Vec euclid = xv + yv;
      const double e_add =
          (ball.mobius_add(x, y).coords() - euclid).norm() / std::max(euclid.norm(), 1e-12);
      add.observe(e_add, [&] {
        return fmt::format("dim={} x={} y={}: relative error {:.3g}", dim, vec_str(xv),
                           vec_str(yv), e_add);
      });
      const Mat m = Mat::NullaryExpr(dim, dim, [&] { return gaussian(rng, 1)[0]; }) /
                    std::sqrt(static_cast<double>(dim));
      const Vec mx = m * xv;
      const double e_mv = (ball.mobius_matvec(m, x).coords() - mx).norm() / mx.norm();
      matvec.observe(e_mv, [&] {
        return fmt::format("dim={} x={}: relative error {:.3g}", dim, vec_str(xv), e_mv);
      });
    }
  }

  CheckResult ranking{"limit", "c=1e-6 nearest-neighbor rankings match Euclidean", true, 0, 0.0, ""};
  const Eigen::Index dim = 8;
  const int candidates = 20;
  for (int q = 0; q < 100; ++q) {
    Vec query = gaussian(rng, dim);
    std::vector<Vec> cand;
    for (int k = 0; k < candidates; ++k) cand.push_back(gaussian(rng, dim));
    std::vector<int> by_ball(candidates);
    std::vector<int> by_euclid(candidates);
    std::iota(by_ball.begin(), by_ball.end(), 0);
    std::iota(by_euclid.begin(), by_euclid.end(), 0);
    std::vector<double> db(candidates);
    std::vector<double> de(candidates);
    for (int k = 0; k < candidates; ++k) {
      db[static_cast<std::size_t>(k)] = ball.dist(BallPoint(query), BallPoint(cand[static_cast<std::size_t>(k)]));
      de[static_cast<std::size_t>(k)] = (query - cand[static_cast<std::size_t>(k)]).norm();
    }
    std::stable_sort(by_ball.begin(), by_ball.end(), [&](int a, int b) { return db[static_cast<std::size_t>(a)] < db[static_cast<std::size_t>(b)]; });
    std::stable_sort(by_euclid.begin(), by_euclid.end(), [&](int a, int b) { return de[static_cast<std::size_t>(a)] < de[static_cast<std::size_t>(b)]; });
    ++ranking.cases;
    if (by_ball != by_euclid) {
      ranking.worst += 1.0;
      if (ranking.pass) {
        ranking.pass = false;
        ranking.detail = fmt::format("query {} = {}: rankings differ", q, vec_str(query));
      }
    }
  }
  return {add.r, matvec.r, ranking};
}

namespace {

struct MicroModel {
  ModelConfig cfg;
  ParamStore params;
  SocialGraph graph;
  std::vector<RecTriple> rec;
  std::vector<SocialTriple> social;
  double lambda = 0.5;
};

MicroModel make_micro_model(std::mt19937_64& rng) {
  MicroModel m;
  m.cfg.dim = 4;
  m.cfg.layers = 1;
  std::uniform_int_distribution<int> pick_users(3, 7);
  const int nu = pick_users(rng);
  const int ni = 5;
  std::vector<SocialGraph::Edge> edges;
  std::uniform_int_distribution<int> any_user(0, nu - 1);
  std::uniform_int_distribution<int> degree(0, std::min(5, nu - 1));
  for (int a = 0; a < nu; ++a) {
    const int k = degree(rng);
    for (int e = 0; e < 4 * k && static_cast<int>(std::count_if(edges.begin(), edges.end(), [&](auto& p) { return p.first == a; })) < k; ++e) {
      const int b = any_user(rng);
      if (b != a && std::find(edges.begin(), edges.end(), SocialGraph::Edge{a, b}) == edges.end()) {
        edges.emplace_back(a, b);
      }
    }
  }
  m.graph = SocialGraph::from_edges(nu, edges);
  m.params = init_params(m.cfg, nu, ni, rng());
  std::uniform_real_distribution<double> radius(0.05, 0.5);
  std::uniform_real_distribution<double> entry(-0.5, 0.5);
  for (Mat* emb : {&m.params.users(), &m.params.items()}) {
    for (Eigen::Index j = 0; j < emb->cols(); ++j) {
      const Vec v = gaussian(rng, emb->rows());
      emb->col(j) = v * (radius(rng) / v.norm());
    }
  }
  for (auto& w : m.params.attention()) w = Mat::NullaryExpr(w.rows(), w.cols(), [&] { return entry(rng); });

  std::uniform_int_distribution<int> any_item(0, ni - 1);
  for (int k = 0; k < 4; ++k) {
    const int u = any_user(rng);
    const int i = any_item(rng);
    int j = any_item(rng);
    while (j == i) j = any_item(rng);
    m.rec.push_back({u, i, j});
  }
  for (int k = 0; k < 4; ++k) {
    const int u = any_user(rng);
    const auto& nb = m.graph.neighbors(u);
    if (nb.empty() || static_cast<int>(nb.size()) >= nu - 1) continue;
    const int p = nb[std::uniform_int_distribution<std::size_t>(0, nb.size() - 1)(rng)];
    int q = any_user(rng);
    while (q == u || m.graph.has_edge(u, q)) q = any_user(rng);
    m.social.push_back({u, p, q});
  }
  return m;
}

}  // namespace

namespace {

// Extended-precision evaluation of the micro-model objective (one
// attention layer, hyperbolic), independent of the production forward.
using Real = long double;
using RVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using RMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

struct Reference {
  const MicroModel& m;
  RMat users, items, layer, attention;

  explicit Reference(const MicroModel& mm) : m(mm) { load(mm.params); }

  void load(const ParamStore& p) {
    users = p.users().cast<Real>();
    items = p.items().cast<Real>();
    layer = p.layers().front().cast<Real>();
    attention = p.attention().front().cast<Real>();
  }

  Real sqrt_c() const { return std::sqrt(static_cast<Real>(m.cfg.curvature)); }

  RVec log0(const RVec& x) const {
    const Real n = x.norm();
    if (n == 0) return x;
    return x * (std::atanh(sqrt_c() * n) / (sqrt_c() * n));
  }
  RVec exp0(const RVec& v) const {
    const Real n = v.norm();
    if (n == 0) return v;
    return v * (std::tanh(sqrt_c() * n) / (sqrt_c() * n));
  }
  Real dist(const RVec& x, const RVec& y) const {
    const Real c = static_cast<Real>(m.cfg.curvature);
    const RVec a = -x;
    const Real ab = a.dot(y);
    const Real a2 = a.squaredNorm();
    const Real b2 = y.squaredNorm();
    const RVec num = (1 + 2 * c * ab + c * b2) * a + (1 - c * a2) * y;
    const Real den = 1 + 2 * c * ab + c * c * a2 * b2;
    return 2 / sqrt_c() * std::atanh(sqrt_c() * (num / den).norm());
  }

  RVec representation(int user, int item) const {
    const Real slope = static_cast<Real>(m.cfg.leaky_slope);
    const Eigen::Index d = m.cfg.dim;
    const RVec self_t = log0(users.col(user));
    const RVec item_t = log0(items.col(item));
    RVec t = self_t;
    const auto& nbs = m.graph.neighbors(user);
    if (!nbs.empty()) {
      std::vector<Real> logits;
      for (int b : nbs) {
        const RVec tb = log0(users.col(b));
        const RVec gate = (attention.topRows(d).transpose() * tb +
                           attention.bottomRows(d).transpose() * item_t)
                              .unaryExpr([](Real v) { return std::tanh(v); });
        logits.push_back(self_t.cwiseProduct(tb).dot(gate) / static_cast<Real>(m.cfg.tau));
      }
      const Real top = *std::max_element(logits.begin(), logits.end());
      Real total = 0;
      for (Real& l : logits) total += (l = std::exp(l - top));
      RVec acc = RVec::Zero(d);
      for (std::size_t k = 0; k < nbs.size(); ++k) acc += logits[k] / total * log0(users.col(nbs[k]));
      t += static_cast<Real>(m.cfg.gamma) * acc;
    }
    const RVec transformed = exp0(layer * log0(exp0(t)));
    const RVec act = log0(transformed).unaryExpr([slope](Real v) { return v > 0 ? v : slope * v; });
    return exp0(act);
  }

  Real prob(int user, int item) const {
    const Real z = (dist(representation(user, item), items.col(item)) -
                    static_cast<Real>(m.cfg.fd_radius)) /
                   static_cast<Real>(m.cfg.fd_temperature);
    return 1 / (std::exp(z) + 1);
  }

  Real loss() const {
    Real rec = 0;
    for (const auto& t : m.rec) rec -= std::log(prob(t.user, t.pos)) + std::log(1 - prob(t.user, t.neg));
    Real social = 0;
    for (const auto& t : m.social) {
      const Real diff = dist(users.col(t.user), users.col(t.other)) -
                        dist(users.col(t.user), users.col(t.trusted));
      social += std::log1p(std::exp(-diff));
    }
    return rec + static_cast<Real>(m.lambda) * social;
  }

  RMat& slot(const ParamKey& key) {
    switch (key.kind) {
      case ParamKind::kUser: return users;
      case ParamKind::kItem: return items;
      case ParamKind::kLayer: return layer;
      default: return attention;
    }
  }
};

}  // namespace

std::vector<CheckResult> run_grad_suite(const CheckOptions& opts) {
  const double tol = tol_or(opts, kGradSuiteTolerance);
  const Real h = 1e-6L;
  const double floor = 1e-8;
  std::mt19937_64 rng(opts.seed + 2);
  Tracker grad("grad", "autodiff vs central differences (h=1e-6)", tol);
  Tracker value("grad", "objective vs extended-precision reference", tol);
  std::size_t skipped = 0;
  for (int model_id = 0; model_id < 50; ++model_id) {
    MicroModel m = make_micro_model(rng);
    ad::Tape tape;
    TapeModel tm(tape, m.params, m.graph, m.cfg);
    const BatchLoss loss = record_batch_loss(tm, m.rec, m.social, m.lambda);
    const GradientMap grads = tm.gradients(tape.backward(loss.total));

    Reference ref(m);
    const double plain = batch_loss_value(m.params, m.graph, m.cfg, m.rec, m.social, m.lambda);
    const double exact = static_cast<double>(ref.loss());
    const double e_val = std::abs(plain - exact) / std::max(1.0, std::abs(exact));
    value.observe(e_val, [&] {
      return fmt::format("model {}: objective {:.15g} vs reference {:.15g}", model_id, plain, exact);
    });

    for (const ParamKey& key : m.params.keys()) {
      const Vec base = m.params.get(key);
      const auto it = grads.find(key);
      const Vec analytic = it == grads.end() ? Vec::Zero(base.size()) : it->second;
      RMat& slot = ref.slot(key);
      const Eigen::Index col = key.kind == ParamKind::kUser || key.kind == ParamKind::kItem ? key.index : 0;
      for (Eigen::Index k = 0; k < base.size(); ++k) {
        // Embeddings are columns; matrices are flattened column-major.
        Real* entry = key.kind == ParamKind::kUser || key.kind == ParamKind::kItem
                          ? &slot(k, col)
                          : &slot(k % slot.rows(), k / slot.rows());
        const Real saved = *entry;
        *entry = saved + h;
        const Real lp = ref.loss();
        *entry = saved - h;
        const Real lm = ref.loss();
        *entry = saved;
        const double numeric = static_cast<double>((lp - lm) / (2 * h));
        const double scale = std::max(std::abs(numeric), std::abs(analytic[k]));
        if (scale < floor) {
          ++skipped;
          continue;
        }
        const double rel = std::abs(numeric - analytic[k]) / scale;
        grad.observe(rel, [&] {
          return fmt::format("model {} {}[{}]: autodiff {:.10g} vs numeric {:.10g} (rel {:.3g})",
                             model_id, to_string(key), k, analytic[k], numeric, rel);
        });
      }
    }
  }
  if (grad.r.pass) grad.r.detail = fmt::format("{} coordinates below 1e-8 skipped", skipped);
  return {grad.r, value.r};
}

std::string format_check(const CheckResult& r) {
  std::string out = fmt::format("[{}] {}: {} ({} cases, worst {:.3g})", r.pass ? "PASS" : "FAIL",
                                r.suite, r.property, r.cases, r.worst);
  if (!r.detail.empty()) out += "\n       " + r.detail;
  return out;
}

}  // namespace hsr
