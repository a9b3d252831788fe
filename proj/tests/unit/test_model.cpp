#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "hsr/errors.hpp"
#include "hsr/model.hpp"

using namespace hsr;

namespace {

Vec v1(double a) { return (Vec(1) << a).finished(); }

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> len(lo, hi);
  Vec v(n);
  for (auto& x : v) x = n01(rng);
  return v * (len(rng) / v.norm());
}

struct RandomModel {
  ModelConfig cfg;
  SocialGraph graph;
  ParamStore params;
};

RandomModel random_model(std::mt19937_64& rng, int nu, int ni, int dim, int layers,
                         Geometry geometry = Geometry::kHyperbolic, double max_norm = 0.6) {
  RandomModel m;
  m.cfg.dim = dim;
  m.cfg.layers = layers;
  m.cfg.geometry = geometry;
  std::vector<SocialGraph::Edge> edges;
  std::uniform_int_distribution<int> pick(0, nu - 1);
  for (int a = 0; a < nu; ++a) {
    const int deg = std::uniform_int_distribution<int>(0, std::min(4, nu - 1))(rng);
    for (int k = 0; k < deg; ++k) edges.emplace_back(a, pick(rng));
  }
  m.graph = SocialGraph::from_edges(nu, edges);
  m.params = init_params(m.cfg, nu, ni, rng());
  for (Eigen::Index j = 0; j < nu; ++j) m.params.users().col(j) = random_vec(rng, dim, 0.05, max_norm);
  for (Eigen::Index j = 0; j < ni; ++j) m.params.items().col(j) = random_vec(rng, dim, 0.05, max_norm);
  return m;
}

std::vector<int> ranking(std::vector<double> scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("attention logit examples") {
  const PoincareBall ball(1.0);
  const BallPoint p(v1(0.5));
  const Mat w = Mat::Ones(2, 1);
  CHECK(attention_logit(ball, p, p, p, w) == doctest::Approx(0.24139).epsilon(1e-4));
  CHECK(attention_logit(ball, BallPoint(v1(0.0)), p, p, w) == 0.0);
  CHECK(attention_logit(ball, p, p, p, Mat::Zero(2, 1)) == 0.0);
  const double t = std::atanh(0.5);
  CHECK(attention_logit(ball, p, p, p, w) == doctest::Approx(t * t * std::tanh(2 * t)).epsilon(1e-14));
  CHECK_THROWS_AS(attention_logit(ball, p, p, p, Mat::Ones(3, 1)), UsageError);
  CHECK_THROWS_AS(attention_logit(ball, p, BallPoint(Vec::Zero(2)), p, w), UsageError);
}

TEST_CASE("attention weights examples") {
  const std::vector<double> same = {0.7, 0.7, 0.7};
  for (const double w : attention_weights(same, 0.05)) CHECK(w == doctest::Approx(1.0 / 3));
  const std::vector<double> two = {1.0, 0.0};
  const auto w2 = attention_weights(two, 0.1);
  CHECK(w2[0] == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(w2[1] == doctest::Approx(0.0000454).epsilon(1e-3));
  const std::vector<double> one = {-3.0};
  CHECK(attention_weights(one, 0.1)[0] == 1.0);
  CHECK_THROWS_AS(attention_weights(std::vector<double>{}, 0.1), UsageError);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 200; ++k) {
    std::vector<double> logits(1 + k % 7);
    for (auto& l : logits) l = 30.0 * n01(rng);
    const auto w = attention_weights(logits, 0.01);
    CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-9);
  }
}

TEST_CASE("aggregate_layer examples") {
  ModelConfig cfg;
  cfg.dim = 2;
  const BallPoint item(Vec::Constant(2, 0.2));
  const Mat eye = Mat::Identity(2, 2);
  const Mat w = Mat::Constant(4, 2, 0.3);

  const std::vector<BallPoint> prev = {BallPoint((Vec(2) << 0.3, 0.2).finished()),
                                       BallPoint((Vec(2) << 0.1, 0.4).finished())};
  const auto alone = aggregate_layer(prev, item, SocialGraph(2), eye, w, cfg);
  CHECK((alone[0].coords() - prev[0].coords()).norm() < 1e-12);
  CHECK((alone[1].coords() - prev[1].coords()).norm() < 1e-12);

  const std::vector<BallPoint> with_origin = {prev[0], BallPoint(Vec::Zero(2))};
  const auto g = SocialGraph::from_edges(2, {{0, 1}});
  CHECK((aggregate_layer(with_origin, item, g, eye, w, cfg)[0].coords() - prev[0].coords()).norm() < 1e-12);

  ModelConfig one_d = cfg;
  one_d.dim = 1;
  const std::vector<BallPoint> pair = {BallPoint(v1(0.3)), BallPoint(v1(0.4))};
  const auto out = aggregate_layer(pair, BallPoint(v1(0.1)), g, Mat::Identity(1, 1), Mat::Ones(2, 1), one_d);
  CHECK(out[0].coords()[0] == doctest::Approx(std::tanh(std::atanh(0.3) + std::atanh(0.4))).epsilon(1e-14));
  CHECK(out[0].coords()[0] == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(out[1].coords()[0] == doctest::Approx(0.4).epsilon(1e-12));

  const std::vector<int> only = {1};
  const auto partial = aggregate_layer(pair, BallPoint(v1(0.1)), g, Mat::Identity(1, 1), Mat::Ones(2, 1), one_d, only);
  CHECK(partial[0].coords()[0] == 0.3);
}

TEST_CASE("mean attention with identical neighbors equals a single neighbor") {
  ModelConfig cfg;
  cfg.dim = 3;
  cfg.attention = AttentionMode::kMean;
  std::mt19937_64 rng(5);
  const Vec ua = random_vec(rng, 3, 0.1, 0.5);
  const Vec ub = random_vec(rng, 3, 0.1, 0.5);
  const BallPoint item(random_vec(rng, 3, 0.1, 0.5));
  Mat m(3, 3);
  for (auto& x : m.reshaped()) x = std::normal_distribution<double>()(rng);
  const Mat w = Mat::Random(6, 3);
  const std::vector<BallPoint> many = {BallPoint(ua), BallPoint(ub), BallPoint(ub), BallPoint(ub)};
  const auto g_many = SocialGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
  const std::vector<BallPoint> single = {BallPoint(ua), BallPoint(ub)};
  const auto g_single = SocialGraph::from_edges(2, {{0, 1}});
  const Vec a = aggregate_layer(many, item, g_many, m, w, cfg)[0].coords();
  const Vec b = aggregate_layer(single, item, g_single, m, w, cfg)[0].coords();
  CHECK((a - b).norm() < 1e-14);
}

TEST_CASE("tangent aggregation against sequential Mobius aggregation near the origin") {
  std::mt19937_64 rng(7);
  const PoincareBall ball(1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 5;
    const BallPoint ua(random_vec(rng, 4, 1e-5, 1e-3));
    std::vector<BallPoint> nb;
    for (int k = 0; k < n; ++k) nb.emplace_back(random_vec(rng, 4, 1e-5, 1e-3));
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    const Vec t = aggregate_tangent(ball, ua, nb, ones, 1.0).coords();
    const Vec e = aggregate_exact(ball, ua, nb, 1.0).coords();
    worst = std::max(worst, (t - e).norm() / e.norm());
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("aggregation order: tangent path invariant, Mobius path sensitive") {
  const PoincareBall ball(1.0);
  std::mt19937_64 rng(11);
  double tangent_gap = 0.0;
  double exact_gap = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const BallPoint ua(random_vec(rng, 3, 0.1, 0.7));
    std::vector<BallPoint> nb;
    std::vector<double> w;
    for (int k = 0; k < 4; ++k) {
      nb.emplace_back(random_vec(rng, 3, 0.1, 0.7));
      w.push_back(0.1 + 0.2 * k);
    }
    std::vector<BallPoint> nb_r(nb.rbegin(), nb.rend());
    std::vector<double> w_r(w.rbegin(), w.rend());
    tangent_gap = std::max(tangent_gap, (aggregate_tangent(ball, ua, nb, w, 1.0).coords() -
                                         aggregate_tangent(ball, ua, nb_r, w_r, 1.0).coords()).norm());
    exact_gap = std::max(exact_gap, (aggregate_exact(ball, ua, nb, 1.0).coords() -
                                     aggregate_exact(ball, ua, nb_r, 1.0).coords()).norm());
  }
  CHECK(tangent_gap < 1e-12);
  CHECK(exact_gap > 1e-3);

  std::mt19937_64 rng2(13);
  RandomModel m = random_model(rng2, 6, 3, 3, 1);
  m.graph = SocialGraph::from_edges(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  std::vector<BallPoint> prev;
  for (int j = 0; j < 6; ++j) prev.emplace_back(m.params.users().col(j));
  const BallPoint item(m.params.items().col(0));
  const Vec base = aggregate_layer(prev, item, m.graph, m.params.layers()[0], m.params.attention()[0], m.cfg)[0].coords();
  std::vector<BallPoint> swapped = prev;
  std::swap(swapped[1], swapped[4]);
  std::swap(swapped[2], swapped[3]);
  const Vec perm = aggregate_layer(swapped, item, m.graph, m.params.layers()[0], m.params.attention()[0], m.cfg)[0].coords();
  CHECK((base - perm).norm() < 1e-13);
}

TEST_CASE("Fermi-Dirac decoder") {
  CHECK(fermi_dirac(2.0, 2.0, 1.0) == 0.5);
  const PoincareBall ball(1.0);
  const BallPoint x((Vec(2) << 0.3, -0.1).finished());
  CHECK(predict(ball, x, x, 2.0, 1.0) == doctest::Approx(0.880797).epsilon(1e-6));
  CHECK(fermi_dirac(1e4, 2.0, 1.0) == doctest::Approx(0.0));
  CHECK(fermi_dirac(1.0, 2.0, 0.5) > fermi_dirac(1.5, 2.0, 0.5));
}

TEST_CASE("config validation") {
  ModelConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.layers = -1;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = ModelConfig{};
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg = ModelConfig{};
  cfg.curvature = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.geometry = Geometry::kEuclidean;
  CHECK_NOTHROW(cfg.validate());
  cfg = ModelConfig{};
  cfg.fd_temperature = -1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("initialization") {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.layers = 2;
  const ParamStore p = init_params(cfg, 5, 7, 99);
  CHECK(p.users().cols() == 5);
  CHECK(p.items().cols() == 7);
  CHECK(p.layers().size() == 2);
  CHECK(p.attention()[1].rows() == 16);
  CHECK(p.attention()[1].cols() == 8);
  CHECK(p.users().cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(init_params(cfg, 5, 7, 99) == p);
  CHECK_FALSE(init_params(cfg, 5, 7, 100) == p);
}

TEST_CASE("zero layers predicts from raw embeddings") {
  std::mt19937_64 rng(17);
  RandomModel m = random_model(rng, 5, 4, 3, 0);
  const Scorer scorer(m.params, m.graph, m.cfg);
  const PoincareBall ball = m.cfg.ball();
  for (int u = 0; u < 5; ++u) {
    for (int i = 0; i < 4; ++i) {
      const double expected = predict(ball, BallPoint(m.params.users().col(u)),
                                      BallPoint(m.params.items().col(i)), 2.0, 1.0);
      CHECK(scorer.score(u, i) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("scorer matches a direct layer-by-layer evaluation") {
  std::mt19937_64 rng(19);
  for (const int layers : {1, 2}) {
    RandomModel m = random_model(rng, 8, 4, 3, layers);
    const Scorer scorer(m.params, m.graph, m.cfg);
    const PoincareBall ball = m.cfg.ball();
    for (int i = 0; i < 4; ++i) {
      const BallPoint item(m.params.items().col(i));
      std::vector<BallPoint> reps;
      for (int j = 0; j < 8; ++j) reps.emplace_back(m.params.users().col(j));
      for (int l = 0; l < layers; ++l) {
        reps = aggregate_layer(reps, item, m.graph, m.params.layers()[l], m.params.attention()[l], m.cfg);
        for (const auto& r : reps) CHECK(r.norm() <= ball.max_norm() * (1 + 1e-12));
      }
      for (int u = 0; u < 8; ++u) {
        CHECK((scorer.user_representation(u, i) - reps[u].coords()).norm() < 1e-12);
        CHECK(scorer.score(u, i) == doctest::Approx(predict(ball, reps[u], item, 2.0, 1.0)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("taped forward matches the scorer") {
  std::mt19937_64 rng(23);
  for (const auto geometry : {Geometry::kHyperbolic, Geometry::kEuclidean}) {
    for (const auto mode : {AttentionMode::kAttention, AttentionMode::kMean}) {
      RandomModel m = random_model(rng, 10, 6, 4, 2, geometry);
      m.cfg.attention = mode;
      const Scorer scorer(m.params, m.graph, m.cfg);
      ad::Tape tape;
      TapeModel model(tape, m.params, m.graph, m.cfg);
      for (int u = 0; u < 10; ++u) {
        for (int i = 0; i < 6; ++i) {
          CHECK(model.forward(u, i).scalar() == doctest::Approx(scorer.score(u, i)).epsilon(1e-12));
        }
      }
      CHECK_THROWS_AS(model.forward(10, 0), UsageError);
      CHECK_THROWS_AS(scorer.score(0, 6), UsageError);
    }
  }
}

TEST_CASE("scores stay in the open unit interval") {
  std::mt19937_64 rng(29);
  RandomModel m = random_model(rng, 50, 40, 4, 1, Geometry::kHyperbolic, 0.99);
  const Scorer scorer(m.params, m.graph, m.cfg);
  std::uniform_int_distribution<int> pu(0, 49);
  std::uniform_int_distribution<int> pi(0, 39);
  bool ok = true;
  for (int k = 0; k < 10000; ++k) {
    const double s = scorer.score(pu(rng), pi(rng));
    ok = ok && s > 0.0 && s < 1.0;
  }
  CHECK(ok);
}

TEST_CASE("euclidean model ranks like the hyperbolic model at tiny curvature") {
  std::mt19937_64 rng(31);
  int mismatches = 0;
  for (int trial = 0; trial < 20; ++trial) {
    RandomModel h = random_model(rng, 6, 12, 4, 1);
    h.cfg.curvature = 1e-6;
    RandomModel e = h;
    e.cfg.geometry = Geometry::kEuclidean;
    e.params = ParamStore(6, 12, 4, 1, Geometry::kEuclidean);
    e.params.users() = h.params.users();
    e.params.items() = h.params.items();
    e.params.layers() = h.params.layers();
    e.params.attention() = h.params.attention();
    const Scorer sh(h.params, h.graph, h.cfg);
    const Scorer se(e.params, e.graph, e.cfg);
    std::vector<int> items(12);
    std::iota(items.begin(), items.end(), 0);
    for (int u = 0; u < 6; ++u) {
      if (ranking(sh.score_items(u, items)) != ranking(se.score_items(u, items))) ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("first-layer weights") {
  std::mt19937_64 rng(37);
  RandomModel m = random_model(rng, 6, 3, 3, 1);
  m.graph = SocialGraph::from_edges(6, {{0, 1}, {0, 2}, {0, 5}, {1, 3}});
  const Scorer scorer(m.params, m.graph, m.cfg);
  const auto w = scorer.first_layer_weights(0, 1);
  CHECK(w.size() == 3);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(scorer.first_layer_weights(1, 0) == std::vector<double>{1.0});
  CHECK(scorer.first_layer_weights(4, 0).empty());
}

TEST_CASE("checkpoint round trip") {
  std::mt19937_64 rng(41);
  RandomModel m = random_model(rng, 7, 5, 3, 2);
  m.cfg.gamma = 0.7;
  m.cfg.tau = 0.05;
  const auto dir = std::filesystem::temp_directory_path() / "hsr_unit_ckpt";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.ckpt").string();
  save_checkpoint(path, m.params, m.cfg);
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.params == m.params);
  CHECK(c.config.dim == 3);
  CHECK(c.config.layers == 2);
  CHECK(c.config.gamma == 0.7);
  CHECK(c.config.tau == 0.05);
  {
    std::ifstream is(path, std::ios::binary);
    std::string magic(4, '\0');
    is.read(magic.data(), 4);
    CHECK(magic == "HSR1");
  }
  const std::string second = (dir / "again.ckpt").string();
  save_checkpoint(second, c.params, m.cfg);
  std::ifstream a(path, std::ios::binary);
  std::ifstream b(second, std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));

  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NOPE and more bytes";
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "bad.ckpt").string()), InputError);
  std::filesystem::resize_file(path, 40);
  CHECK_THROWS_AS(load_checkpoint(path), InputError);
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), InputError);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
