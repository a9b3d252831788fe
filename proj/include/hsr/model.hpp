#pragma once

// Social-aggregation recommender: embedding lookup, L rounds of
// attention-weighted aggregation in the tangent space at the origin, and a
// Fermi-Dirac decoder over the ball distance. Setting geometry to euclidean
// swaps every hyperbolic operation for its flat analogue (log0/exp0 become
// identities, Mobius matvec becomes M*x, distance becomes |x - y|).

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hsr/ad_ball.hpp"
#include "hsr/ball.hpp"
#include "hsr/params.hpp"
#include "hsr/social_graph.hpp"
#include "hsr/tape.hpp"

namespace hsr {

enum class AttentionMode { kAttention, kMean };

struct ModelConfig {
  int dim = 32;
  int layers = 1;
  double curvature = 1.0;
  double gamma = 1.0;
  double tau = 0.1;
  double fd_radius = 2.0;       // Fermi-Dirac r
  double fd_temperature = 1.0;  // Fermi-Dirac t
  Geometry geometry = Geometry::kHyperbolic;
  AttentionMode attention = AttentionMode::kAttention;
  double leaky_slope = 0.01;
  double ball_eps = kBallEps;

  // Throws UsageError on an invalid combination.
  void validate() const;
  PoincareBall ball() const { return PoincareBall(curvature, ball_eps); }
};

// Embeddings uniform in [-1e-3, 1e-3] (projected); matrices Glorot-uniform.
ParamStore init_params(const ModelConfig& cfg, int num_users, int num_items, std::uint64_t seed);

// ---- Single-step operations on plain values -------------------------------

// (log0 ua * log0 ub)^T tanh(w^T [log0 ub, log0 vi]); w is 2d x d.
double attention_logit(const PoincareBall& ball, const BallPoint& ua, const BallPoint& ub,
                       const BallPoint& vi, const Mat& w);

// softmax(logits / tau). Throws UsageError on an empty list.
std::vector<double> attention_weights(std::span<const double> logits, double tau);

// One aggregation layer for the listed users (all users when `users` is
// empty). Returns one point per entry of `prev` (users not listed are
// copied through unchanged).
std::vector<BallPoint> aggregate_layer(const std::vector<BallPoint>& prev, const BallPoint& item,
                                       const SocialGraph& graph, const Mat& transform,
                                       const Mat& attention, const ModelConfig& cfg,
                                       std::span<const int> users = {});

// Sequential Mobius aggregation ua (+) (gamma (x) (((ub1 (+) ub2) (+) ub3) ...)).
// Order sensitive; a reference for the tangent-space form.
BallPoint aggregate_exact(const PoincareBall& ball, const BallPoint& ua,
                          std::span<const BallPoint> neighbors, double gamma);

// Tangent-space aggregation before the transform and activation:
// exp0(log0 ua + gamma * sum_b weight_b * log0 ub).
BallPoint aggregate_tangent(const PoincareBall& ball, const BallPoint& ua,
                            std::span<const BallPoint> neighbors, std::span<const double> weights,
                            double gamma);

// Fermi-Dirac decoder 1 / (exp((distance - r) / t) + 1).
double fermi_dirac(double distance, double r, double t);
double predict(const PoincareBall& ball, const BallPoint& user, const BallPoint& item, double r,
               double t);

// ---- Forward pass ---------------------------------------------------------

// Plain-value evaluation of the full model.
class Scorer {
 public:
  Scorer(const ParamStore& params, const SocialGraph& graph, const ModelConfig& cfg);

  double score(int user, int item) const;
  std::vector<double> score_items(int user, std::span<const int> items) const;
  // Final-layer user representation conditioned on `item`.
  Vec user_representation(int user, int item) const;
  // Normalized neighbor weights of `user` at the first layer for `item`
  // (sorted neighbor order). Empty when the user has no neighbors.
  std::vector<double> first_layer_weights(int user, int item) const;

  const ParamStore& params() const { return params_; }
  const SocialGraph& graph() const { return graph_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  const ParamStore& params_;
  const SocialGraph& graph_;
  ModelConfig cfg_;
  std::vector<Vec> user_tangent_;  // log0 of raw user embeddings
  // First-layer gate halves: W_top^T log0(u_b) per user, W_bot^T log0(v_i)
  // per item (one column each).
  Mat user_gate_;
  Mat item_gate_;
};

// Records forward passes of a mini-batch on a tape. Parameter leaves and the
// log0 of raw embeddings are created once per batch and shared.
class TapeModel {
 public:
  TapeModel(ad::Tape& tape, const ParamStore& params, const SocialGraph& graph,
            const ModelConfig& cfg);

  // Predicted probability for (user, item).
  ad::Var forward(int user, int item);
  // Negative distance between raw user embeddings.
  ad::Var social_score(int a, int b);

  ad::Var user_leaf(int user);
  ad::Var item_leaf(int item);
  ad::Var layer_leaf(int layer);
  ad::Var attention_leaf(int layer);

  // Euclidean gradient of every leaf touched on this tape.
  GradientMap gradients(const ad::Adjoints& adjoints) const;

  ad::Tape& tape() { return tape_; }
  const ModelConfig& config() const { return cfg_; }

 private:
  struct Rep {
    ad::Var point;
    ad::Var tangent;
  };

  ad::Var user_tangent0(int user);
  ad::Var item_tangent0(int item);
  ad::Var to_tangent(ad::Var x) const;
  ad::Var to_ball(ad::Var v) const;
  ad::Var transform(int layer, ad::Var x);
  ad::Var activate(ad::Var x) const;
  ad::Var distance(ad::Var x, ad::Var y) const;
  Rep representation(int user, int layer, int item, std::unordered_map<long, Rep>& memo);
  ad::Var item_gate(int layer, int item);
  ad::Var neighbor_gate(int layer, int user, ad::Var tangent);

  ad::Tape& tape_;
  const ParamStore& params_;
  const SocialGraph& graph_;
  ModelConfig cfg_;
  ad::BallOps ball_;
  std::unordered_map<int, ad::Var> users_;
  std::unordered_map<int, ad::Var> items_;
  std::unordered_map<int, ad::Var> user_tangents_;
  std::unordered_map<int, ad::Var> item_tangents_;
  std::unordered_map<long, ad::Var> item_gates_;
  std::unordered_map<int, ad::Var> user_gates_;
  std::vector<ad::Var> layers_;
  std::vector<ad::Var> attention_;
};

// ---- Checkpoints ----------------------------------------------------------

// Binary layout: "HSR1", u32 d, L, |U|, |V|, f64 c, gamma, tau, r, t, then
// row-major f64 user embeddings (|U| x d), item embeddings (|V| x d), each
// layer matrix (d x d), each attention matrix (2d x d). Little-endian.
void save_checkpoint(const std::string& path, const ParamStore& params, const ModelConfig& cfg);

struct Checkpoint {
  ParamStore params;
  ModelConfig config;  // only the header fields are populated
};

// Throws InputError on unreadable/short/badly tagged files.
Checkpoint load_checkpoint(const std::string& path, Geometry geometry = Geometry::kHyperbolic);

}  // namespace hsr
