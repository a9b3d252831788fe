#pragma once

// Training triples and losses: pointwise cross-entropy over (u, i, j)
// triples, BPR over social (u, p, q) triples, and their weighted sum.

#include <random>
#include <span>
#include <vector>

#include "hsr/data.hpp"
#include "hsr/model.hpp"
#include "hsr/tape.hpp"

namespace hsr {

inline constexpr double kProbFloor = 1e-12;

struct RecTriple {
  int user;
  int pos;  // in the user's training positives
  int neg;  // not in the user's training positives
};

struct SocialTriple {
  int user;
  int trusted;  // in neighbors(user)
  int other;    // neither a neighbor nor the user
};

// Samples (user, positive) uniformly over training positive pairs and a
// negative uniformly from the remaining items (rejection on collision).
// Users whose every item is positive are skipped with a warning.
class RecSampler {
 public:
  explicit RecSampler(const InteractionData& data);

  std::vector<RecTriple> sample(std::size_t count, std::mt19937_64& rng) const;
  std::size_t num_pairs() const { return pairs_.size(); }
  std::size_t skipped_users() const { return skipped_; }

 private:
  const InteractionData& data_;
  std::vector<std::pair<int, int>> pairs_;
  std::size_t skipped_ = 0;
};

// Samples (user, trusted) uniformly over social edges and `other` uniformly
// from users outside neighbors(user) and distinct from user.
class SocialSampler {
 public:
  explicit SocialSampler(const SocialGraph& graph);

  std::vector<SocialTriple> sample(std::size_t count, std::mt19937_64& rng) const;
  std::size_t num_edges() const { return edges_.size(); }

 private:
  const SocialGraph& graph_;
  std::vector<SocialGraph::Edge> edges_;
};

std::vector<RecTriple> sample_rec_batch(const InteractionData& data, std::size_t count,
                                        std::mt19937_64& rng);
std::vector<SocialTriple> sample_social_batch(const SocialGraph& graph, std::size_t count,
                                              std::mt19937_64& rng);

// -sum [log p_ui + log(1 - p_uj)] with each probability clamped into
// [1e-12, 1 - 1e-12]. Throws NumericError on a NaN probability.
ad::Var rec_loss(std::span<const ad::Var> pos_probs, std::span<const ad::Var> neg_probs);
double rec_loss(std::span<const double> pos_probs, std::span<const double> neg_probs);

// -sum log sigmoid(score_p - score_q).
ad::Var social_loss(std::span<const ad::Var> trusted_scores, std::span<const ad::Var> other_scores);
double social_loss(std::span<const double> trusted_scores, std::span<const double> other_scores);

// Lr + lambda * Ls (returns Lr itself when lambda == 0).
ad::Var total_loss(ad::Var rec, ad::Var social, double lambda);
double total_loss(double rec, double social, double lambda);

// -dist(ua, ub) on raw embeddings.
double social_score(const PoincareBall& ball, const BallPoint& ua, const BallPoint& ub);

struct BatchLoss {
  ad::Var total;
  ad::Var rec;
  ad::Var social;  // invalid when the social term is skipped
};

// Records the full objective of one step on the model's tape.
BatchLoss record_batch_loss(TapeModel& model, std::span<const RecTriple> rec,
                            std::span<const SocialTriple> social, double lambda);

// Same objective on plain values (used by finite-difference checks and
// reporting).
double batch_loss_value(const ParamStore& params, const SocialGraph& graph, const ModelConfig& cfg,
                        std::span<const RecTriple> rec, std::span<const SocialTriple> social,
                        double lambda);

}  // namespace hsr
