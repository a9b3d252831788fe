#include "hsr/objective.hpp"

#include <algorithm>
#include <cmath>

#include "hsr/errors.hpp"
#include "hsr/log.hpp"

namespace hsr {

// ---- Samplers -------------------------------------------------------------

RecSampler::RecSampler(const InteractionData& data) : data_(data) {
  for (int u = 0; u < data.num_users; ++u) {
    const auto& pos = data.positives[static_cast<std::size_t>(u)];
    if (pos.empty()) continue;
    if (static_cast<int>(pos.size()) >= data.num_items) {
      ++skipped_;
      continue;
    }
    for (int i : pos) pairs_.emplace_back(u, i);
  }
  if (skipped_ > 0) {
    spdlog::warn("rec sampler: skipped {} users whose every item is positive", skipped_);
  }
}

std::vector<RecTriple> RecSampler::sample(std::size_t count, std::mt19937_64& rng) const {
  std::vector<RecTriple> out;
  if (count == 0) return out;
  if (pairs_.empty()) throw UsageError("sample_rec_batch: no training positives");
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs_.size() - 1);
  std::uniform_int_distribution<int> pick_item(0, data_.num_items - 1);
  for (std::size_t n = 0; n < count; ++n) {
    const auto [u, i] = pairs_[pick_pair(rng)];
    const auto& pos = data_.positives[static_cast<std::size_t>(u)];
    int j = pick_item(rng);
    while (std::binary_search(pos.begin(), pos.end(), j)) j = pick_item(rng);
    out.push_back({u, i, j});
  }
  return out;
}

SocialSampler::SocialSampler(const SocialGraph& graph) : graph_(graph) {
  const int nu = graph.num_users();
  for (int u = 0; u < nu; ++u) {
    // Needs at least one admissible non-neighbor.
    if (graph.out_degree(u) >= nu - 1) continue;
    for (int p : graph.neighbors(u)) edges_.emplace_back(u, p);
  }
}

std::vector<SocialTriple> SocialSampler::sample(std::size_t count, std::mt19937_64& rng) const {
  std::vector<SocialTriple> out;
  if (count == 0) return out;
  if (edges_.empty()) throw UsageError("sample_social_batch: no usable social edges");
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> pick_edge(0, edges_.size() - 1);
  std::uniform_int_distribution<int> pick_user(0, graph_.num_users() - 1);
  for (std::size_t n = 0; n < count; ++n) {
    const auto [u, p] = edges_[pick_edge(rng)];
    int q = pick_user(rng);
    while (q == u || graph_.has_edge(u, q)) q = pick_user(rng);
    out.push_back({u, p, q});
  }
  return out;
}

std::vector<RecTriple> sample_rec_batch(const InteractionData& data, std::size_t count,
                                        std::mt19937_64& rng) {
  return RecSampler(data).sample(count, rng);
}

std::vector<SocialTriple> sample_social_batch(const SocialGraph& graph, std::size_t count,
                                              std::mt19937_64& rng) {
  return SocialSampler(graph).sample(count, rng);
}

// ---- Losses ---------------------------------------------------------------

namespace {

void require_probability(double p) {
  if (std::isnan(p)) throw NumericError("rec_loss: predicted probability is NaN");
}

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

ad::Var accumulate(const std::vector<ad::Var>& terms) {
  ad::Var acc = terms.front();
  for (std::size_t k = 1; k < terms.size(); ++k) acc = ad::add(acc, terms[k]);
  return acc;
}

}  // namespace

ad::Var rec_loss(std::span<const ad::Var> pos_probs, std::span<const ad::Var> neg_probs) {
  if (pos_probs.size() != neg_probs.size()) {
    throw UsageError("rec_loss: positive and negative lists differ in length");
  }
  if (pos_probs.empty()) throw UsageError("rec_loss: empty batch");
  std::vector<ad::Var> terms;
  terms.reserve(2 * pos_probs.size());
  for (std::size_t k = 0; k < pos_probs.size(); ++k) {
    require_probability(pos_probs[k].scalar());
    require_probability(neg_probs[k].scalar());
    const ad::Var p = ad::clamp(pos_probs[k], kProbFloor, 1.0 - kProbFloor);
    const ad::Var q = ad::clamp(neg_probs[k], kProbFloor, 1.0 - kProbFloor);
    terms.push_back(ad::log(p));
    terms.push_back(ad::log(ad::add_const(ad::neg(q), 1.0)));
  }
  return ad::neg(accumulate(terms));
}

double rec_loss(std::span<const double> pos_probs, std::span<const double> neg_probs) {
  if (pos_probs.size() != neg_probs.size()) {
    throw UsageError("rec_loss: positive and negative lists differ in length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < pos_probs.size(); ++k) {
    require_probability(pos_probs[k]);
    require_probability(neg_probs[k]);
    total += std::log(clamp_prob(pos_probs[k]));
    total += std::log(1.0 - clamp_prob(neg_probs[k]));
  }
  return -total;
}

ad::Var social_loss(std::span<const ad::Var> trusted_scores,
                    std::span<const ad::Var> other_scores) {
  if (trusted_scores.size() != other_scores.size()) {
    throw UsageError("social_loss: score lists differ in length");
  }
  if (trusted_scores.empty()) throw UsageError("social_loss: empty batch");
  std::vector<ad::Var> terms;
  terms.reserve(trusted_scores.size());
  for (std::size_t k = 0; k < trusted_scores.size(); ++k) {
    terms.push_back(ad::log_sigmoid(ad::sub(trusted_scores[k], other_scores[k])));
  }
  return ad::neg(accumulate(terms));
}

double social_loss(std::span<const double> trusted_scores, std::span<const double> other_scores) {
  if (trusted_scores.size() != other_scores.size()) {
    throw UsageError("social_loss: score lists differ in length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < trusted_scores.size(); ++k) {
    const double x = trusted_scores[k] - other_scores[k];
    // log sigma(x) without overflow
    total += x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  }
  return -total;
}

ad::Var total_loss(ad::Var rec, ad::Var social, double lambda) {
  if (!(lambda >= 0.0)) throw UsageError("total_loss: lambda must be nonnegative");
  if (lambda == 0.0) return rec;
  return ad::add(rec, ad::scale(social, lambda));
}

double total_loss(double rec, double social, double lambda) {
  if (!(lambda >= 0.0)) throw UsageError("total_loss: lambda must be nonnegative");
  if (lambda == 0.0) return rec;
  return rec + lambda * social;
}

double social_score(const PoincareBall& ball, const BallPoint& ua, const BallPoint& ub) {
  return -ball.dist(ua, ub);
}

BatchLoss record_batch_loss(TapeModel& model, std::span<const RecTriple> rec,
                            std::span<const SocialTriple> social, double lambda) {
  std::vector<ad::Var> pos;
  std::vector<ad::Var> neg;
  pos.reserve(rec.size());
  neg.reserve(rec.size());
  for (const auto& t : rec) {
    pos.push_back(model.forward(t.user, t.pos));
    neg.push_back(model.forward(t.user, t.neg));
  }
  BatchLoss out;
  out.rec = rec_loss(pos, neg);
  out.total = out.rec;
  if (lambda > 0.0 && !social.empty()) {
    std::vector<ad::Var> sp;
    std::vector<ad::Var> sq;
    sp.reserve(social.size());
    sq.reserve(social.size());
    for (const auto& t : social) {
      sp.push_back(model.social_score(t.user, t.trusted));
      sq.push_back(model.social_score(t.user, t.other));
    }
    out.social = social_loss(sp, sq);
    out.total = total_loss(out.rec, out.social, lambda);
  }
  return out;
}

double batch_loss_value(const ParamStore& params, const SocialGraph& graph, const ModelConfig& cfg,
                        std::span<const RecTriple> rec, std::span<const SocialTriple> social,
                        double lambda) {
  const Scorer scorer(params, graph, cfg);
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& t : rec) {
    pos.push_back(scorer.score(t.user, t.pos));
    neg.push_back(scorer.score(t.user, t.neg));
  }
  const double lr = rec_loss(pos, neg);
  if (!(lambda > 0.0) || social.empty()) return lr;
  auto score = [&](int a, int b) {
    const Vec ua = params.users().col(a);
    const Vec ub = params.users().col(b);
    if (cfg.geometry == Geometry::kEuclidean) return -(ua - ub).norm();
    return social_score(cfg.ball(), BallPoint(ua), BallPoint(ub));
  };
  std::vector<double> sp;
  std::vector<double> sq;
  for (const auto& t : social) {
    sp.push_back(score(t.user, t.trusted));
    sq.push_back(score(t.user, t.other));
  }
  return total_loss(lr, social_loss(sp, sq), lambda);
}

}  // namespace hsr
