#pragma once

// Measurement: CTR metrics (AUC, accuracy), top-K ranking with sampled
// unrated candidates, sparsity-binned reports, distance-to-origin hierarchy
// groups and first-layer attention export.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsr/data.hpp"
#include "hsr/model.hpp"

namespace hsr {

struct Scored {
  double score;
  int label;  // 0 or 1
};

// Mann-Whitney AUC; tied pairs count 1/2. Throws UsageError unless both
// classes are present.
double auc(std::span<const Scored> scored);
// Fraction of entries with (score >= threshold) == label; 0 for empty input.
double accuracy(std::span<const Scored> scored, double threshold = 0.5);

inline const std::vector<int> kDefaultKs = {5, 10, 15, 20};

// Candidates of one user, best first. Ties are broken by item id ascending.
struct RankedList {
  int user = -1;
  std::vector<int> items;
  std::vector<double> scores;
  std::vector<char> positive;
};

RankedList rank_candidates(int user, std::span<const int> items, std::span<const double> scores,
                           std::span<const char> positive);

struct UserTopK {
  std::vector<double> precision;  // one per K
  std::vector<double> recall;
};

// Precision@K = hits/K, Recall@K = hits/|positives in list|.
UserTopK topk_from_ranking(const RankedList& ranked, std::span<const int> ks);

struct MetricReport {
  double auc = 0.0;  // NaN when undefined (single class)
  double accuracy = 0.0;
  std::size_t ctr_records = 0;
  std::vector<int> ks;
  std::vector<double> precision;
  std::vector<double> recall;
  std::size_t topk_users = 0;
};

// AUC and accuracy over the labeled records of one split.
MetricReport ctr_eval(const Scorer& scorer, const InteractionData& data, Split split,
                      std::span<const int> users = {}, double threshold = 0.5);

struct TopKOptions {
  std::vector<int> ks = kDefaultKs;
  int num_negatives = 500;
  std::uint64_t seed = 0;
  int repeats = 1;  // candidate-sampling seeds seed, seed+1, ...; reports the mean
  int threads = 1;
};

// For every user with a test positive: candidates are num_negatives items
// drawn without replacement from items outside the user's positives of every
// split, plus the test positives. Macro-averaged over users. Fills the ks /
// precision / recall / topk_users fields.
MetricReport topk_eval(const Scorer& scorer, const InteractionData& data, const TopKOptions& opts,
                       std::span<const int> users = {});

// Full report on the test split.
MetricReport evaluate(const Scorer& scorer, const InteractionData& data, const TopKOptions& opts,
                      double threshold = 0.5);

// Users ordered by training-positive count (then id) and cut greedily so each
// of the num_bins groups holds about total/num_bins interactions. Returns the
// bin of every user.
std::vector<int> sparsity_bins(const InteractionData& data, int num_bins = 4);

struct BinReport {
  int bin = 0;
  std::size_t users = 0;
  std::size_t interactions = 0;  // training positives
  MetricReport metrics;
};

std::vector<BinReport> binned_eval(const Scorer& scorer, const InteractionData& data,
                                   const TopKOptions& opts, int num_bins = 4,
                                   double threshold = 0.5);

struct HierarchyGroup {
  int group = 0;
  std::size_t users = 0;
  double min_dist = 0.0;
  double max_dist = 0.0;
  double mean_dist = 0.0;
  double avg_degree = 0.0;  // social out-degree
};

// Users sorted by distance to the origin (ties by id) and cut into
// num_groups groups of near-equal size.
std::vector<HierarchyGroup> hierarchy_analysis(const ParamStore& params, const SocialGraph& graph,
                                               const ModelConfig& cfg, int num_groups = 4);

struct AttentionTable {
  int user = -1;
  std::vector<int> items;
  std::vector<int> neighbors;  // sorted
  Mat weights;                 // items x neighbors
};

// First-layer weights of the user's neighbors for each item. Throws
// UsageError when the user has no neighbors.
AttentionTable attention_export(const Scorer& scorer, int user, std::span<const int> items);

void write_metrics_csv(const std::string& path, const MetricReport& report);
void write_bins_csv(const std::string& path, const std::vector<BinReport>& bins);
void write_hierarchy_csv(const std::string& path, const std::vector<HierarchyGroup>& groups);
void write_attention_csv(const std::string& path, const AttentionTable& table);

// Human-readable summary.
std::string format_report(const MetricReport& report);

}  // namespace hsr
