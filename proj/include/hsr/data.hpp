#pragma once

// Dataset ingestion and preparation: rating/trust file parsing, implicit
// feedback conversion with balanced labeled negatives, 7:1:2 splitting, a
// synthetic hierarchical power-law generator, and degree histograms.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hsr/social_graph.hpp"

namespace hsr {

struct RawRating {
  int user;
  int item;
  double rating;
};

struct IngestReport {
  std::size_t rating_lines = 0;
  std::size_t duplicate_ratings = 0;   // (user, item) repeats merged by max rating
  std::size_t trust_lines = 0;
  std::size_t dropped_trust_pairs = 0;  // an endpoint never rated anything
};

// Parsed files with dense ids in first-appearance order.
struct RawDataset {
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  std::vector<RawRating> ratings;
  std::vector<SocialGraph::Edge> trust;
  IngestReport report;
};

// Ratings lines: "user item rating [ignored...]"; trust lines: "user user
// [ignored...]". Whitespace or tab separated, '#' starts a comment. Throws
// InputError naming the file and line on malformed input, and when the trust
// file yields no usable pair.
RawDataset ingest(const std::string& ratings_path, const std::string& trust_path);
RawDataset ingest_streams(std::istream& ratings, std::istream& trust,
                          const std::string& ratings_name = "ratings",
                          const std::string& trust_name = "trust");

enum class Split : int { kTrain = 0, kValidation = 1, kTest = 2 };

const char* to_string(Split split);
Split parse_split(const std::string& token);

struct LabeledRecord {
  int user;
  int item;
  int label;  // 1 positive, 0 sampled negative
  Split split;

  bool operator==(const LabeledRecord&) const = default;
};

struct PreprocessReport {
  std::size_t removed_users = 0;       // no social link
  std::size_t capped_negative_users = 0;  // fewer unrated items than positives
};

struct InteractionData {
  int num_users = 0;
  int num_items = 0;
  double threshold = 4.0;
  std::uint64_t seed = 0;
  bool symmetrized = false;
  std::vector<LabeledRecord> records;
  // Training positives per user, sorted.
  std::vector<std::vector<int>> positives;
  SocialGraph social;
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;
  PreprocessReport report;

  // Recomputes `positives` from the train-split positive records.
  void rebuild_positives();
  // Positive items of each user over every split, sorted.
  std::vector<std::vector<int>> all_positives() const;
  std::array<std::size_t, 3> split_sizes() const;
  std::size_t num_train_positives() const;
};

// Implicit-feedback conversion: ratings >= threshold become positives; every
// user gets as many labeled negatives as positives, sampled from items the
// user never rated (capped at what is available); users without any trust
// link are removed and ids re-densified (items keep only those with a
// positive). All records start in the train split.
InteractionData preprocess(const RawDataset& raw, double threshold, std::uint64_t seed,
                           bool symmetrize = false);

// Uniform per-record assignment. Split sizes come from the largest-remainder
// rounding of ratios * |records|.
void split(InteractionData& data, std::array<double, 3> ratios, std::uint64_t seed);

// Largest-remainder apportionment of `total` by `ratios` (normalized).
std::array<std::size_t, 3> apportion(std::size_t total, std::array<double, 3> ratios);

struct SynthOptions {
  int num_users = 2000;
  int num_items = 3000;
  double exponent = 2.5;  // social out-degree power law
  std::uint64_t seed = 1;
  int tree_branching = 4;
  int tree_depth = 3;
  int base_activity = 8;         // items rated per user before the power-law extra
  double item_locality = 1.0;    // item weight decay per unit of tree distance
  double social_locality = 0.5;  // trust-target weight decay per unit of tree distance
};

// Users and items are placed on the leaves of a random tree. Social
// out-degrees follow a discrete power law with the given exponent; targets
// are drawn preferentially by fitness and by tree proximity. Each user rates
// items with probability growing with item popularity and decaying in tree
// distance, so socially close users share items.
RawDataset synth_raw(const SynthOptions& opts);
// synth_raw followed by preprocess (threshold 4) and a 7:1:2 split.
InteractionData synth_generate(const SynthOptions& opts);

enum class DegreeKind { kUserInteractions, kItemInteractions, kSocial };

// (degree, count) pairs over entities with degree >= 1, ascending by
// degree. Interactions count positive records of every split; social uses
// out-degree.
std::vector<std::pair<int, std::size_t>> degree_histogram(const InteractionData& data,
                                                          DegreeKind which);

// Processed-dataset directory: meta, records.csv, social.csv,
// idmap_users.csv, idmap_items.csv.
void save_dataset(const InteractionData& data, const std::string& dir);
InteractionData load_dataset(const std::string& dir);

}  // namespace hsr
