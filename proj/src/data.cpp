#include "hsr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hsr/errors.hpp"
#include "hsr/log.hpp"

namespace hsr {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::string body = line.substr(0, line.find('#'));
  std::istringstream is(body);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& where) {
  double value = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw InputError(where + ": malformed rating '" + tok + "'");
  }
  return value;
}

int parse_int(const std::string& tok, const std::string& where) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw InputError(where + ": expected an integer, got '" + tok + "'");
  }
  return value;
}

class TokenIds {
 public:
  int intern(const std::string& token, std::vector<std::string>& tokens) {
    auto [it, inserted] = ids_.try_emplace(token, static_cast<int>(tokens.size()));
    if (inserted) tokens.push_back(token);
    return it->second;
  }
  int find(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? -1 : it->second;
  }

 private:
  std::unordered_map<std::string, int> ids_;
};

// Draws `count` distinct items from [0, num_items) that are not in `excluded`
// (sorted). Returns them sorted.
std::vector<int> sample_excluding(int num_items, const std::vector<int>& excluded,
                                  std::size_t count, std::mt19937_64& rng) {
  const std::size_t available = static_cast<std::size_t>(num_items) - excluded.size();
  count = std::min(count, available);
  std::vector<int> out;
  if (count == 0) return out;
  if (2 * count <= available) {
    std::unordered_set<int> seen;
    std::uniform_int_distribution<int> pick(0, num_items - 1);
    while (out.size() < count) {
      const int j = pick(rng);
      if (std::binary_search(excluded.begin(), excluded.end(), j)) continue;
      if (seen.insert(j).second) out.push_back(j);
    }
  } else {
    std::vector<int> pool;
    pool.reserve(available);
    for (int j = 0; j < num_items; ++j) {
      if (!std::binary_search(excluded.begin(), excluded.end(), j)) pool.push_back(j);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

// ---- Ingest ---------------------------------------------------------------

RawDataset ingest_streams(std::istream& ratings, std::istream& trust,
                          const std::string& ratings_name, const std::string& trust_name) {
  RawDataset raw;
  TokenIds users;
  TokenIds items;
  std::map<std::pair<int, int>, std::size_t> seen;  // (user, item) -> index in ratings

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ratings, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    const std::string where = ratings_name + ":" + std::to_string(lineno);
    if (toks.size() < 3) {
      throw InputError(where + ": expected 'user item rating'");
    }
    const double value = parse_double(toks[2], where);
    const int u = users.intern(toks[0], raw.user_tokens);
    const int i = items.intern(toks[1], raw.item_tokens);
    ++raw.report.rating_lines;
    auto [it, inserted] = seen.try_emplace({u, i}, raw.ratings.size());
    if (inserted) {
      raw.ratings.push_back({u, i, value});
    } else {
      ++raw.report.duplicate_ratings;
      auto& kept = raw.ratings[it->second];
      kept.rating = std::max(kept.rating, value);
    }
  }
  if (raw.report.duplicate_ratings > 0) {
    spdlog::info("{}: merged {} duplicate (user, item) ratings by max", ratings_name,
                 raw.report.duplicate_ratings);
  }

  lineno = 0;
  while (std::getline(trust, line)) {
    ++lineno;
    const auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() < 2) {
      throw InputError(trust_name + ":" + std::to_string(lineno) + ": expected 'user user'");
    }
    ++raw.report.trust_lines;
    const int a = users.find(toks[0]);
    const int b = users.find(toks[1]);
    if (a < 0 || b < 0) {
      ++raw.report.dropped_trust_pairs;
      continue;
    }
    raw.trust.emplace_back(a, b);
  }
  if (raw.report.dropped_trust_pairs > 0) {
    spdlog::warn("{}: dropped {} trust pairs naming users without ratings", trust_name,
                 raw.report.dropped_trust_pairs);
  }
  if (raw.trust.empty()) {
    throw InputError(trust_name +
                     ": no usable trust pairs; every user would be filtered for lacking links");
  }
  return raw;
}

RawDataset ingest(const std::string& ratings_path, const std::string& trust_path) {
  std::ifstream ratings(ratings_path);
  if (!ratings) throw InputError("cannot open ratings file: " + ratings_path);
  std::ifstream trust(trust_path);
  if (!trust) throw InputError("cannot open trust file: " + trust_path);
  return ingest_streams(ratings, trust, ratings_path, trust_path);
}

// ---- Splits ---------------------------------------------------------------

const char* to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& token) {
  if (token == "train") return Split::kTrain;
  if (token == "val") return Split::kValidation;
  if (token == "test") return Split::kTest;
  throw InputError("unknown split tag '" + token + "'");
}

void InteractionData::rebuild_positives() {
  positives.assign(static_cast<std::size_t>(num_users), {});
  for (const auto& r : records) {
    if (r.label == 1 && r.split == Split::kTrain) {
      positives[static_cast<std::size_t>(r.user)].push_back(r.item);
    }
  }
  for (auto& p : positives) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
}

std::vector<std::vector<int>> InteractionData::all_positives() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(num_users));
  for (const auto& r : records) {
    if (r.label == 1) out[static_cast<std::size_t>(r.user)].push_back(r.item);
  }
  for (auto& p : out) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  return out;
}

std::array<std::size_t, 3> InteractionData::split_sizes() const {
  std::array<std::size_t, 3> out{0, 0, 0};
  for (const auto& r : records) ++out[static_cast<std::size_t>(r.split)];
  return out;
}

std::size_t InteractionData::num_train_positives() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

std::array<std::size_t, 3> apportion(std::size_t total, std::array<double, 3> ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw UsageError("split: ratios must be nonnegative");
    sum += r;
  }
  if (!(sum > 0.0)) throw UsageError("split: ratios must not all be zero");
  std::array<std::size_t, 3> out{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double quota = static_cast<double>(total) * ratios[k] / sum;
    out[k] = static_cast<std::size_t>(std::floor(quota));
    frac[k] = quota - static_cast<double>(out[k]);
    assigned += out[k];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % 3) {
    ++out[order[k]];
    ++assigned;
  }
  return out;
}

void split(InteractionData& data, std::array<double, 3> ratios, std::uint64_t seed) {
  const auto sizes = apportion(data.records.size(), ratios);
  std::vector<std::size_t> idx(data.records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eed5b1175ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t n = 0; n < sizes[k]; ++n, ++pos) {
      data.records[idx[pos]].split = static_cast<Split>(k);
    }
  }
  data.rebuild_positives();
}

// ---- Preprocess -----------------------------------------------------------

InteractionData preprocess(const RawDataset& raw, double threshold, std::uint64_t seed,
                           bool symmetrize) {
  const int raw_users = static_cast<int>(raw.user_tokens.size());
  const int raw_items = static_cast<int>(raw.item_tokens.size());
  SocialGraph trust = SocialGraph::from_edges(raw_users, raw.trust);
  if (symmetrize) trust = trust.symmetrized();

  std::vector<char> linked(static_cast<std::size_t>(raw_users), 0);
  for (const auto& [a, b] : trust.edges()) {
    linked[static_cast<std::size_t>(a)] = 1;
    linked[static_cast<std::size_t>(b)] = 1;
  }
  std::vector<int> user_map(static_cast<std::size_t>(raw_users), -1);
  InteractionData data;
  data.threshold = threshold;
  data.seed = seed;
  data.symmetrized = symmetrize;
  for (int u = 0; u < raw_users; ++u) {
    if (linked[static_cast<std::size_t>(u)]) {
      user_map[static_cast<std::size_t>(u)] = static_cast<int>(data.user_tokens.size());
      data.user_tokens.push_back(raw.user_tokens[static_cast<std::size_t>(u)]);
    } else {
      ++data.report.removed_users;
    }
  }
  data.num_users = static_cast<int>(data.user_tokens.size());
  if (data.num_users == 0) {
    throw InputError("preprocess: no user has a trust link");
  }
  if (data.report.removed_users > 0) {
    spdlog::info("preprocess: removed {} users without social links", data.report.removed_users);
  }

  // Items survive when some retained user rated them positively.
  std::vector<int> item_map(static_cast<std::size_t>(raw_items), -1);
  for (const auto& r : raw.ratings) {
    if (user_map[static_cast<std::size_t>(r.user)] >= 0 && r.rating >= threshold) {
      item_map[static_cast<std::size_t>(r.item)] = 0;
    }
  }
  for (int i = 0; i < raw_items; ++i) {
    if (item_map[static_cast<std::size_t>(i)] == 0) {
      item_map[static_cast<std::size_t>(i)] = static_cast<int>(data.item_tokens.size());
      data.item_tokens.push_back(raw.item_tokens[static_cast<std::size_t>(i)]);
    }
  }
  data.num_items = static_cast<int>(data.item_tokens.size());

  std::vector<std::vector<int>> pos(static_cast<std::size_t>(data.num_users));
  std::vector<std::vector<int>> rated(static_cast<std::size_t>(data.num_users));
  for (const auto& r : raw.ratings) {
    const int u = user_map[static_cast<std::size_t>(r.user)];
    const int i = item_map[static_cast<std::size_t>(r.item)];
    if (u < 0 || i < 0) continue;
    rated[static_cast<std::size_t>(u)].push_back(i);
    if (r.rating >= threshold) pos[static_cast<std::size_t>(u)].push_back(i);
  }

  std::mt19937_64 rng(seed);
  for (int u = 0; u < data.num_users; ++u) {
    auto& p = pos[static_cast<std::size_t>(u)];
    auto& seen = rated[static_cast<std::size_t>(u)];
    std::sort(p.begin(), p.end());
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    const auto negs = sample_excluding(data.num_items, seen, p.size(), rng);
    if (negs.size() < p.size()) ++data.report.capped_negative_users;
    for (int i : p) data.records.push_back({u, i, 1, Split::kTrain});
    for (int j : negs) data.records.push_back({u, j, 0, Split::kTrain});
  }
  if (data.report.capped_negative_users > 0) {
    spdlog::warn("preprocess: {} users have fewer unrated items than positives; negatives capped",
                 data.report.capped_negative_users);
  }

  std::vector<SocialGraph::Edge> edges;
  for (const auto& [a, b] : trust.edges()) {
    edges.emplace_back(user_map[static_cast<std::size_t>(a)], user_map[static_cast<std::size_t>(b)]);
  }
  data.social = SocialGraph::from_edges(data.num_users, edges);
  data.rebuild_positives();
  return data;
}

// ---- Synthetic generator --------------------------------------------------

namespace {

// Inverse-CDF sampler over a fixed discrete distribution.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const std::vector<double>& weights) : cdf_(weights.size()) {
    std::partial_sum(weights.begin(), weights.end(), cdf_.begin());
  }
  int operator()(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, cdf_.back());
    const double x = u(rng);
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), x);
    if (it == cdf_.end()) --it;
    return static_cast<int>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

// Tree distance between two leaves of a complete tree with the given
// branching factor and depth.
int tree_distance(int a, int b, int branching, int depth) {
  int shared = depth;
  while (a != b) {
    a /= branching;
    b /= branching;
    --shared;
  }
  return 2 * (depth - shared);
}

// P(k) proportional to k^-exponent on 1..k_max.
std::vector<double> power_law_weights(int k_max, double exponent) {
  std::vector<double> w(static_cast<std::size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) w[static_cast<std::size_t>(k - 1)] = std::pow(k, -exponent);
  return w;
}

}  // namespace

RawDataset synth_raw(const SynthOptions& opts) {
  if (!(opts.exponent > 1.0)) throw UsageError("synth: exponent must exceed 1");
  if (opts.num_users < 2 || opts.num_items < 2) throw UsageError("synth: need >= 2 users and items");
  std::mt19937_64 rng(opts.seed);
  const int nu = opts.num_users;
  const int ni = opts.num_items;
  int leaves = 1;
  for (int l = 0; l < opts.tree_depth; ++l) leaves *= opts.tree_branching;
  std::uniform_int_distribution<int> pick_leaf(0, leaves - 1);

  std::vector<int> user_leaf(static_cast<std::size_t>(nu));
  std::vector<int> item_leaf(static_cast<std::size_t>(ni));
  for (auto& l : user_leaf) l = pick_leaf(rng);
  for (auto& l : item_leaf) l = pick_leaf(rng);

  // Out-degrees from the discrete power law; fitness = degree.
  const int k_max = std::min(nu - 1, 1000);
  const DiscreteSampler degree_law(power_law_weights(k_max, opts.exponent));
  std::vector<int> out_degree(static_cast<std::size_t>(nu));
  for (auto& k : out_degree) k = degree_law(rng) + 1;

  // Per-leaf target distributions: fitness * exp(-social_locality * dist).
  std::vector<DiscreteSampler> user_targets;
  user_targets.reserve(static_cast<std::size_t>(leaves));
  for (int leaf = 0; leaf < leaves; ++leaf) {
    std::vector<double> w(static_cast<std::size_t>(nu));
    for (int b = 0; b < nu; ++b) {
      const int d = tree_distance(leaf, user_leaf[static_cast<std::size_t>(b)], opts.tree_branching,
                                  opts.tree_depth);
      w[static_cast<std::size_t>(b)] = out_degree[static_cast<std::size_t>(b)] * std::exp(-opts.social_locality * d);
    }
    user_targets.emplace_back(w);
  }

  RawDataset raw;
  for (int u = 0; u < nu; ++u) raw.user_tokens.push_back("u" + std::to_string(u));
  for (int i = 0; i < ni; ++i) raw.item_tokens.push_back("i" + std::to_string(i));

  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(nu));
  for (int a = 0; a < nu; ++a) {
    const auto& sampler = user_targets[static_cast<std::size_t>(user_leaf[static_cast<std::size_t>(a)])];
    const int want = out_degree[static_cast<std::size_t>(a)];
    std::unordered_set<int> chosen;
    std::uniform_int_distribution<int> any_user(0, nu - 1);
    for (int attempt = 0; static_cast<int>(chosen.size()) < want; ++attempt) {
      // Fall back to uniform targets if fitness sampling keeps colliding.
      const int b = attempt < 20 * want ? sampler(rng) : any_user(rng);
      if (b != a) chosen.insert(b);
    }
    auto& list = nbrs[static_cast<std::size_t>(a)];
    list.assign(chosen.begin(), chosen.end());
    std::sort(list.begin(), list.end());
    for (int b : list) raw.trust.emplace_back(a, b);
  }

  // Item popularity: Pareto weights with tail index 1.2.
  std::vector<double> popularity(static_cast<std::size_t>(ni));
  {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (auto& p : popularity) p = std::pow(1.0 - u01(rng), -1.0 / 1.2);
  }
  std::vector<DiscreteSampler> item_choice;
  item_choice.reserve(static_cast<std::size_t>(leaves));
  for (int leaf = 0; leaf < leaves; ++leaf) {
    std::vector<double> w(static_cast<std::size_t>(ni));
    for (int i = 0; i < ni; ++i) {
      const int d = tree_distance(leaf, item_leaf[static_cast<std::size_t>(i)], opts.tree_branching,
                                  opts.tree_depth);
      w[static_cast<std::size_t>(i)] = popularity[static_cast<std::size_t>(i)] * std::exp(-opts.item_locality * d);
    }
    item_choice.emplace_back(w);
  }

  const DiscreteSampler activity_law(power_law_weights(200, 2.2));
  std::vector<std::vector<int>> liked(static_cast<std::size_t>(nu));
  for (int u = 0; u < nu; ++u) {
    const auto& sampler = item_choice[static_cast<std::size_t>(user_leaf[static_cast<std::size_t>(u)])];
    const int want = std::min(ni / 2, opts.base_activity + activity_law(rng));
    std::unordered_set<int> chosen;
    for (int attempt = 0; static_cast<int>(chosen.size()) < want && attempt < 50 * want; ++attempt) {
      chosen.insert(sampler(rng));
    }
    auto& list = liked[static_cast<std::size_t>(u)];
    list.assign(chosen.begin(), chosen.end());
    std::sort(list.begin(), list.end());
  }
  // Social influence: adopt a few items from trusted neighbors.
  std::bernoulli_distribution adopt(0.5);
  for (int u = 0; u < nu; ++u) {
    auto& mine = liked[static_cast<std::size_t>(u)];
    const auto& nb = nbrs[static_cast<std::size_t>(u)];
    for (std::size_t k = 0; k < nb.size() && k < 3; ++k) {
      const auto& theirs = liked[static_cast<std::size_t>(nb[k])];
      if (theirs.empty() || !adopt(rng)) continue;
      std::uniform_int_distribution<std::size_t> pick(0, theirs.size() - 1);
      const int item = theirs[pick(rng)];
      auto it = std::lower_bound(mine.begin(), mine.end(), item);
      if (it == mine.end() || *it != item) mine.insert(it, item);
    }
  }
  // Low ratings sprinkled in: rated but not positive.
  std::uniform_int_distribution<int> any_item(0, ni - 1);
  for (int u = 0; u < nu; ++u) {
    const auto& mine = liked[static_cast<std::size_t>(u)];
    for (int i : mine) raw.ratings.push_back({u, i, 5.0});
    const std::size_t low = mine.size() / 10;
    for (std::size_t n = 0; n < low; ++n) {
      const int i = any_item(rng);
      if (!std::binary_search(mine.begin(), mine.end(), i)) raw.ratings.push_back({u, i, 2.0});
    }
  }
  // Duplicate low ratings may occur; merge like ingest does.
  std::map<std::pair<int, int>, std::size_t> seen;
  std::vector<RawRating> merged;
  for (const auto& r : raw.ratings) {
    auto [it, inserted] = seen.try_emplace({r.user, r.item}, merged.size());
    if (inserted) {
      merged.push_back(r);
    } else {
      merged[it->second].rating = std::max(merged[it->second].rating, r.rating);
    }
  }
  raw.ratings = std::move(merged);
  raw.report.rating_lines = raw.ratings.size();
  raw.report.trust_lines = raw.trust.size();
  return raw;
}

InteractionData synth_generate(const SynthOptions& opts) {
  InteractionData data = preprocess(synth_raw(opts), 4.0, opts.seed);
  split(data, {7.0, 1.0, 2.0}, opts.seed);
  return data;
}

// ---- Histograms -----------------------------------------------------------

std::vector<std::pair<int, std::size_t>> degree_histogram(const InteractionData& data,
                                                          DegreeKind which) {
  std::vector<int> degree;
  switch (which) {
    case DegreeKind::kUserInteractions:
      degree.assign(static_cast<std::size_t>(data.num_users), 0);
      for (const auto& r : data.records) {
        if (r.label == 1) ++degree[static_cast<std::size_t>(r.user)];
      }
      break;
    case DegreeKind::kItemInteractions:
      degree.assign(static_cast<std::size_t>(data.num_items), 0);
      for (const auto& r : data.records) {
        if (r.label == 1) ++degree[static_cast<std::size_t>(r.item)];
      }
      break;
    case DegreeKind::kSocial:
      degree.assign(static_cast<std::size_t>(data.social.num_users()), 0);
      for (int u = 0; u < data.social.num_users(); ++u) {
        degree[static_cast<std::size_t>(u)] = data.social.out_degree(u);
      }
      break;
  }
  std::map<int, std::size_t> counts;
  for (int d : degree) {
    if (d > 0) ++counts[d];
  }
  return {counts.begin(), counts.end()};
}

// ---- Directory format -----------------------------------------------------

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw InputError("cannot write " + p.string());
  return os;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw InputError("cannot read " + p.string());
  return is;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void expect_header(std::istream& is, const std::string& header, const fs::path& p) {
  std::string line;
  if (!std::getline(is, line) || line != header) {
    throw InputError(p.string() + ": expected header '" + header + "'");
  }
}

void write_idmap(const fs::path& p, const std::vector<std::string>& tokens) {
  auto os = open_out(p);
  os << "id,token\n";
  for (std::size_t i = 0; i < tokens.size(); ++i) os << i << ',' << tokens[i] << '\n';
}

std::vector<std::string> read_idmap(const fs::path& p) {
  auto is = open_in(p);
  expect_header(is, "id,token", p);
  std::vector<std::string> tokens;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::string where = p.string() + ":" + std::to_string(lineno);
    if (comma == std::string::npos) throw InputError(where + ": malformed id map line");
    if (parse_int(line.substr(0, comma), where) != static_cast<int>(tokens.size())) {
      throw InputError(where + ": ids must be dense and ascending");
    }
    tokens.push_back(line.substr(comma + 1));
  }
  return tokens;
}

}  // namespace

void save_dataset(const InteractionData& data, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  const auto sizes = data.split_sizes();
  {
    auto os = open_out(root / "meta");
    os << std::setprecision(17);
    os << "format=1\n";
    os << "num_users=" << data.num_users << '\n';
    os << "num_items=" << data.num_items << '\n';
    os << "num_records=" << data.records.size() << '\n';
    os << "num_train=" << sizes[0] << '\n';
    os << "num_val=" << sizes[1] << '\n';
    os << "num_test=" << sizes[2] << '\n';
    os << "num_social=" << data.social.num_edges() << '\n';
    os << "threshold=" << data.threshold << '\n';
    os << "seed=" << data.seed << '\n';
    os << "symmetrized=" << (data.symmetrized ? 1 : 0) << '\n';
  }
  {
    auto os = open_out(root / "records.csv");
    os << "user,item,label,split\n";
    for (const auto& r : data.records) {
      os << r.user << ',' << r.item << ',' << r.label << ',' << to_string(r.split) << '\n';
    }
  }
  {
    auto os = open_out(root / "social.csv");
    os << "src,dst\n";
    for (const auto& [a, b] : data.social.edges()) os << a << ',' << b << '\n';
  }
  write_idmap(root / "idmap_users.csv", data.user_tokens);
  write_idmap(root / "idmap_items.csv", data.item_tokens);
}

InteractionData load_dataset(const std::string& dir) {
  const fs::path root(dir);
  InteractionData data;
  std::map<std::string, std::string> meta;
  {
    auto is = open_in(root / "meta");
    std::string line;
    while (std::getline(is, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw InputError((root / "meta").string() + ": missing key " + key);
    return it->second;
  };
  const std::string meta_name = (root / "meta").string();
  data.num_users = parse_int(need("num_users"), meta_name);
  data.num_items = parse_int(need("num_items"), meta_name);
  data.threshold = parse_double(need("threshold"), meta_name);
  data.seed = std::stoull(need("seed"));
  data.symmetrized = meta.count("symmetrized") != 0 && meta["symmetrized"] == "1";

  {
    const auto p = root / "records.csv";
    auto is = open_in(p);
    expect_header(is, "user,item,label,split", p);
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::string where = p.string() + ":" + std::to_string(lineno);
      const auto f = split_csv(line);
      if (f.size() != 4) throw InputError(where + ": expected 4 fields");
      LabeledRecord r{parse_int(f[0], where), parse_int(f[1], where), parse_int(f[2], where),
                      parse_split(f[3])};
      if (r.user < 0 || r.user >= data.num_users || r.item < 0 || r.item >= data.num_items ||
          (r.label != 0 && r.label != 1)) {
        throw InputError(where + ": record out of range");
      }
      data.records.push_back(r);
    }
  }
  {
    const auto p = root / "social.csv";
    auto is = open_in(p);
    expect_header(is, "src,dst", p);
    std::vector<SocialGraph::Edge> edges;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::string where = p.string() + ":" + std::to_string(lineno);
      const auto f = split_csv(line);
      if (f.size() != 2) throw InputError(where + ": expected 2 fields");
      edges.emplace_back(parse_int(f[0], where), parse_int(f[1], where));
    }
    try {
      data.social = SocialGraph::from_edges(data.num_users, edges);
    } catch (const UsageError& e) {
      throw InputError(p.string() + ": " + e.what());
    }
  }
  data.user_tokens = read_idmap(root / "idmap_users.csv");
  data.item_tokens = read_idmap(root / "idmap_items.csv");
  if (static_cast<int>(data.user_tokens.size()) != data.num_users ||
      static_cast<int>(data.item_tokens.size()) != data.num_items) {
    throw InputError(dir + ": id maps disagree with meta counts");
  }
  data.rebuild_positives();
  return data;
}

}  // namespace hsr
