#include "hsr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <spdlog/fmt/fmt.h>

#include "hsr/errors.hpp"
#include "hsr/log.hpp"

namespace hsr {

double auc(std::span<const Scored> scored) {
  std::size_t n_pos = 0;
  for (const auto& s : scored) {
    if (s.label != 0 && s.label != 1) throw UsageError("auc: labels must be 0 or 1");
    if (std::isnan(s.score)) throw NumericError("auc: NaN score");
    n_pos += static_cast<std::size_t>(s.label);
  }
  const std::size_t n_neg = scored.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UsageError("auc: undefined metric, both classes must be present");
  }
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });
  // Sum of 1-based average ranks of the positives (ranks are half-integers,
  // exact in double).
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scored[order[j + 1]].score == scored[order[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (scored[order[k]].label == 1) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double accuracy(std::span<const Scored> scored, double threshold) {
  if (scored.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : scored) {
    if (static_cast<int>(s.score >= threshold) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scored.size());
}

RankedList rank_candidates(int user, std::span<const int> items, std::span<const double> scores,
                           std::span<const char> positive) {
  if (items.size() != scores.size() || items.size() != positive.size()) {
    throw UsageError("rank_candidates: items, scores and markers differ in length");
  }
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return items[a] < items[b];
  });
  RankedList out;
  out.user = user;
  for (std::size_t k : order) {
    out.items.push_back(items[k]);
    out.scores.push_back(scores[k]);
    out.positive.push_back(positive[k]);
  }
  return out;
}

UserTopK topk_from_ranking(const RankedList& ranked, std::span<const int> ks) {
  const auto total = static_cast<std::size_t>(
      std::count_if(ranked.positive.begin(), ranked.positive.end(), [](char c) { return c != 0; }));
  UserTopK out;
  for (int k : ks) {
    if (k < 1) throw UsageError("topk: K must be >= 1");
    const auto limit = std::min(ranked.items.size(), static_cast<std::size_t>(k));
    std::size_t hits = 0;
    for (std::size_t r = 0; r < limit; ++r) hits += ranked.positive[r] != 0 ? 1 : 0;
    out.precision.push_back(static_cast<double>(hits) / static_cast<double>(k));
    out.recall.push_back(total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total));
  }
  return out;
}

namespace {

std::vector<char> user_mask(int num_users, std::span<const int> users) {
  std::vector<char> mask(static_cast<std::size_t>(num_users), users.empty() ? 1 : 0);
  for (int u : users) mask.at(static_cast<std::size_t>(u)) = 1;
  return mask;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::string num(double v) { return fmt::format("{:.10g}", v); }

std::ofstream open_csv(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path);
  return os;
}

}  // namespace

MetricReport ctr_eval(const Scorer& scorer, const InteractionData& data, Split split,
                      std::span<const int> users, double threshold) {
  const auto mask = user_mask(data.num_users, users);
  std::vector<Scored> scored;
  for (const auto& r : data.records) {
    if (r.split != split || mask[static_cast<std::size_t>(r.user)] == 0) continue;
    scored.push_back({scorer.score(r.user, r.item), r.label});
  }
  MetricReport out;
  out.ctr_records = scored.size();
  out.accuracy = accuracy(scored, threshold);
  const bool both = std::any_of(scored.begin(), scored.end(), [](auto& s) { return s.label == 1; }) &&
                    std::any_of(scored.begin(), scored.end(), [](auto& s) { return s.label == 0; });
  out.auc = both ? auc(scored) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

MetricReport topk_eval(const Scorer& scorer, const InteractionData& data, const TopKOptions& opts,
                       std::span<const int> users) {
  if (opts.ks.empty()) throw UsageError("topk_eval: empty K set");
  if (opts.num_negatives < 0) throw UsageError("topk_eval: negative sample count");
  if (opts.repeats < 1) throw UsageError("topk_eval: repeats must be >= 1");
  const auto mask = user_mask(data.num_users, users);
  const auto all_pos = data.all_positives();
  std::vector<std::vector<int>> test_pos(static_cast<std::size_t>(data.num_users));
  for (const auto& r : data.records) {
    if (r.split == Split::kTest && r.label == 1) {
      test_pos[static_cast<std::size_t>(r.user)].push_back(r.item);
    }
  }
  std::vector<int> eval_users;
  for (int u = 0; u < data.num_users; ++u) {
    auto& tp = test_pos[static_cast<std::size_t>(u)];
    std::sort(tp.begin(), tp.end());
    if (!tp.empty() && mask[static_cast<std::size_t>(u)] != 0) eval_users.push_back(u);
  }

  const std::size_t nk = opts.ks.size();
  MetricReport out;
  out.ks = opts.ks;
  out.precision.assign(nk, 0.0);
  out.recall.assign(nk, 0.0);
  out.topk_users = eval_users.size();
  if (eval_users.empty()) return out;

  std::atomic<std::size_t> short_users{0};
  std::vector<UserTopK> per_user(eval_users.size());
  for (int rep = 0; rep < opts.repeats; ++rep) {
    parallel_for(eval_users.size(), opts.threads, [&](std::size_t idx) {
      const int u = eval_users[idx];
      const auto& pos = all_pos[static_cast<std::size_t>(u)];
      std::vector<int> unrated;
      unrated.reserve(static_cast<std::size_t>(data.num_items));
      for (int i = 0; i < data.num_items; ++i) {
        if (!std::binary_search(pos.begin(), pos.end(), i)) unrated.push_back(i);
      }
      std::vector<int> cand;
      const auto want = static_cast<std::size_t>(opts.num_negatives);
      if (unrated.size() <= want) {
        if (unrated.size() < want) ++short_users;
        cand = unrated;
      } else {
        const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(rep);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(u)};
        std::mt19937_64 rng(seq);
        cand.reserve(want);
        std::sample(unrated.begin(), unrated.end(), std::back_inserter(cand), want, rng);
      }
      std::vector<char> positive(cand.size(), 0);
      for (int i : test_pos[static_cast<std::size_t>(u)]) {
        cand.push_back(i);
        positive.push_back(1);
      }
      const auto scores = scorer.score_items(u, cand);
      per_user[idx] = topk_from_ranking(rank_candidates(u, cand, scores, positive), opts.ks);
    });
    // Merge in user-id order.
    for (std::size_t k = 0; k < nk; ++k) {
      double p = 0.0;
      double r = 0.0;
      for (const auto& t : per_user) {
        p += t.precision[k];
        r += t.recall[k];
      }
      out.precision[k] += p / static_cast<double>(per_user.size());
      out.recall[k] += r / static_cast<double>(per_user.size());
    }
  }
  for (std::size_t k = 0; k < nk; ++k) {
    out.precision[k] /= static_cast<double>(opts.repeats);
    out.recall[k] /= static_cast<double>(opts.repeats);
  }
  if (short_users > 0) {
    spdlog::warn("topk_eval: {} user evaluations had fewer than {} unrated items; used all",
                 short_users.load(), opts.num_negatives);
  }
  return out;
}

MetricReport evaluate(const Scorer& scorer, const InteractionData& data, const TopKOptions& opts,
                      double threshold) {
  MetricReport out = ctr_eval(scorer, data, Split::kTest, {}, threshold);
  const MetricReport topk = topk_eval(scorer, data, opts);
  out.ks = topk.ks;
  out.precision = topk.precision;
  out.recall = topk.recall;
  out.topk_users = topk.topk_users;
  return out;
}

std::vector<int> sparsity_bins(const InteractionData& data, int num_bins) {
  if (num_bins < 1) throw UsageError("sparsity_bins: need at least one bin");
  std::vector<int> order(static_cast<std::size_t>(data.num_users));
  std::iota(order.begin(), order.end(), 0);
  auto count = [&](int u) { return data.positives[static_cast<std::size_t>(u)].size(); };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return count(a) < count(b); });
  double total = 0.0;
  for (int u : order) total += static_cast<double>(count(u));
  const double target = total / num_bins;

  std::vector<int> bins(order.size(), 0);
  int bin = 0;
  double mass = 0.0;
  std::size_t members = 0;
  for (int u : order) {
    const double c = static_cast<double>(count(u));
    if (members > 0 && bin + 1 < num_bins &&
        (mass >= target || std::abs(mass + c - target) > std::abs(mass - target))) {
      ++bin;
      mass = 0.0;
      members = 0;
    }
    bins[static_cast<std::size_t>(u)] = bin;
    mass += c;
    ++members;
  }
  return bins;
}

std::vector<BinReport> binned_eval(const Scorer& scorer, const InteractionData& data,
                                   const TopKOptions& opts, int num_bins, double threshold) {
  const auto bins = sparsity_bins(data, num_bins);
  std::vector<BinReport> out;
  for (int b = 0; b < num_bins; ++b) {
    std::vector<int> users;
    BinReport rep;
    rep.bin = b;
    for (int u = 0; u < data.num_users; ++u) {
      if (bins[static_cast<std::size_t>(u)] != b) continue;
      users.push_back(u);
      rep.interactions += data.positives[static_cast<std::size_t>(u)].size();
    }
    rep.users = users.size();
    if (!users.empty()) {
      rep.metrics = ctr_eval(scorer, data, Split::kTest, users, threshold);
      const MetricReport topk = topk_eval(scorer, data, opts, users);
      rep.metrics.ks = topk.ks;
      rep.metrics.precision = topk.precision;
      rep.metrics.recall = topk.recall;
      rep.metrics.topk_users = topk.topk_users;
    } else {
      rep.metrics.auc = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<HierarchyGroup> hierarchy_analysis(const ParamStore& params, const SocialGraph& graph,
                                               const ModelConfig& cfg, int num_groups) {
  if (num_groups < 1) throw UsageError("hierarchy_analysis: need at least one group");
  if (graph.num_users() != params.num_users()) {
    throw CompatibilityError("hierarchy_analysis: graph and parameters disagree on user count");
  }
  const int n = params.num_users();
  std::vector<double> dist(static_cast<std::size_t>(n));
  if (cfg.geometry == Geometry::kHyperbolic) {
    const PoincareBall ball = cfg.ball();
    const BallPoint origin = ball.origin(params.dim());
    for (int u = 0; u < n; ++u) {
      dist[static_cast<std::size_t>(u)] = ball.dist(origin, BallPoint(params.users().col(u)));
    }
  } else {
    for (int u = 0; u < n; ++u) dist[static_cast<std::size_t>(u)] = params.users().col(u).norm();
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
  });
  std::vector<HierarchyGroup> out;
  for (int g = 0; g < num_groups; ++g) {
    const auto lo = static_cast<std::size_t>(static_cast<long>(g) * n / num_groups);
    const auto hi = static_cast<std::size_t>(static_cast<long>(g + 1) * n / num_groups);
    HierarchyGroup grp;
    grp.group = g + 1;
    grp.users = hi - lo;
    if (hi > lo) {
      grp.min_dist = dist[static_cast<std::size_t>(order[lo])];
      grp.max_dist = dist[static_cast<std::size_t>(order[hi - 1])];
      double ds = 0.0;
      double deg = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        ds += dist[static_cast<std::size_t>(order[k])];
        deg += graph.out_degree(order[k]);
      }
      grp.mean_dist = ds / static_cast<double>(hi - lo);
      grp.avg_degree = deg / static_cast<double>(hi - lo);
    }
    out.push_back(grp);
  }
  return out;
}

AttentionTable attention_export(const Scorer& scorer, int user, std::span<const int> items) {
  const SocialGraph& graph = scorer.graph();
  if (user < 0 || user >= graph.num_users()) throw UsageError("attention_export: unknown user");
  const auto& nbs = graph.neighbors(user);
  if (nbs.empty()) {
    throw UsageError(fmt::format("attention_export: user {} has no neighbors, nothing to export",
                                 user));
  }
  AttentionTable out;
  out.user = user;
  out.items.assign(items.begin(), items.end());
  out.neighbors = nbs;
  out.weights.resize(static_cast<Eigen::Index>(items.size()), static_cast<Eigen::Index>(nbs.size()));
  for (std::size_t r = 0; r < items.size(); ++r) {
    const auto w = scorer.first_layer_weights(user, items[r]);
    for (std::size_t c = 0; c < w.size(); ++c) {
      out.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[c];
    }
  }
  return out;
}

void write_metrics_csv(const std::string& path, const MetricReport& report) {
  auto os = open_csv(path);
  os << "metric,value\n";
  os << "auc," << num(report.auc) << "\n";
  os << "accuracy," << num(report.accuracy) << "\n";
  os << "ctr_records," << report.ctr_records << "\n";
  for (std::size_t k = 0; k < report.ks.size(); ++k) {
    os << "precision@" << report.ks[k] << "," << num(report.precision[k]) << "\n";
  }
  for (std::size_t k = 0; k < report.ks.size(); ++k) {
    os << "recall@" << report.ks[k] << "," << num(report.recall[k]) << "\n";
  }
  os << "topk_users," << report.topk_users << "\n";
}

void write_bins_csv(const std::string& path, const std::vector<BinReport>& bins) {
  auto os = open_csv(path);
  os << "bin,users,interactions,auc,accuracy";
  const std::vector<int> ks = bins.empty() ? std::vector<int>{} : bins.front().metrics.ks;
  for (int k : ks) os << ",precision@" << k;
  for (int k : ks) os << ",recall@" << k;
  os << "\n";
  for (const auto& b : bins) {
    os << b.bin + 1 << "," << b.users << "," << b.interactions << "," << num(b.metrics.auc) << ","
       << num(b.metrics.accuracy);
    for (std::size_t k = 0; k < ks.size(); ++k) {
      os << "," << num(k < b.metrics.precision.size() ? b.metrics.precision[k] : 0.0);
    }
    for (std::size_t k = 0; k < ks.size(); ++k) {
      os << "," << num(k < b.metrics.recall.size() ? b.metrics.recall[k] : 0.0);
    }
    os << "\n";
  }
}

void write_hierarchy_csv(const std::string& path, const std::vector<HierarchyGroup>& groups) {
  auto os = open_csv(path);
  os << "group,users,min_dist,max_dist,mean_dist,avg_degree\n";
  for (const auto& g : groups) {
    os << g.group << "," << g.users << "," << num(g.min_dist) << "," << num(g.max_dist) << ","
       << num(g.mean_dist) << "," << num(g.avg_degree) << "\n";
  }
}

void write_attention_csv(const std::string& path, const AttentionTable& table) {
  auto os = open_csv(path);
  os << "item";
  for (int b : table.neighbors) os << ",user_" << b;
  os << "\n";
  for (std::size_t r = 0; r < table.items.size(); ++r) {
    os << table.items[r];
    for (Eigen::Index c = 0; c < table.weights.cols(); ++c) {
      os << "," << num(table.weights(static_cast<Eigen::Index>(r), c));
    }
    os << "\n";
  }
}

std::string format_report(const MetricReport& report) {
  std::string out = fmt::format("AUC {:.4f}  ACC {:.4f}  ({} test records)\n", report.auc,
                                report.accuracy, report.ctr_records);
  for (std::size_t k = 0; k < report.ks.size(); ++k) {
    out += fmt::format("P@{:<3} {:.4f}  R@{:<3} {:.4f}\n", report.ks[k], report.precision[k],
                       report.ks[k], report.recall[k]);
  }
  out += fmt::format("({} users ranked)\n", report.topk_users);
  return out;
}

}  // namespace hsr
