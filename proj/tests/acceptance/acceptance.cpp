#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>

#include "hsr/checks.hpp"
#include "hsr/data.hpp"
#include "hsr/eval.hpp"
#include "hsr/log.hpp"
#include "hsr/model.hpp"
#include "hsr/objective.hpp"
#include "hsr/rsgd.hpp"
#include "hsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace hsr;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kFail;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

struct Context {
  std::string cli;
  fs::path workdir;
  std::string ciao_dir;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome from_checks(const std::vector<CheckResult>& results) {
  Outcome o{Status::kPass, ""};
  std::vector<std::string> parts;
  for (const auto& r : results) {
    if (!r.pass) o.status = Status::kFail;
    parts.push_back(fmt::format("{} {} (worst {:.3g})", r.property, r.pass ? "ok" : "FAILED", r.worst));
  }
  for (std::size_t k = 0; k < parts.size(); ++k) o.detail += (k ? "; " : "") + parts[k];
  return o;
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> len(lo, hi);
  Vec v(n);
  for (auto& x : v) x = n01(rng);
  return v * (len(rng) / v.norm());
}

Outcome rsgd_sanity() {
  SynthOptions so;
  so.num_users = 200;
  so.num_items = 300;
  so.seed = 3;
  const InteractionData data = synth_generate(so);
  TrainConfig tc;
  tc.seed = 5;
  const ModelConfig cfg = tc.model();
  ParamStore params = init_params(cfg, data.num_users, data.num_items, 11);
  std::mt19937_64 rng(13);
  const auto rec = RecSampler(data).sample(256, rng);
  const auto social = SocialSampler(data.social).sample(256, rng);
  const PoincareBall ball = cfg.ball();
  OptState opt{1e-4, 0};
  std::vector<double> losses = {batch_loss_value(params, data.social, cfg, rec, social, tc.lambda)};
  for (int step = 0; step < 20; ++step) {
    ad::Tape tape;
    TapeModel model(tape, params, data.social, cfg);
    const BatchLoss loss = record_batch_loss(model, rec, social, tc.lambda);
    rsgd_step(params, model.gradients(tape.backward(loss.total)), opt, ball);
    losses.push_back(batch_loss_value(params, data.social, cfg, rec, social, tc.lambda));
  }
  int increases = 0;
  for (std::size_t k = 1; k < losses.size(); ++k) increases += !(losses[k] < losses[k - 1]);

  ParamStore walk(40, 40, 8, 1, Geometry::kHyperbolic);
  walk.users().setZero();
  walk.items().setZero();
  OptState big{0.5, 0};
  std::mt19937_64 wr(17);
  std::uniform_real_distribution<double> scale(-3.0, 6.0);
  std::size_t outside = 0;
  const double limit = ball.max_norm() * (1.0 + 1e-12);
  for (int step = 0; step < 10000; ++step) {
    GradientMap g;
    for (int j = 0; j < 40; ++j) {
      g[{ParamKind::kUser, j}] = random_vec(wr, 8, 0.0, std::exp(scale(wr)));
      g[{ParamKind::kItem, j}] = random_vec(wr, 8, 0.0, std::exp(scale(wr)));
    }
    rsgd_step(walk, g, big, ball);
    for (int j = 0; j < 40; ++j) {
      outside += walk.users().col(j).norm() > limit;
      outside += walk.items().col(j).norm() > limit;
    }
  }
  Outcome o;
  o.status = increases == 0 && outside == 0 ? Status::kPass : Status::kFail;
  o.detail = fmt::format("loss {:.6f} -> {:.6f} over 20 steps, {} non-decreasing steps; {} out-of-ball "
                         "points over 10^4 random steps",
                         losses.front(), losses.back(), increases, outside);
  return o;
}

Outcome aggregation_consistency() {
  const PoincareBall ball(1.0);
  std::mt19937_64 rng(19);
  double worst = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 5;
    const Eigen::Index dim = trial % 2 ? 8 : 32;
    const BallPoint ua(random_vec(rng, dim, 1e-6, 1e-3));
    std::vector<BallPoint> nb;
    for (int k = 0; k < n; ++k) nb.emplace_back(random_vec(rng, dim, 1e-6, 1e-3));
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    const Vec t = aggregate_tangent(ball, ua, nb, ones, 1.0).coords();
    const Vec e = aggregate_exact(ball, ua, nb, 1.0).coords();
    worst = std::max(worst, (t - e).norm() / e.norm());
  }

  ModelConfig cfg;
  cfg.dim = 8;
  double tangent_gap = 0.0;
  double exact_gap = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int nu = 6;
    std::vector<BallPoint> prev;
    for (int j = 0; j < nu; ++j) prev.emplace_back(random_vec(rng, 8, 0.1, 0.8));
    const BallPoint item(random_vec(rng, 8, 0.1, 0.8));
    ParamStore p = init_params(cfg, nu, 1, rng());
    const auto graph = SocialGraph::from_edges(nu, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
    std::vector<int> perm = {1, 2, 3, 4, 5};
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<BallPoint> permuted = prev;
    for (int k = 0; k < 5; ++k) permuted[perm[k]] = prev[k + 1];
    const Vec a = aggregate_layer(prev, item, graph, p.layers()[0], p.attention()[0], cfg)[0].coords();
    const Vec b =
        aggregate_layer(permuted, item, graph, p.layers()[0], p.attention()[0], cfg)[0].coords();
    tangent_gap = std::max(tangent_gap, (a - b).norm());
    std::vector<BallPoint> nb(prev.begin() + 1, prev.end());
    std::vector<BallPoint> nb_p(permuted.begin() + 1, permuted.end());
    exact_gap = std::max(exact_gap, (aggregate_exact(ball, prev[0], nb, 1.0).coords() -
                                     aggregate_exact(ball, prev[0], nb_p, 1.0).coords())
                                        .norm());
  }
  Outcome o;
  o.status = worst < 1e-3 && tangent_gap < 1e-12 && exact_gap > 1e-6 ? Status::kPass : Status::kFail;
  o.detail = fmt::format(
      "near-origin relative error {:.3g} (< 1e-3); tangent permutation gap {:.3g}; "
      "Mobius permutation witness gap {:.3g}",
      worst, tangent_gap, exact_gap);
  return o;
}

double brute_auc(const std::vector<Scored>& xs) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& p : xs) {
    for (const auto& n : xs) {
      if (p.label == 1 && n.label == 0) {
        den += 1;
        num += p.score > n.score ? 1.0 : p.score == n.score ? 0.5 : 0.0;
      }
    }
  }
  return num / den;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> size(2, 30);
  std::uniform_int_distribution<int> level(0, 9);
  const std::vector<int> ks = {1, 5, 10, 15, 20, 35};
  int mismatches = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const int n = size(rng);
    std::vector<Scored> xs;
    std::vector<int> items(static_cast<std::size_t>(n));
    std::iota(items.begin(), items.end(), 100);
    std::shuffle(items.begin(), items.end(), rng);
    std::vector<double> scores;
    std::vector<char> pos;
    for (int j = 0; j < n; ++j) {
      const double s = level(rng) / 9.0;
      const int l = j == 0 ? 1 : j == 1 ? 0 : std::bernoulli_distribution(0.3)(rng);
      xs.push_back({s, l});
      scores.push_back(s);
      pos.push_back(static_cast<char>(l));
    }
    mismatches += auc(xs) != brute_auc(xs);
    int correct = 0;
    for (const auto& x : xs) correct += (x.score >= 0.5) == (x.label == 1);
    mismatches += accuracy(xs) != static_cast<double>(correct) / n;

    // Enumeration oracle: an item is in the top K iff fewer than K candidates
    // precede it under (score desc, id asc).
    const UserTopK got = topk_from_ranking(rank_candidates(0, items, scores, pos), ks);
    const int total = static_cast<int>(std::count(pos.begin(), pos.end(), 1));
    for (std::size_t k = 0; k < ks.size(); ++k) {
      int hits = 0;
      for (int a = 0; a < n; ++a) {
        int ahead = 0;
        for (int b = 0; b < n; ++b) {
          ahead += scores[b] > scores[a] || (scores[b] == scores[a] && items[b] < items[a]);
        }
        hits += ahead < ks[k] && pos[a];
      }
      mismatches += got.precision[k] != static_cast<double>(hits) / ks[k];
      mismatches += got.recall[k] != static_cast<double>(hits) / total;
    }
  }
  Outcome o;
  o.status = mismatches == 0 ? Status::kPass : Status::kFail;
  o.detail = fmt::format("200 instances, {} mismatches against brute force", mismatches);
  return o;
}

struct RunSummary {
  double test_auc = 0.0;
  double seconds = 0.0;
  int epochs = 0;
  int best_epoch = 0;
  TrainResult result;
};

RunSummary train_and_test(const InteractionData& data, const TrainConfig& cfg) {
  RunSummary s;
  const auto t0 = std::chrono::steady_clock::now();
  s.result = train(data, cfg);
  s.seconds = seconds_since(t0);
  s.epochs = static_cast<int>(s.result.log.size()) - 1;
  s.best_epoch = s.result.best_epoch;
  const Scorer scorer(s.result.params, data.social, cfg.model());
  s.test_auc = ctr_eval(scorer, data, Split::kTest).auc;
  return s;
}

Outcome synthetic_end_to_end() {
  SynthOptions so;
  so.num_users = 2000;
  so.num_items = 3000;
  so.exponent = 2.5;
  so.seed = 1;
  const InteractionData data = synth_generate(so);
  TrainConfig cfg;

  TrainConfig untrained_cfg = cfg;
  untrained_cfg.epochs = 0;
  const TrainResult init = train(data, untrained_cfg);
  const double base = ctr_eval(Scorer(init.params, data.social, cfg.model()), data, Split::kTest).auc;

  const RunSummary hsr = train_and_test(data, cfg);
  TrainConfig esr_cfg = cfg;
  esr_cfg.geometry = Geometry::kEuclidean;
  const RunSummary esr = train_and_test(data, esr_cfg);
  TrainConfig mean_cfg = cfg;
  mean_cfg.attention = AttentionMode::kMean;
  const RunSummary hsr_a = train_and_test(data, mean_cfg);
  TrainConfig solo_cfg = cfg;
  solo_cfg.lambda = 0.0;
  const RunSummary hsr_s = train_and_test(data, solo_cfg);

  const auto groups = hierarchy_analysis(hsr.result.params, data.social, cfg.model(), 4);

  const bool pass = hsr.test_auc >= 0.75 && hsr.test_auc - base >= 0.2 && hsr.seconds < 300.0;
  Outcome o;
  o.status = pass ? Status::kPass : Status::kFail;
  o.detail = fmt::format(
      "HSR test AUC {:.4f} (need >= 0.75), untrained {:.4f} (gain {:+.4f}, need >= 0.2), "
      "trained in {:.0f} s over {} epochs (best {}); reported: ESR {:.4f}, HSR-A {:.4f}, "
      "HSR-S {:.4f}; hierarchy group-1 / group-4 mean degree {:.2f} / {:.2f}",
      hsr.test_auc, base, hsr.test_auc - base, hsr.seconds, hsr.epochs, hsr.best_epoch,
      esr.test_auc, hsr_a.test_auc, hsr_s.test_auc, groups.front().avg_degree,
      groups.back().avg_degree);
  return o;
}

int run_cli(const Context& ctx, const std::string& args, const fs::path& log) {
  const std::string cmd = fmt::format("\"{}\" {} > \"{}\" 2>&1", ctx.cli, args, log.string());
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

Outcome determinism(const Context& ctx) {
  if (ctx.cli.empty()) return {Status::kSkip, "no --cli executable given"};
  const fs::path root = ctx.workdir / "determinism";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    const std::string data = (dir / "data").string();
    const std::string model = (dir / "model").string();
    const std::string eval = (dir / "eval").string();
    const bool ok =
        run_cli(ctx, fmt::format("prepare --synthetic --seed 7 --outdir \"{}\"", data), dir / "prepare.log") == 0 &&
        run_cli(ctx, fmt::format("train --data \"{}\" --seed 7 --threads 1 --epochs 15 --outdir \"{}\"", data, model),
                dir / "train.log") == 0 &&
        run_cli(ctx, fmt::format("eval --data \"{}\" --run \"{}\" --seed 7 --threads 1 --bins 4 --hierarchy 4 "
                                 "--outdir \"{}\"", data, model, eval),
                dir / "eval.log") == 0;
    if (!ok) return {Status::kFail, fmt::format("CLI pipeline failed in run {} (see {})", run, dir.string())};
  }
  const std::vector<std::string> files = {
      "data/records.csv", "data/social.csv", "data/meta",          "model/model.ckpt",
      "model/train_log.csv", "eval/metrics.csv", "eval/bins.csv", "eval/hierarchy.csv"};
  std::vector<std::string> differ;
  for (const auto& f : files) {
    const fs::path a = root / "a" / f;
    const fs::path b = root / "b" / f;
    if (!fs::exists(a) || slurp(a) != slurp(b)) differ.push_back(f);
  }
  Outcome o;
  o.status = differ.empty() ? Status::kPass : Status::kFail;
  o.detail = differ.empty() ? fmt::format("{} files byte-identical across two seeded runs", files.size())
                            : "differing: " + fmt::format("{}", fmt::join(differ, ", "));
  return o;
}

Outcome ciao(const Context& ctx) {
  if (ctx.ciao_dir.empty()) return {Status::kSkip, "set HSR_CIAO_DIR (ratings.txt, trust.txt) to run"};
  const fs::path dir(ctx.ciao_dir);
  RawDataset raw = ingest((dir / "ratings.txt").string(), (dir / "trust.txt").string());
  InteractionData data = preprocess(raw, 4.0, 1);
  split(data, {0.7, 0.1, 0.2}, 1);
  const RunSummary hsr = train_and_test(data, TrainConfig{});
  Outcome o;
  o.status = std::abs(hsr.test_auc - 0.7889) <= 0.03 ? Status::kPass : Status::kFail;
  o.detail = fmt::format("test AUC {:.4f} (target 0.7889 +- 0.03) after {} epochs", hsr.test_auc, hsr.epochs);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::vector<int> only;
  CLI::App app("Acceptance gate: one line per criterion");
  app.add_option("--cli", ctx.cli, "Path to the hsr executable (criterion 8)");
  std::string workdir = (fs::temp_directory_path() / "hsr_acceptance").string();
  app.add_option("--workdir", workdir, "Scratch directory");
  app.add_option("criteria", only, "Criterion numbers to run (default: all)");
  CLI11_PARSE(app, argc, argv);
  ctx.workdir = workdir;
  if (const char* c = std::getenv("HSR_CIAO_DIR")) ctx.ciao_dir = c;
  fs::create_directories(ctx.workdir);
  init_logging();
  if (!std::getenv("HSR_LOG")) spdlog::set_level(spdlog::level::err);

  const std::vector<Criterion> criteria = {
      {1, "manifold identity suite", 10, [] { return from_checks(run_ball_suite()); }},
      {2, "curvature-limit suite", 10, [] { return from_checks(run_limit_suite()); }},
      {3, "gradient suite", 60, [] { return from_checks(run_grad_suite()); }},
      {4, "RSGD sanity", 30, rsgd_sanity},
      {5, "aggregation consistency", 10, aggregation_consistency},
      {6, "synthetic end-to-end", 0, synthetic_end_to_end},
      {7, "metric oracles", 10, metric_oracles},
      {8, "determinism", 0, [&ctx] { return determinism(ctx); }},
      {9, "Ciao reference (optional)", 0, [&ctx] { return ciao(ctx); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (o.status == Status::kPass && c.budget_seconds > 0 && secs >= c.budget_seconds) {
      o.status = Status::kFail;
      o.detail += fmt::format("; over the {:.0f} s budget", c.budget_seconds);
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kSkip ? "SKIP" : "FAIL";
    failures += o.status == Status::kFail;
    std::cout << fmt::format("[{}] {}. {} ({:.1f} s): {}", tag, c.id, c.name, secs, o.detail)
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
