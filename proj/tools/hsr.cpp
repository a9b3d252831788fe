#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>

#include "hsr/checks.hpp"
#include "hsr/config.hpp"
#include "hsr/data.hpp"
#include "hsr/errors.hpp"
#include "hsr/eval.hpp"
#include "hsr/log.hpp"
#include "hsr/model.hpp"
#include "hsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace hsr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitCompat = 3;
constexpr int kExitNumeric = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string outdir;
};

void add_common(CLI::App* app, Common& c, bool outdir_required) {
  app->add_option("--config", c.config, "key=value config file");
  app->add_option("--seed", c.seed, "Random seed");
  app->add_option("--threads", c.threads, "Worker threads (1 = fully deterministic)")
      ->check(CLI::PositiveNumber);
  auto* out = app->add_option("--outdir", c.outdir, "Output directory");
  if (outdir_required) out->required();
}

// One flag per config key, accepting both snake_case and kebab-case.
struct ConfigFlags {
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    values.reserve(TrainConfig::keys().size());
    for (const auto& key : TrainConfig::keys()) {
      if (key == "seed") continue;
      values.emplace_back(key, "");
      std::string kebab = key;
      std::replace(kebab.begin(), kebab.end(), '_', '-');
      std::string names = "--" + key;
      if (kebab != key) names += ",--" + kebab;
      app->add_option(names, values.back().second, "Config override")->group("Model/training");
    }
    app->add_option("--set", sets, "Config override key=value (repeatable)")->group("Model/training");
  }

  ConfigEntries entries() const {
    ConfigEntries out;
    for (const auto& [k, v] : values) {
      if (!v.empty()) out.emplace_back(k, v);
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    return out;
  }
};

// Defaults < config file < flags; every layer is kept for the run meta.
struct ResolvedConfig {
  TrainConfig cfg;
  ConfigEntries from_file;
  ConfigEntries from_flags;
};

ResolvedConfig resolve_config(const Common& common, const ConfigFlags& flags,
                              const std::string& fallback_file = "") {
  ResolvedConfig r;
  const std::string file = !common.config.empty() ? common.config : fallback_file;
  if (!file.empty()) r.from_file = apply_entries(r.cfg, read_config_file(file));
  ConfigEntries cli = flags.entries();
  if (common.seed) cli.emplace_back("seed", std::to_string(*common.seed));
  r.from_flags = apply_entries(r.cfg, cli);
  r.cfg.validate();
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << text;
}

std::string section(const std::string& title, const ConfigEntries& entries) {
  std::string out = "[" + title + "]\n";
  for (const auto& [k, v] : entries) out += k + "=" + v + "\n";
  return out;
}

void print_counts(const InteractionData& data) {
  std::size_t positives = 0;
  for (const auto& r : data.records) positives += r.label == 1 ? 1 : 0;
  const auto sizes = data.split_sizes();
  const double density = static_cast<double>(positives) /
                         (static_cast<double>(data.num_users) * data.num_items);
  fmt::print("{:<14}{:>12}\n", "users", data.num_users);
  fmt::print("{:<14}{:>12}\n", "items", data.num_items);
  fmt::print("{:<14}{:>12}\n", "interactions", positives);
  fmt::print("{:<14}{:>12}\n", "relations", data.social.num_edges());
  fmt::print("{:<14}{:>12.6f}\n", "density", density);
  fmt::print("{:<14}{:>12}\n", "records", data.records.size());
  fmt::print("{:<14}{:>12} / {} / {}\n", "train/val/test", sizes[0], sizes[1], sizes[2]);
  if (data.report.removed_users > 0) {
    fmt::print("{:<14}{:>12}\n", "removed users", data.report.removed_users);
  }
}

void write_histogram(const fs::path& path, const std::vector<std::pair<int, std::size_t>>& hist) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path.string());
  os << "degree,count\n";
  for (const auto& [d, n] : hist) os << d << ',' << n << '\n';
}

// ---- prepare --------------------------------------------------------------

struct PrepareArgs {
  Common common;
  std::string ratings;
  std::string trust;
  bool synthetic = false;
  SynthOptions synth;
  double threshold = 4.0;
  bool symmetrize = false;
  bool degrees = false;
};

int run_prepare(const PrepareArgs& a) {
  const std::uint64_t seed = a.common.seed.value_or(1);
  RawDataset raw;
  if (a.synthetic) {
    SynthOptions opts = a.synth;
    opts.seed = seed;
    raw = synth_raw(opts);
  } else {
    if (a.ratings.empty() || a.trust.empty()) {
      throw UsageError("prepare: --ratings and --trust are required (or use --synthetic)");
    }
    raw = ingest(a.ratings, a.trust);
    spdlog::info("ingested {} rating lines ({} duplicates merged), {} trust lines ({} dropped)",
                 raw.report.rating_lines, raw.report.duplicate_ratings, raw.report.trust_lines,
                 raw.report.dropped_trust_pairs);
  }
  InteractionData data = preprocess(raw, a.threshold, seed, a.symmetrize);
  split(data, {7.0, 1.0, 2.0}, seed);
  save_dataset(data, a.common.outdir);
  if (a.degrees) {
    const fs::path root(a.common.outdir);
    write_histogram(root / "degrees_users.csv", degree_histogram(data, DegreeKind::kUserInteractions));
    write_histogram(root / "degrees_items.csv", degree_histogram(data, DegreeKind::kItemInteractions));
    write_histogram(root / "degrees_social.csv", degree_histogram(data, DegreeKind::kSocial));
  }
  print_counts(data);
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  Common common;
  ConfigFlags flags;
  std::string data;
};

int run_train(const TrainArgs& a) {
  const ResolvedConfig rc = resolve_config(a.common, a.flags);
  const TrainConfig& cfg = rc.cfg;
  const InteractionData data = load_dataset(a.data);
  if (a.common.threads != 1) spdlog::info("train: tape construction is single-threaded");
  const fs::path out(a.common.outdir);
  fs::create_directories(out);

  spdlog::info("training on {} users, {} items, {} train positives ({} steps/epoch)", data.num_users,
               data.num_items, data.num_train_positives(), steps_per_epoch(data, cfg));
  const TrainResult result = train(data, cfg);

  save_checkpoint((out / "model.ckpt").string(), result.params, cfg.model());
  write_text(out / "config.txt", cfg.to_text());
  write_train_log_csv((out / "train_log.csv").string(), result.log);

  ConfigEntries defaults;
  const TrainConfig def;
  for (const auto& k : TrainConfig::keys()) defaults.emplace_back(k, def.get(k));
  ConfigEntries resolved;
  for (const auto& k : TrainConfig::keys()) resolved.emplace_back(k, cfg.get(k));
  ConfigEntries outcome = {
      {"dataset", a.data},
      {"config_file", a.common.config},
      {"epochs_run", std::to_string(result.log.empty() ? 0 : result.log.back().epoch)},
      {"best_epoch", std::to_string(result.best_epoch)},
      {"best_val_auc", fmt::format("{:.10g}", result.best_val_auc)},
      {"aborted", result.aborted ? "1" : "0"},
  };
  if (result.aborted) outcome.emplace_back("abort_reason", result.abort_reason);
  write_text(out / "run_meta.txt", section("run", outcome) + section("defaults", defaults) +
                                       section("file", rc.from_file) +
                                       section("flags", rc.from_flags) +
                                       section("resolved", resolved));

  fmt::print("best epoch {} (val AUC {:.4f}); checkpoint {}\n", result.best_epoch,
             result.best_val_auc, (out / "model.ckpt").string());
  if (result.aborted) {
    fmt::print(stderr, "training aborted: {} (last good checkpoint kept)\n", result.abort_reason);
    return kExitNumeric;
  }
  return kExitOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  Common common;
  ConfigFlags flags;
  std::string data;
  std::string run;
  std::string checkpoint;
  int repeats = 1;
  int negatives = 500;
  std::vector<int> ks = kDefaultKs;
  double acc_threshold = 0.5;
  int bins = 0;
  int hierarchy = 0;
  std::vector<std::string> attention_users;
  std::vector<std::string> attention_items;
  bool exact_agg = false;
};

int lookup_id(const std::vector<std::string>& tokens, const std::string& token, const char* what) {
  const auto it = std::find(tokens.begin(), tokens.end(), token);
  if (it != tokens.end()) return static_cast<int>(it - tokens.begin());
  throw UsageError(fmt::format("unknown {} '{}'", what, token));
}

void report_exact_agg(const Scorer& scorer, const ModelConfig& cfg) {
  const PoincareBall ball = cfg.ball();
  const ParamStore& p = scorer.params();
  double worst = 0.0;
  double total = 0.0;
  int n = 0;
  for (int u = 0; u < p.num_users() && n < 1000; ++u) {
    const auto& nb = scorer.graph().neighbors(u);
    if (nb.empty()) continue;
    std::vector<BallPoint> pts;
    for (int b : nb) pts.emplace_back(p.users().col(b));
    const std::vector<double> ones(pts.size(), 1.0);
    const BallPoint self(p.users().col(u));
    const Vec exact = aggregate_exact(ball, self, pts, cfg.gamma).coords();
    const Vec tangent = aggregate_tangent(ball, self, pts, ones, cfg.gamma).coords();
    const double gap = (exact - tangent).norm() / std::max(exact.norm(), 1e-300);
    worst = std::max(worst, gap);
    total += gap;
    ++n;
  }
  if (n == 0) {
    fmt::print("exact-agg: no user has neighbors\n");
    return;
  }
  fmt::print("exact-agg: tangent vs sequential Mobius aggregation over {} users: mean relative gap "
             "{:.4g}, max {:.4g}\n",
             n, total / n, worst);
}

int run_eval(const EvalArgs& a) {
  std::string ckpt = a.checkpoint;
  std::string fallback_config;
  if (!a.run.empty()) {
    if (ckpt.empty()) ckpt = (fs::path(a.run) / "model.ckpt").string();
    const fs::path saved = fs::path(a.run) / "config.txt";
    if (fs::exists(saved)) fallback_config = saved.string();
  } else if (!ckpt.empty()) {
    const fs::path saved = fs::path(ckpt).parent_path() / "config.txt";
    if (fs::exists(saved)) fallback_config = saved.string();
  }
  if (ckpt.empty()) throw UsageError("eval: --run or --checkpoint is required");
  const ResolvedConfig rc = resolve_config(a.common, a.flags, fallback_config);
  const TrainConfig& cfg = rc.cfg;

  const Checkpoint loaded = load_checkpoint(ckpt, cfg.geometry);
  const ModelConfig& header = loaded.config;
  if (header.dim != cfg.dim || header.layers != cfg.layers) {
    throw CompatibilityError(fmt::format("checkpoint has d={} L={}, config says d={} L={}",
                                         header.dim, header.layers, cfg.dim, cfg.layers));
  }
  ModelConfig mcfg = cfg.model();
  mcfg.curvature = header.curvature;
  mcfg.gamma = header.gamma;
  mcfg.tau = header.tau;
  mcfg.fd_radius = header.fd_radius;
  mcfg.fd_temperature = header.fd_temperature;

  const InteractionData data = load_dataset(a.data);
  if (loaded.params.num_users() != data.num_users || loaded.params.num_items() != data.num_items) {
    throw CompatibilityError(fmt::format(
        "checkpoint has {} users / {} items, dataset has {} / {}", loaded.params.num_users(),
        loaded.params.num_items(), data.num_users, data.num_items));
  }
  const Scorer scorer(loaded.params, data.social, mcfg);

  const fs::path out(a.common.outdir.empty() ? (a.run.empty() ? "." : a.run) : a.common.outdir);
  fs::create_directories(out);
  TopKOptions topk;
  topk.ks = a.ks;
  topk.num_negatives = a.negatives;
  topk.seed = cfg.seed;
  topk.repeats = a.repeats;
  topk.threads = a.common.threads;

  const MetricReport report = evaluate(scorer, data, topk, a.acc_threshold);
  write_metrics_csv((out / "metrics.csv").string(), report);
  fmt::print("{}", format_report(report));

  if (a.bins > 0) {
    const auto bins = binned_eval(scorer, data, topk, a.bins, a.acc_threshold);
    write_bins_csv((out / "bins.csv").string(), bins);
    for (const auto& b : bins) {
      fmt::print("bin {}: {} users, {} interactions, AUC {:.4f}\n", b.bin, b.users, b.interactions,
                 b.metrics.auc);
    }
  }
  if (a.hierarchy > 0) {
    const auto groups = hierarchy_analysis(loaded.params, data.social, mcfg, a.hierarchy);
    write_hierarchy_csv((out / "hierarchy.csv").string(), groups);
    for (const auto& g : groups) {
      fmt::print("group {}: {} users, dist [{:.4f}, {:.4f}], avg degree {:.3f}\n", g.group, g.users,
                 g.min_dist, g.max_dist, g.avg_degree);
    }
  }
  for (const auto& token : a.attention_users) {
    const int user = lookup_id(data.user_tokens, token, "user");
    std::vector<int> items;
    if (a.attention_items.empty()) {
      for (const auto& r : data.records) {
        if (r.user == user && r.split == Split::kTest && r.label == 1) items.push_back(r.item);
      }
      if (items.empty()) items = data.positives[static_cast<std::size_t>(user)];
    } else {
      for (const auto& t : a.attention_items) items.push_back(lookup_id(data.item_tokens, t, "item"));
    }
    const AttentionTable table = attention_export(scorer, user, items);
    const fs::path path = out / ("attention_" + token + ".csv");
    write_attention_csv(path.string(), table);
    fmt::print("attention of user {} over {} neighbors x {} items -> {}\n", token,
               table.neighbors.size(), table.items.size(), path.string());
  }
  if (a.exact_agg) report_exact_agg(scorer, mcfg);
  return kExitOk;
}

// ---- check ----------------------------------------------------------------

struct CheckArgs {
  Common common;
  std::string suite = "all";
  double tolerance = 0.0;
};

int run_check(const CheckArgs& a) {
  CheckOptions opts;
  opts.seed = a.common.seed.value_or(opts.seed);
  opts.tolerance = a.tolerance;
  std::vector<CheckResult> results;
  auto append = [&](std::vector<CheckResult> more) {
    for (auto& r : more) {
      fmt::print("{}\n", format_check(r));
      std::fflush(stdout);
      results.push_back(std::move(r));
    }
  };
  if (a.suite == "all" || a.suite == "ball") append(run_ball_suite(opts));
  if (a.suite == "all" || a.suite == "limit") append(run_limit_suite(opts));
  if (a.suite == "all" || a.suite == "grad") append(run_grad_suite(opts));
  const auto failed = std::count_if(results.begin(), results.end(), [](auto& r) { return !r.pass; });
  fmt::print("{} of {} properties passed\n", results.size() - static_cast<std::size_t>(failed),
             results.size());
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Hyperbolic social recommender: prepare data, train, evaluate, self-check"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Convert ratings/trust files into a dataset directory");
  add_common(prepare, prep.common, true);
  prepare->add_option("--ratings", prep.ratings, "Ratings file: user item rating")->check(CLI::ExistingFile);
  prepare->add_option("--trust", prep.trust, "Trust file: user user")->check(CLI::ExistingFile);
  prepare->add_flag("--synthetic", prep.synthetic, "Generate a synthetic hierarchical dataset");
  prepare->add_option("--users", prep.synth.num_users, "Synthetic users");
  prepare->add_option("--items", prep.synth.num_items, "Synthetic items");
  prepare->add_option("--exponent", prep.synth.exponent, "Synthetic social degree exponent");
  prepare->add_option("--activity", prep.synth.base_activity, "Synthetic base items per user");
  prepare->add_option("--item-locality", prep.synth.item_locality, "Synthetic item decay per tree step");
  prepare->add_option("--social-locality", prep.synth.social_locality,
                      "Synthetic trust decay per tree step");
  prepare->add_option("--threshold", prep.threshold, "Ratings >= threshold are positives");
  prepare->add_flag("--symmetrize", prep.symmetrize, "Add the reverse of every trust edge");
  prepare->add_flag("--degrees", prep.degrees, "Also write degree histograms");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a prepared dataset");
  add_common(train_cmd, tr.common, true);
  train_cmd->add_option("--data", tr.data, "Prepared dataset directory")->required();
  tr.flags.attach(train_cmd);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval_cmd, ev.common, false);
  eval_cmd->add_option("--data", ev.data, "Prepared dataset directory")->required();
  eval_cmd->add_option("--run", ev.run, "Training output directory (model.ckpt, config.txt)");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--repeats", ev.repeats, "Candidate-sampling repeats to average")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--negatives", ev.negatives, "Sampled negatives per user")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--k", ev.ks, "Cut-offs for Precision/Recall");
  eval_cmd->add_option("--acc-threshold", ev.acc_threshold, "Probability threshold for accuracy");
  eval_cmd->add_option("--bins", ev.bins, "Number of sparsity bins, e.g. 4 (writes bins.csv)");
  eval_cmd->add_option("--hierarchy", ev.hierarchy, "Number of distance groups, e.g. 4 (writes hierarchy.csv)");
  eval_cmd->add_option("--attention-user", ev.attention_users, "Export attention for a user id");
  eval_cmd->add_option("--attention-items", ev.attention_items, "Items for the attention export");
  eval_cmd->add_flag("--exact-agg", ev.exact_agg, "Compare tangent and sequential Mobius aggregation");
  ev.flags.attach(eval_cmd);

  CheckArgs ck;
  auto* check = app.add_subcommand("check", "Run the numerical self-verification suites");
  add_common(check, ck.common, false);
  check->add_option("--suite", ck.suite, "Suite to run")
      ->check(CLI::IsMember({"all", "ball", "grad", "limit"}));
  check->add_option("--tolerance", ck.tolerance, "Override every suite's tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*prepare) return run_prepare(prep);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*check) return run_check(ck);
  } catch (const InputError& e) {
    fmt::print(stderr, "input error: {}\n", e.what());
    return kExitInput;
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return kExitInput;
  } catch (const CompatibilityError& e) {
    fmt::print(stderr, "compatibility error: {}\n", e.what());
    return kExitCompat;
  } catch (const NumericError& e) {
    fmt::print(stderr, "numeric error: {}\n", e.what());
    return kExitNumeric;
  }
  return kExitOk;
}
