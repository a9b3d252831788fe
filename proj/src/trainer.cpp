#include "hsr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <spdlog/fmt/fmt.h>

#include "hsr/errors.hpp"
#include "hsr/eval.hpp"
#include "hsr/log.hpp"
#include "hsr/model.hpp"
#include "hsr/objective.hpp"
#include "hsr/rsgd.hpp"
#include "hsr/tape.hpp"

namespace hsr {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
  return std::mt19937_64(seq);
}

std::uint64_t init_seed(std::uint64_t seed) {
  auto rng = stream(seed, 1);
  return rng();
}

}  // namespace

long steps_per_epoch(const InteractionData& data, const TrainConfig& cfg) {
  const auto n = static_cast<long>(data.num_train_positives());
  return std::max(1L, (n + cfg.batch_size - 1) / cfg.batch_size);
}

TrainResult train(const InteractionData& data, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const ModelConfig mcfg = cfg.model();
  TrainResult result;
  if (hooks.init != nullptr) {
    result.params = *hooks.init;
    if (result.params.dim() != mcfg.dim || result.params.num_layers() != mcfg.layers ||
        result.params.num_users() != data.num_users || result.params.num_items() != data.num_items) {
      throw CompatibilityError("train: initial parameters do not match the dataset/config");
    }
  } else {
    result.params = init_params(mcfg, data.num_users, data.num_items, init_seed(cfg.seed));
  }
  if (cfg.epochs == 0) return result;

  const PoincareBall ball(mcfg.geometry == Geometry::kHyperbolic ? mcfg.curvature : 1.0,
                          mcfg.ball_eps);
  const RecSampler rec_sampler(data);
  const SocialSampler social_sampler(data.social);
  const bool use_social = cfg.lambda > 0.0 && social_sampler.num_edges() > 0;
  if (cfg.lambda > 0.0 && !use_social) {
    spdlog::warn("train: no usable social edges, the social term is skipped");
  }

  auto sample_rng = stream(cfg.seed, 2);
  auto trunc_rng = stream(cfg.seed, 3);
  auto probe_rng = stream(cfg.seed, 4);
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  const auto probe_rec = rec_sampler.sample(b, probe_rng);
  const auto probe_social =
      use_social ? social_sampler.sample(b, probe_rng) : std::vector<SocialTriple>{};
  auto probe = [&](const ParamStore& p) {
    return batch_loss_value(p, data.social, mcfg, probe_rec, probe_social, cfg.lambda) /
           static_cast<double>(b);
  };
  auto validate = [&](const ParamStore& p, EpochLog& row) {
    const Scorer scorer(p, data.social, mcfg);
    const MetricReport rep = ctr_eval(scorer, data, Split::kValidation);
    row.val_auc = rep.auc;
    row.val_accuracy = rep.accuracy;
  };

  EpochLog row0;
  row0.train_loss = std::numeric_limits<double>::quiet_NaN();
  row0.probe_loss = probe(result.params);
  validate(result.params, row0);
  result.log.push_back(row0);
  result.best_val_auc = row0.val_auc;
  spdlog::info("epoch 0: probe loss {:.5f}, val AUC {:.4f}", row0.probe_loss, row0.val_auc);

  ParamStore params = result.params;
  OptState opt{cfg.learning_rate, 0};
  const long steps = steps_per_epoch(data, cfg);
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const SocialGraph graph = data.social.truncated(cfg.k_max, trunc_rng);
    double loss_sum = 0.0;
    try {
      for (long s = 0; s < steps; ++s) {
        const auto rec = rec_sampler.sample(b, sample_rng);
        const auto social =
            use_social ? social_sampler.sample(b, sample_rng) : std::vector<SocialTriple>{};
        ad::Tape tape;
        TapeModel model(tape, params, graph, mcfg);
        const BatchLoss loss = record_batch_loss(model, rec, social, use_social ? cfg.lambda : 0.0);
        const double value = loss.total.scalar();
        if (!std::isfinite(value)) {
          throw NumericError(fmt::format("non-finite loss at epoch {} step {}", epoch, s));
        }
        loss_sum += value;
        const ad::Adjoints adj = tape.backward(loss.total);
        rsgd_step(params, model.gradients(adj), opt, ball);
      }
    } catch (const NumericError& e) {
      spdlog::error("train: {}; keeping the last good checkpoint", e.what());
      result.aborted = true;
      result.abort_reason = e.what();
      return result;
    }

    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(steps * cfg.batch_size);
    row.probe_loss = probe(params);
    validate(params, row);
    result.log.push_back(row);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("epoch {}: train loss {:.5f}, probe loss {:.5f}, val AUC {:.4f}, ACC {:.4f} ({:.1f}s)",
                 epoch, row.train_loss, row.probe_loss, row.val_auc, row.val_accuracy, secs);
    if (hooks.on_epoch) hooks.on_epoch(row, params);

    // Without a usable validation AUC the latest state is kept.
    const bool improved = std::isnan(row.val_auc) || std::isnan(result.best_val_auc) ||
                          row.val_auc > result.best_val_auc;
    if (improved) {
      result.params = params;
      result.best_epoch = epoch;
      result.best_val_auc = row.val_auc;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      spdlog::info("early stop after epoch {} (best epoch {}, val AUC {:.4f})", epoch,
                   result.best_epoch, result.best_val_auc);
      break;
    }
  }
  return result;
}

void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot write " + path);
  os << "epoch,train_loss,probe_loss,val_auc,val_accuracy\n";
  for (const auto& r : log) {
    os << fmt::format("{},{:.10g},{:.10g},{:.10g},{:.10g}\n", r.epoch, r.train_loss, r.probe_loss,
                      r.val_auc, r.val_accuracy);
  }
}

}  // namespace hsr
