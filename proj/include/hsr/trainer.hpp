#pragma once

// Mini-batch training: each step draws a recommendation batch and a social
// batch, records the combined loss on a tape, and applies one RSGD update.
// Early stopping on validation AUC; the best parameters are returned.

#include <functional>
#include <string>
#include <vector>

#include "hsr/config.hpp"
#include "hsr/data.hpp"
#include "hsr/params.hpp"

namespace hsr {

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;   // mean per-triple total loss over the epoch's steps
  double probe_loss = 0.0;   // full objective on a fixed probe batch
  double val_auc = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  ParamStore params;  // best by validation AUC (the initialization when epochs == 0)
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_auc = 0.0;
  bool aborted = false;  // non-finite loss or gradient; params hold the last good state
  std::string abort_reason;
};

struct TrainHooks {
  // Called after every epoch with the current (not necessarily best) state.
  std::function<void(const EpochLog&, const ParamStore&)> on_epoch;
  // Overrides the initial parameters (shape must match).
  const ParamStore* init = nullptr;
};

// Steps per epoch: ceil(train positives / batch_size).
long steps_per_epoch(const InteractionData& data, const TrainConfig& cfg);

TrainResult train(const InteractionData& data, const TrainConfig& cfg, const TrainHooks& hooks = {});

void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace hsr
