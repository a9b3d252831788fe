#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hsr/config.hpp"
#include "hsr/errors.hpp"
#include "hsr/trainer.hpp"

using namespace hsr;

TEST_SUITE("config") {

TEST_CASE("defaults") {
  const TrainConfig cfg;
  CHECK(cfg.batch_size == 1024);
  CHECK(cfg.curvature == 1.0);
  CHECK(cfg.gamma == 1.0);
  CHECK(cfg.fd_radius == 2.0);
  CHECK(cfg.fd_temperature == 1.0);
  CHECK(cfg.layers == 1);
  CHECK(cfg.dim == 32);
  CHECK(cfg.learning_rate == 1e-3);
  CHECK(cfg.lambda == 1e-2);
  CHECK(cfg.tau == 0.1);
  CHECK(cfg.k_max == 512);
  CHECK(cfg.epochs == 500);
  CHECK(cfg.patience == 10);
  CHECK(cfg.threshold == 4.0);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("every key round trips through text") {
  TrainConfig cfg;
  cfg.set("eta", "5e-4");
  cfg.set("d", "16");
  cfg.set("geometry", "euclidean");
  cfg.set("attention", "mean");
  cfg.set("lambda", "0");
  cfg.set("seed", "123456789012");
  CHECK(cfg.learning_rate == 5e-4);
  CHECK(cfg.dim == 16);
  CHECK(cfg.geometry == Geometry::kEuclidean);
  CHECK(cfg.attention == AttentionMode::kMean);
  CHECK(cfg.seed == 123456789012ULL);
  TrainConfig back;
  apply_entries(back, parse_config_text(cfg.to_text(), "text"));
  CHECK(back.to_text() == cfg.to_text());
  for (const auto& key : TrainConfig::keys()) CHECK_NOTHROW(back.set(key, cfg.get(key)));
  CHECK(back.get("learning_rate") == cfg.get("learning_rate"));
}

TEST_CASE("parse errors") {
  TrainConfig cfg;
  CHECK_THROWS_AS(cfg.set("nope", "1"), UsageError);
  CHECK_THROWS_AS(cfg.set("dim", "abc"), UsageError);
  CHECK_THROWS_AS(cfg.set("dim", "3.5"), UsageError);
  CHECK_THROWS_AS(cfg.set("geometry", "spherical"), UsageError);
  try {
    parse_config_text("dim = 8\n# comment\nthis line is broken\n", "my.cfg");
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("my.cfg") != std::string::npos);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  CHECK_THROWS_AS(read_config_file("/nonexistent/config.txt"), InputError);
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}

TEST_CASE("file layering") {
  const auto path = std::filesystem::temp_directory_path() / "hsr_unit_config.txt";
  {
    std::ofstream os(path);
    os << "# experiment\nd = 8\ntau=0.5   # trailing\nL = 2\n";
  }
  TrainConfig cfg;
  const auto applied = apply_entries(cfg, read_config_file(path.string()));
  CHECK(applied.size() == 3);
  CHECK(applied[0].first == "dim");
  CHECK(applied[2].first == "layers");
  CHECK(cfg.dim == 8);
  CHECK(cfg.tau == 0.5);
  CHECK(cfg.layers == 2);
  apply_entries(cfg, {{"d", "4"}});
  CHECK(cfg.dim == 4);
  const ModelConfig m = cfg.model();
  CHECK(m.dim == 4);
  CHECK(m.tau == 0.5);
  std::filesystem::remove(path);
}

}  // TEST_SUITE

TEST_SUITE("trainer") {

namespace {

InteractionData micro_dataset() {
  SynthOptions opts;
  opts.num_users = 80;
  opts.num_items = 120;
  opts.seed = 5;
  return synth_generate(opts);
}

TrainConfig micro_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.batch_size = 128;
  cfg.learning_rate = 5e-3;
  cfg.patience = 1000;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("epochs = 0 returns the initialization") {
  const auto data = micro_dataset();
  TrainConfig cfg = micro_config();
  cfg.epochs = 0;
  const TrainResult r = train(data, cfg);
  CHECK(r.log.empty());
  CHECK(r.best_epoch == 0);
  CHECK(train(data, cfg).params == r.params);
  TrainConfig other = cfg;
  other.seed = cfg.seed + 1;
  CHECK_FALSE(train(data, other).params == r.params);
  ParamStore init = init_params(cfg.model(), data.num_users, data.num_items, 1234);
  TrainHooks hooks;
  hooks.init = &init;
  CHECK(train(data, cfg, hooks).params == init);
  ParamStore wrong = init_params(cfg.model(), data.num_users + 1, data.num_items, 1234);
  hooks.init = &wrong;
  CHECK_THROWS_AS(train(data, cfg, hooks), CompatibilityError);
}

TEST_CASE("steps per epoch") {
  const auto data = micro_dataset();
  TrainConfig cfg = micro_config();
  const auto n = static_cast<long>(data.num_train_positives());
  CHECK(steps_per_epoch(data, cfg) == (n + cfg.batch_size - 1) / cfg.batch_size);
}

TEST_CASE("training reduces the loss and is reproducible") {
  const auto data = micro_dataset();
  TrainConfig cfg = micro_config();
  cfg.epochs = 50;
  const TrainResult a = train(data, cfg);
  REQUIRE(a.log.size() == 51);
  CHECK(a.log.back().train_loss < a.log[1].train_loss);
  CHECK(a.log.back().probe_loss < a.log.front().probe_loss);
  CHECK_FALSE(a.aborted);
  const TrainResult b = train(data, cfg);
  CHECK(a.params == b.params);
  CHECK(a.best_epoch == b.best_epoch);

  cfg.geometry = Geometry::kEuclidean;
  cfg.epochs = 5;
  const TrainResult e = train(data, cfg);
  CHECK(e.params.geometry() == Geometry::kEuclidean);
  CHECK(e.log.size() == 6);
}

TEST_CASE("early stopping honours patience") {
  const auto data = micro_dataset();
  TrainConfig cfg = micro_config();
  cfg.epochs = 200;
  cfg.patience = 2;
  cfg.learning_rate = 1e-300;
  const TrainResult r = train(data, cfg);
  CHECK(r.log.size() == 3);
  CHECK(r.best_epoch == 0);
  CHECK(r.params == train(data, [&] {
    TrainConfig zero = cfg;
    zero.epochs = 0;
    return zero;
  }()).params);
}

}  // TEST_SUITE
