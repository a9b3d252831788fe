#pragma once

// Training configuration as flat key=value text. Every field has a key; the
// short symbols (eta, d, L, b, c, r, t) are accepted as aliases.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hsr/model.hpp"

namespace hsr {

struct TrainConfig {
  double learning_rate = 1e-3;
  int dim = 32;
  double lambda = 1e-2;
  double tau = 0.1;
  int layers = 1;
  int batch_size = 1024;
  double curvature = 1.0;
  double gamma = 1.0;
  double fd_radius = 2.0;
  double fd_temperature = 1.0;
  double leaky_slope = 0.01;
  double ball_eps = kBallEps;
  int k_max = 512;
  int epochs = 500;
  int patience = 10;
  std::uint64_t seed = 42;
  Geometry geometry = Geometry::kHyperbolic;
  AttentionMode attention = AttentionMode::kAttention;
  double threshold = 4.0;

  // Throws UsageError for an unknown key or unparsable value.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  ModelConfig model() const;
  // Every field as "key=value" lines in a fixed order.
  std::string to_text() const;

  static const std::vector<std::string>& keys();
};

const char* to_string(Geometry geometry);
const char* to_string(AttentionMode mode);
Geometry parse_geometry(const std::string& token);
AttentionMode parse_attention(const std::string& token);

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

// Parses "key = value" lines; '#' starts a comment. Throws InputError with
// the file and line on a malformed line.
ConfigEntries parse_config_text(const std::string& text, const std::string& source);
ConfigEntries read_config_file(const std::string& path);

// Applies entries in order; returns the applied pairs with canonical keys.
ConfigEntries apply_entries(TrainConfig& cfg, const ConfigEntries& entries);

}  // namespace hsr
