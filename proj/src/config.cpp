#include "hsr/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {
      {"eta", "learning_rate"}, {"lr", "learning_rate"}, {"d", "dim"},
      {"L", "layers"},          {"b", "batch_size"},     {"c", "curvature"},
      {"r", "fd_radius"},       {"t", "fd_temperature"}, {"epsilon", "ball_eps"},
  };
  return table;
}

std::string canonical(const std::string& key) {
  const auto it = aliases().find(key);
  return it == aliases().end() ? key : it->second;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw UsageError(fmt::format("config: bad value '{}' for {}", value, key));
  }
  return out;
}

std::string fmt_double(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

const char* to_string(Geometry geometry) {
  return geometry == Geometry::kHyperbolic ? "hyperbolic" : "euclidean";
}

const char* to_string(AttentionMode mode) {
  return mode == AttentionMode::kAttention ? "attention" : "mean";
}

Geometry parse_geometry(const std::string& token) {
  if (token == "hyperbolic") return Geometry::kHyperbolic;
  if (token == "euclidean") return Geometry::kEuclidean;
  throw UsageError("unknown geometry '" + token + "' (hyperbolic | euclidean)");
}

AttentionMode parse_attention(const std::string& token) {
  if (token == "attention") return AttentionMode::kAttention;
  if (token == "mean") return AttentionMode::kMean;
  throw UsageError("unknown attention mode '" + token + "' (attention | mean)");
}

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "learning_rate", "dim",         "lambda",   "tau",        "layers",
      "batch_size",    "curvature",   "gamma",    "fd_radius",  "fd_temperature",
      "leaky_slope",   "ball_eps",    "k_max",    "epochs",     "patience",
      "seed",          "geometry",    "attention", "threshold"};
  return k;
}

void TrainConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = canonical(raw_key);
  if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "dim") dim = parse_number<int>(key, value);
  else if (key == "lambda") lambda = parse_number<double>(key, value);
  else if (key == "tau") tau = parse_number<double>(key, value);
  else if (key == "layers") layers = parse_number<int>(key, value);
  else if (key == "batch_size") batch_size = parse_number<int>(key, value);
  else if (key == "curvature") curvature = parse_number<double>(key, value);
  else if (key == "gamma") gamma = parse_number<double>(key, value);
  else if (key == "fd_radius") fd_radius = parse_number<double>(key, value);
  else if (key == "fd_temperature") fd_temperature = parse_number<double>(key, value);
  else if (key == "leaky_slope") leaky_slope = parse_number<double>(key, value);
  else if (key == "ball_eps") ball_eps = parse_number<double>(key, value);
  else if (key == "k_max") k_max = parse_number<int>(key, value);
  else if (key == "epochs") epochs = parse_number<int>(key, value);
  else if (key == "patience") patience = parse_number<int>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "geometry") geometry = parse_geometry(value);
  else if (key == "attention") attention = parse_attention(value);
  else if (key == "threshold") threshold = parse_number<double>(key, value);
  else throw UsageError("config: unknown key '" + raw_key + "'");
}

std::string TrainConfig::get(const std::string& raw_key) const {
  const std::string key = canonical(raw_key);
  if (key == "learning_rate") return fmt_double(learning_rate);
  if (key == "dim") return std::to_string(dim);
  if (key == "lambda") return fmt_double(lambda);
  if (key == "tau") return fmt_double(tau);
  if (key == "layers") return std::to_string(layers);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "curvature") return fmt_double(curvature);
  if (key == "gamma") return fmt_double(gamma);
  if (key == "fd_radius") return fmt_double(fd_radius);
  if (key == "fd_temperature") return fmt_double(fd_temperature);
  if (key == "leaky_slope") return fmt_double(leaky_slope);
  if (key == "ball_eps") return fmt_double(ball_eps);
  if (key == "k_max") return std::to_string(k_max);
  if (key == "epochs") return std::to_string(epochs);
  if (key == "patience") return std::to_string(patience);
  if (key == "seed") return std::to_string(seed);
  if (key == "geometry") return to_string(geometry);
  if (key == "attention") return to_string(attention);
  if (key == "threshold") return fmt_double(threshold);
  throw UsageError("config: unknown key '" + raw_key + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw UsageError("config: learning_rate must be positive");
  if (!(lambda >= 0.0)) throw UsageError("config: lambda must be nonnegative");
  if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
  if (k_max < 1) throw UsageError("config: k_max must be >= 1");
  if (epochs < 0) throw UsageError("config: epochs must be >= 0");
  if (patience < 1) throw UsageError("config: patience must be >= 1");
  model().validate();
}

ModelConfig TrainConfig::model() const {
  ModelConfig m;
  m.dim = dim;
  m.layers = layers;
  m.curvature = curvature;
  m.gamma = gamma;
  m.tau = tau;
  m.fd_radius = fd_radius;
  m.fd_temperature = fd_temperature;
  m.geometry = geometry;
  m.attention = attention;
  m.leaky_slope = leaky_slope;
  m.ball_eps = ball_eps;
  return m;
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) out += k + "=" + get(k) + "\n";
  return out;
}

ConfigEntries parse_config_text(const std::string& text, const std::string& source) {
  ConfigEntries out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError(fmt::format("{}:{}: expected key=value", source, lineno));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InputError(fmt::format("{}:{}: expected key=value", source, lineno));
    }
    out.emplace_back(key, value);
  }
  return out;
}

ConfigEntries read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

ConfigEntries apply_entries(TrainConfig& cfg, const ConfigEntries& entries) {
  ConfigEntries applied;
  for (const auto& [k, v] : entries) {
    cfg.set(k, v);
    applied.emplace_back(canonical(k), cfg.get(k));
  }
  return applied;
}

}  // namespace hsr
