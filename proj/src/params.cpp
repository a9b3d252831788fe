#include "hsr/params.hpp"

#include "hsr/errors.hpp"

namespace hsr {

std::string to_string(ParamKey key) {
  switch (key.kind) {
    case ParamKind::kUser:
      return "user[" + std::to_string(key.index) + "]";
    case ParamKind::kItem:
      return "item[" + std::to_string(key.index) + "]";
    case ParamKind::kLayer:
      return "layer_matrix[" + std::to_string(key.index) + "]";
    case ParamKind::kAttention:
      return "attention_matrix[" + std::to_string(key.index) + "]";
  }
  return "unknown";
}

ParamStore::ParamStore(int num_users, int num_items, int dim, int num_layers, Geometry geometry)
    : dim_(dim), geometry_(geometry) {
  if (dim < 1 || num_layers < 0 || num_users < 0 || num_items < 0) {
    throw UsageError("ParamStore: invalid shape");
  }
  users_ = Mat::Zero(dim, num_users);
  items_ = Mat::Zero(dim, num_items);
  layers_.assign(static_cast<std::size_t>(num_layers), Mat::Identity(dim, dim));
  attention_.assign(static_cast<std::size_t>(num_layers), Mat::Zero(2 * dim, dim));
}

void ParamStore::check(ParamKey key) const {
  int bound = 0;
  switch (key.kind) {
    case ParamKind::kUser:
      bound = num_users();
      break;
    case ParamKind::kItem:
      bound = num_items();
      break;
    case ParamKind::kLayer:
    case ParamKind::kAttention:
      bound = num_layers();
      break;
  }
  if (key.index < 0 || key.index >= bound) {
    throw UsageError("ParamStore: no parameter " + to_string(key));
  }
}

ParamTag ParamStore::tag(ParamKey key) const {
  check(key);
  if ((key.kind == ParamKind::kUser || key.kind == ParamKind::kItem) &&
      geometry_ == Geometry::kHyperbolic) {
    return ParamTag::kManifold;
  }
  return ParamTag::kEuclidean;
}

Vec ParamStore::get(ParamKey key) const {
  check(key);
  const auto i = static_cast<std::size_t>(key.index);
  switch (key.kind) {
    case ParamKind::kUser:
      return users_.col(key.index);
    case ParamKind::kItem:
      return items_.col(key.index);
    case ParamKind::kLayer:
      return Eigen::Map<const Vec>(layers_[i].data(), layers_[i].size());
    case ParamKind::kAttention:
      return Eigen::Map<const Vec>(attention_[i].data(), attention_[i].size());
  }
  return {};
}

void ParamStore::set(ParamKey key, const Vec& value) {
  check(key);
  const auto i = static_cast<std::size_t>(key.index);
  auto assign = [&](Mat& m) {
    if (value.size() != m.size()) {
      throw UsageError("ParamStore::set: size mismatch for " + to_string(key));
    }
    Eigen::Map<Vec>(m.data(), m.size()) = value;
  };
  switch (key.kind) {
    case ParamKind::kUser:
      if (value.size() != dim_) {
        throw UsageError("ParamStore::set: size mismatch for " + to_string(key));
      }
      users_.col(key.index) = value;
      break;
    case ParamKind::kItem:
      if (value.size() != dim_) {
        throw UsageError("ParamStore::set: size mismatch for " + to_string(key));
      }
      items_.col(key.index) = value;
      break;
    case ParamKind::kLayer:
      assign(layers_[i]);
      break;
    case ParamKind::kAttention:
      assign(attention_[i]);
      break;
  }
}

std::vector<ParamKey> ParamStore::keys() const {
  std::vector<ParamKey> out;
  out.reserve(static_cast<std::size_t>(num_users() + num_items() + 2 * num_layers()));
  for (int u = 0; u < num_users(); ++u) out.push_back({ParamKind::kUser, u});
  for (int i = 0; i < num_items(); ++i) out.push_back({ParamKind::kItem, i});
  for (int l = 0; l < num_layers(); ++l) out.push_back({ParamKind::kLayer, l});
  for (int l = 0; l < num_layers(); ++l) out.push_back({ParamKind::kAttention, l});
  return out;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (dim_ != other.dim_ || geometry_ != other.geometry_ || layers_.size() != other.layers_.size() ||
      users_.cols() != other.users_.cols() || items_.cols() != other.items_.cols()) {
    return false;
  }
  if (users_ != other.users_ || items_ != other.items_) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l] != other.layers_[l] || attention_[l] != other.attention_[l]) return false;
  }
  return true;
}

}  // namespace hsr
