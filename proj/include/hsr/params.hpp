#pragma once

#include <compare>
#include <map>
#include <string>
#include <vector>

#include "hsr/ball.hpp"

namespace hsr {

enum class Geometry { kHyperbolic, kEuclidean };

enum class ParamKind : int { kUser = 0, kItem = 1, kLayer = 2, kAttention = 3 };

// Update rule selector: manifold parameters take a Riemannian step and are
// re-projected; euclidean parameters take a plain gradient step.
enum class ParamTag { kManifold, kEuclidean };

struct ParamKey {
  ParamKind kind;
  int index;

  auto operator<=>(const ParamKey&) const = default;
};

std::string to_string(ParamKey key);

// Euclidean gradients keyed by parameter; matrices are flattened
// column-major. Ordered so that updates are applied deterministically.
using GradientMap = std::map<ParamKey, Vec>;

// All trainable state: user/item embeddings (one column per entity), the
// per-layer transform matrices (d x d) and attention matrices (2d x d).
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(int num_users, int num_items, int dim, int num_layers, Geometry geometry);

  int dim() const { return dim_; }
  int num_users() const { return static_cast<int>(users_.cols()); }
  int num_items() const { return static_cast<int>(items_.cols()); }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  Geometry geometry() const { return geometry_; }

  Mat& users() { return users_; }
  const Mat& users() const { return users_; }
  Mat& items() { return items_; }
  const Mat& items() const { return items_; }
  std::vector<Mat>& layers() { return layers_; }
  const std::vector<Mat>& layers() const { return layers_; }
  std::vector<Mat>& attention() { return attention_; }
  const std::vector<Mat>& attention() const { return attention_; }

  ParamTag tag(ParamKey key) const;
  // Flattened view of one parameter.
  Vec get(ParamKey key) const;
  void set(ParamKey key, const Vec& value);

  // Every key in deterministic order.
  std::vector<ParamKey> keys() const;

  bool operator==(const ParamStore& other) const;

 private:
  void check(ParamKey key) const;

  int dim_ = 0;
  Geometry geometry_ = Geometry::kHyperbolic;
  Mat users_;
  Mat items_;
  std::vector<Mat> layers_;
  std::vector<Mat> attention_;
};

}  // namespace hsr
