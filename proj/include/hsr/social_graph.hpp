#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace hsr {

// Directed trust graph: neighbors(a) = { b : a trusts b }, each list sorted,
// without self-loops or duplicates.
class SocialGraph {
 public:
  using Edge = std::pair<int, int>;

  SocialGraph() = default;
  explicit SocialGraph(int num_users);

  // Drops self-loops and duplicate edges; throws UsageError on ids outside
  // [0, num_users).
  static SocialGraph from_edges(int num_users, const std::vector<Edge>& edges);

  int num_users() const { return static_cast<int>(adjacency_.size()); }
  std::size_t num_edges() const;
  const std::vector<int>& neighbors(int user) const;
  bool has_edge(int from, int to) const;
  int out_degree(int user) const { return static_cast<int>(neighbors(user).size()); }
  std::vector<Edge> edges() const;

  // Adds the reverse of every edge.
  SocialGraph symmetrized() const;
  // Users with more than k_max neighbors keep a uniform sample of k_max
  // (still sorted). Returns an identical copy when nobody exceeds k_max.
  SocialGraph truncated(int k_max, std::mt19937_64& rng) const;

  bool operator==(const SocialGraph&) const = default;

 private:
  std::vector<std::vector<int>> adjacency_;
};

}  // namespace hsr
