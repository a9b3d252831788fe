#include "hsr/social_graph.hpp"

#include <algorithm>
#include <string>

#include "hsr/errors.hpp"

namespace hsr {

SocialGraph::SocialGraph(int num_users) {
  if (num_users < 0) {
    throw UsageError("SocialGraph: negative user count");
  }
  adjacency_.resize(static_cast<std::size_t>(num_users));
}

SocialGraph SocialGraph::from_edges(int num_users, const std::vector<Edge>& edges) {
  SocialGraph g(num_users);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_users || b >= num_users) {
      throw UsageError("SocialGraph: edge (" + std::to_string(a) + ", " + std::to_string(b) +
                       ") references an unknown user");
    }
    if (a != b) {
      g.adjacency_[static_cast<std::size_t>(a)].push_back(b);
    }
  }
  for (auto& list : g.adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return g;
}

std::size_t SocialGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& list : adjacency_) n += list.size();
  return n;
}

const std::vector<int>& SocialGraph::neighbors(int user) const {
  if (user < 0 || user >= num_users()) {
    throw UsageError("SocialGraph: unknown user " + std::to_string(user));
  }
  return adjacency_[static_cast<std::size_t>(user)];
}

bool SocialGraph::has_edge(int from, int to) const {
  const auto& list = neighbors(from);
  return std::binary_search(list.begin(), list.end(), to);
}

std::vector<SocialGraph::Edge> SocialGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (int a = 0; a < num_users(); ++a) {
    for (int b : adjacency_[static_cast<std::size_t>(a)]) out.emplace_back(a, b);
  }
  return out;
}

SocialGraph SocialGraph::symmetrized() const {
  auto e = edges();
  const std::size_t n = e.size();
  e.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) e.emplace_back(e[i].second, e[i].first);
  return from_edges(num_users(), e);
}

SocialGraph SocialGraph::truncated(int k_max, std::mt19937_64& rng) const {
  if (k_max < 1) {
    throw UsageError("SocialGraph::truncated: k_max must be positive");
  }
  SocialGraph out = *this;
  for (auto& list : out.adjacency_) {
    if (static_cast<int>(list.size()) <= k_max) continue;
    std::vector<int> sample;
    sample.reserve(static_cast<std::size_t>(k_max));
    std::sample(list.begin(), list.end(), std::back_inserter(sample), k_max, rng);
    list = std::move(sample);
  }
  return out;
}

}  // namespace hsr
