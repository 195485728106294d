#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "arbor/rng.hpp"

namespace arbor {

enum class Linkage { Average, Complete, Single };
std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view text);

struct ClusterConfig {
  double distance_threshold = 0.15;  // cosine distance; merge while linkage < threshold
  Linkage linkage = Linkage::Average;
};

// Partition of input indices 0..n-1. Clusters are ordered by their smallest
// member and members are ascending, so labels are dense and canonical.
struct ClusterPartition {
  std::vector<std::size_t> labels;                 // input index -> cluster
  std::vector<std::vector<std::size_t>> clusters;  // cluster -> member indices

  std::size_t cluster_count() const { return clusters.size(); }
  static ClusterPartition from_groups(std::vector<std::vector<std::size_t>> groups, std::size_t n);
  friend bool operator==(const ClusterPartition&, const ClusterPartition&) = default;
};

// Bottom-up clustering on cosine distance. Repeatedly merges the closest pair
// while its linkage distance is below the threshold; equal distances go to the
// pair with the smaller (first min-index, second min-index).
ClusterPartition agglomerative_cluster(std::span<const std::vector<double>> embeddings,
                                       const ClusterConfig& config);

// Lloyd iterations on squared Euclidean distance with k-means++ seeding.
ClusterPartition kmeans_cluster(std::span<const std::vector<double>> embeddings, std::size_t k,
                                RngStream& rng, int max_iters = 100);

// N / C.
double similarity_degree(std::size_t n_nodes, const ClusterPartition& partition);

}  // namespace arbor
