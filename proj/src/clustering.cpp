#include "arbor/clustering.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "arbor/error.hpp"
#include "arbor/kernels.hpp"

namespace arbor {

std::string_view to_string(Linkage linkage) {
  switch (linkage) {
    case Linkage::Average: return "average";
    case Linkage::Complete: return "complete";
    case Linkage::Single: return "single";
  }
  return "average";
}

Linkage parse_linkage(std::string_view text) {
  if (text == "average") return Linkage::Average;
  if (text == "complete") return Linkage::Complete;
  if (text == "single") return Linkage::Single;
  throw Error(ErrorKind::InvalidArgument, "unknown linkage '" + std::string(text) + "'");
}

ClusterPartition ClusterPartition::from_groups(std::vector<std::vector<std::size_t>> groups, std::size_t n) {
  groups.erase(std::remove_if(groups.begin(), groups.end(), [](const auto& g) { return g.empty(); }),
               groups.end());
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  ClusterPartition out;
  out.labels.assign(n, 0);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    for (auto i : groups[c]) out.labels[i] = c;
  }
  out.clusters = std::move(groups);
  return out;
}

namespace {

void check_embeddings(std::span<const std::vector<double>> e) {
  if (e.empty()) throw Error(ErrorKind::InvalidArgument, "clustering needs at least one embedding");
  for (const auto& v : e) {
    if (v.size() != e[0].size()) {
      throw Error(ErrorKind::DimensionMismatch, "embedding dimensions differ: " + std::to_string(v.size()) +
                                                    " vs " + std::to_string(e[0].size()));
    }
  }
}

}  // namespace

ClusterPartition agglomerative_cluster(std::span<const std::vector<double>> embeddings,
                                       const ClusterConfig& config) {
  check_embeddings(embeddings);
  if (!(config.distance_threshold > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "distance threshold must be > 0");
  }
  const std::size_t n = embeddings.size();
  // Cluster-level distances, updated with the Lance-Williams recurrence.
  std::vector<double> dist = kernels::cosine_distance_matrix(embeddings);
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> min_id(n);
  std::vector<bool> alive(n, true);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t i = 0; i < n; ++i) {
    min_id[i] = i;
    members[i] = {i};
  }

  for (std::size_t round = 0; round + 1 < n; ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = n, bb = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = 0; b < n; ++b) {
        if (!alive[b] || min_id[a] >= min_id[b]) continue;
        const double d = dist[a * n + b];
        const bool better = d < best || (d == best && (min_id[a] < min_id[ba] ||
                                                       (min_id[a] == min_id[ba] && min_id[b] < min_id[bb])));
        if (better) {
          best = d;
          ba = a;
          bb = b;
        }
      }
    }
    if (ba == n || !(best < config.distance_threshold)) break;

    // Merge bb into ba.
    for (std::size_t c = 0; c < n; ++c) {
      if (!alive[c] || c == ba || c == bb) continue;
      const double da = dist[ba * n + c];
      const double db = dist[bb * n + c];
      double merged = 0.0;
      switch (config.linkage) {
        case Linkage::Average:
          merged = (static_cast<double>(size[ba]) * da + static_cast<double>(size[bb]) * db) /
                   static_cast<double>(size[ba] + size[bb]);
          break;
        case Linkage::Complete: merged = std::max(da, db); break;
        case Linkage::Single: merged = std::min(da, db); break;
      }
      dist[ba * n + c] = merged;
      dist[c * n + ba] = merged;
    }
    size[ba] += size[bb];
    min_id[ba] = std::min(min_id[ba], min_id[bb]);
    members[ba].insert(members[ba].end(), members[bb].begin(), members[bb].end());
    members[bb].clear();
    alive[bb] = false;
  }

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i]) groups.push_back(std::move(members[i]));
  }
  return ClusterPartition::from_groups(std::move(groups), n);
}

ClusterPartition kmeans_cluster(std::span<const std::vector<double>> embeddings, std::size_t k, RngStream& rng,
                                int max_iters) {
  check_embeddings(embeddings);
  const std::size_t n = embeddings.size();
  if (k < 1 || k > n) {
    throw Error(ErrorKind::InvalidK, "k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  const std::size_t dim = embeddings[0].size();

  // k-means++ seeding.
  std::vector<std::vector<double>> centroids;
  centroids.push_back(embeddings[rng.below(n)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], kernels::squared_l2(embeddings[i], centroids.back()));
      total += nearest[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += nearest[i];
        if (nearest[i] > 0.0 && u < cum) {
          pick = i;
          break;
        }
      }
      while (nearest[pick] == 0.0) --pick;
    } else {
      // All points coincide with a centroid; take the first point not yet used.
      pick = centroids.size() % n;
    }
    centroids.push_back(embeddings[pick]);
  }

  std::vector<std::size_t> assign(n, k);
  for (int iter = 0; iter < std::max(max_iters, 1); ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = kernels::squared_l2(embeddings[i], centroids[c]);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    // Refill empty clusters with the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (std::find(assign.begin(), assign.end(), c) != assign.end()) continue;
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto owner = assign[i];
        if (std::count(assign.begin(), assign.end(), owner) < 2) continue;
        const double d = kernels::squared_l2(embeddings[i], centroids[owner]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      assign[far] = c;
      changed = true;
    }
    if (!changed && iter > 0) break;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> acc(dim, 0.0);
      double count = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] != c) continue;
        kernels::add_inplace(acc, embeddings[i]);
        count += 1.0;
      }
      kernels::scale_inplace(acc, 1.0 / count);
      centroids[c] = std::move(acc);
    }
  }

  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t i = 0; i < n; ++i) groups[assign[i]].push_back(i);
  return ClusterPartition::from_groups(std::move(groups), n);
}

double similarity_degree(std::size_t n_nodes, const ClusterPartition& partition) {
  if (partition.cluster_count() == 0) throw Error(ErrorKind::InvalidArgument, "empty partition");
  if (n_nodes != partition.labels.size()) {
    throw Error(ErrorKind::InvalidArgument, "node count does not match partition");
  }
  return static_cast<double>(n_nodes) / static_cast<double>(partition.cluster_count());
}

}  // namespace arbor
