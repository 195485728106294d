#include "arbor/merging.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace arbor {

std::string_view to_string(Aggregation f) {
  switch (f) {
    case Aggregation::Max: return "max";
    case Aggregation::Avg: return "avg";
    case Aggregation::Min: return "min";
  }
  return "max";
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "max") return Aggregation::Max;
  if (text == "avg") return Aggregation::Avg;
  if (text == "min") return Aggregation::Min;
  throw Error(ErrorKind::InvalidArgument, "unknown aggregation '" + std::string(text) + "'");
}

double aggregate(std::span<const double> scores, Aggregation f) {
  if (scores.empty()) throw Error(ErrorKind::InvalidArgument, "aggregate of no scores");
  switch (f) {
    case Aggregation::Max: return *std::max_element(scores.begin(), scores.end());
    case Aggregation::Min: return *std::min_element(scores.begin(), scores.end());
    case Aggregation::Avg: {
      double s = 0.0;
      for (double x : scores) s += x;
      return s / static_cast<double>(scores.size());
    }
  }
  return 0.0;
}

HyperNode::HyperNode(std::int64_t hyper_id, std::vector<NodeId> ids, std::vector<double> scores, Aggregation f)
    : hyper_id_(hyper_id), f_(f) {
  if (ids.empty() || ids.size() != scores.size()) {
    throw Error(ErrorKind::InvalidArgument, "hyper-node needs matching non-empty ids and scores");
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  for (auto i : order) {
    constituents_.push_back(ids[i]);
    scores_.push_back(scores[i]);
  }
  aggregate_score_ = aggregate(scores_, f);
}

NodeId HyperNode::next_constituent() {
  const NodeId id = constituents_[cursor_];
  cursor_ = (cursor_ + 1) % constituents_.size();
  return id;
}

std::vector<HyperNode> merge_states(std::span<const Node> nodes, std::span<const std::vector<double>> embeddings,
                                    const ClusterConfig& config, Aggregation f, std::int64_t first_hyper_id) {
  if (nodes.empty() || nodes.size() != embeddings.size()) {
    throw Error(ErrorKind::InvalidArgument, "merge_states needs one embedding per node");
  }
  const auto partition = agglomerative_cluster(embeddings, config);
  std::vector<HyperNode> out;
  out.reserve(partition.cluster_count());
  // Clusters are ordered by smallest input index; order by smallest node id instead.
  std::vector<std::vector<std::size_t>> groups = partition.clusters;
  std::sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
    auto min_id = [&](const auto& g) {
      NodeId m = nodes[g.front()].id;
      for (auto i : g) m = std::min(m, nodes[i].id);
      return m;
    };
    return min_id(a) < min_id(b);
  });
  for (const auto& g : groups) {
    std::vector<NodeId> ids;
    std::vector<double> scores;
    for (auto i : g) {
      ids.push_back(nodes[i].id);
      scores.push_back(nodes[i].score);
    }
    out.emplace_back(first_hyper_id + static_cast<std::int64_t>(out.size()), std::move(ids), std::move(scores), f);
  }
  return out;
}

std::vector<HyperNode> singleton_hyper_nodes(std::span<const Node> nodes, Aggregation f,
                                             std::int64_t first_hyper_id) {
  std::vector<const Node*> sorted;
  for (const auto& n : nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(), [](const Node* a, const Node* b) { return a->id < b->id; });
  std::vector<HyperNode> out;
  for (const Node* n : sorted) {
    out.emplace_back(first_hyper_id + static_cast<std::int64_t>(out.size()), std::vector<NodeId>{n->id},
                     std::vector<double>{n->score}, f);
  }
  return out;
}

}  // namespace arbor
