#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "arbor/clustering.hpp"
#include "arbor/core.hpp"

namespace arbor {

enum class Aggregation { Max, Avg, Min };
std::string_view to_string(Aggregation f);
Aggregation parse_aggregation(std::string_view text);
double aggregate(std::span<const double> scores, Aggregation f);

// A group of sibling nodes judged equivalent. Constituents are ordered by
// descending score (ties: lower node id) and expansion cycles through them.
class HyperNode {
 public:
  HyperNode(std::int64_t hyper_id, std::vector<NodeId> ids, std::vector<double> scores, Aggregation f);

  std::int64_t hyper_id() const { return hyper_id_; }
  const std::vector<NodeId>& constituents() const { return constituents_; }
  const std::vector<double>& constituent_scores() const { return scores_; }
  double aggregate_score() const { return aggregate_score_; }
  Aggregation aggregation() const { return f_; }
  std::size_t cursor() const { return cursor_; }
  NodeId top() const { return constituents_.front(); }

  // constituents[cursor], then advance the cursor round-robin.
  NodeId next_constituent();

 private:
  std::int64_t hyper_id_;
  std::vector<NodeId> constituents_;
  std::vector<double> scores_;
  double aggregate_score_;
  Aggregation f_;
  std::size_t cursor_ = 0;
};

// One hyper-node per agglomerative cluster of the batch, ordered by smallest
// member node id and numbered from first_hyper_id.
std::vector<HyperNode> merge_states(std::span<const Node> nodes, std::span<const std::vector<double>> embeddings,
                                    const ClusterConfig& config, Aggregation f, std::int64_t first_hyper_id);

// Identity grouping: one singleton hyper-node per node (merging disabled).
std::vector<HyperNode> singleton_hyper_nodes(std::span<const Node> nodes, Aggregation f,
                                             std::int64_t first_hyper_id);

}  // namespace arbor
