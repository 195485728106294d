#pragma once
// Full record of one search run, persisted as JSON (schema_version 1):
//
//   run        problem id, method, seed, config hash and the config itself
//   nodes      id, parent, depth, step, tokens, logprob, score, status, terminal
//   hyper_nodes  hyper_id, batch, constituents (descending score), scores, f, v_bar,
//              and absorbed_into when frontier-wide merging folded it into another
//   selections per-iteration log: selected hyper-node, expanded constituents,
//              budget, created children and hyper-nodes
//   rollouts   every policy rollout that is not a tree node (MCTS simulation,
//              sampling baselines) with its steps and token counts
//   mcts       visit statistics per hyper-node (MCTS only)
//   result     answer, chosen node, outcome, total tokens, discovered terminals
//
// Token accounting: result.tokens equals the sum of node tokens plus rollout
// step tokens.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arbor/core.hpp"

namespace arbor {

struct TraceNode {
  NodeId id = 0;
  NodeId parent = kRootParent;
  std::size_t depth = 0;
  std::optional<std::string> step;
  std::int64_t tokens = 0;
  std::optional<double> logprob;
  double score = 0.0;
  NodeStatus status = NodeStatus::Unexplored;
  std::optional<std::string> answer;
};

struct TraceHyperNode {
  std::int64_t hyper_id = 0;
  std::int64_t batch = 0;
  std::vector<NodeId> constituents;
  std::vector<double> scores;
  std::string f;
  double v_bar = 0.0;
  std::optional<std::int64_t> absorbed_into;
};

struct TraceSelection {
  std::int64_t iteration = 0;
  std::int64_t hyper_id = 0;
  std::string action;  // expand | return | dead_end | simulate | terminal
  std::int64_t budget = 0;
  std::vector<NodeId> expanded_from;
  std::vector<NodeId> children;
  std::vector<std::int64_t> new_hyper_nodes;
};

struct TraceRolloutStep {
  std::string text;
  std::int64_t tokens = 0;
};

struct TraceRollout {
  NodeId from = 0;
  std::string purpose;  // simulation | sample
  std::vector<TraceRolloutStep> steps;
  bool terminal = false;
  std::optional<std::string> answer;
  double value = 0.0;
};

struct TraceMctsStats {
  std::int64_t hyper_id = 0;
  std::int64_t visits = 0;
  double total_value = 0.0;
  double mean_value = 0.0;
};

struct TraceTerminal {
  NodeId node = 0;
  double score = 0.0;
  std::string answer;
};

struct TraceResult {
  std::optional<std::string> answer;
  std::optional<NodeId> chosen_node;
  std::optional<std::int64_t> chosen_rollout;
  std::string outcome;  // complete | budget_exhausted | no_terminal | error
  std::optional<std::string> error;  // backend failure message for outcome "error"
  std::int64_t tokens = 0;
  std::int64_t expansions = 0;
  std::vector<TraceTerminal> terminals;
};

struct SearchTrace {
  static constexpr int kSchemaVersion = 1;

  std::string problem_id;
  std::string method;
  std::uint64_t seed = 0;
  nlohmann::ordered_json config;
  std::vector<TraceNode> nodes;
  std::vector<TraceHyperNode> hyper_nodes;
  std::vector<TraceSelection> selections;
  std::vector<TraceRollout> rollouts;
  std::vector<TraceMctsStats> mcts;
  TraceResult result;

  nlohmann::ordered_json to_json() const;
  static SearchTrace from_json(const nlohmann::ordered_json& j);  // MalformedResponse on schema violations
  static SearchTrace parse(std::string_view text);  // keeps the config key order
  std::string dump() const;                                // canonical text, newline-terminated

  // Independent re-sum of every generated step recorded in the trace.
  std::int64_t resum_tokens() const;
};

std::string config_hash(const nlohmann::ordered_json& config);

}  // namespace arbor
