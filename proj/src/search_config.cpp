#include <string>

#include "arbor/search.hpp"

namespace arbor {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Bfs: return "bfs";
    case Method::Beam: return "beam";
    case Method::Tree: return "tree";
    case Method::Mcts: return "mcts";
    case Method::Greedy: return "greedy";
    case Method::SelfConsistency: return "self_consistency";
    case Method::BestOfN: return "best_of_n";
    case Method::WeightedVote: return "weighted_vote";
  }
  return "bfs";
}

Method parse_method(std::string_view text) {
  for (auto m : {Method::Bfs, Method::Beam, Method::Tree, Method::Mcts, Method::Greedy, Method::SelfConsistency,
                 Method::BestOfN, Method::WeightedVote}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(text) + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::InvalidArgument, "invalid search config: " + what);
}

}  // namespace

void SearchConfig::validate() const {
  require(expansion_size >= 1, "expansion_size >= 1");
  require(beam_size >= 1, "beam_size >= 1");
  require(expected_accuracy > 0.0 && expected_accuracy < 1.0, "expected_accuracy in (0,1)");
  require(mcts_root_budget >= 1 && mcts_child_budget >= 1, "mcts budgets >= 1");
  require(mcts_simulation_rollouts >= 1 && mcts_iterations >= 1, "mcts rollouts and iterations >= 1");
  require(mcts_exploration >= 0.0, "mcts_exploration >= 0");
  require(num_samples >= 1, "num_samples >= 1");
  require(method == Method::Greedy || temperature > 0.0, "temperature > 0 for sampling methods");
  require(top_p > 0.0 && top_p <= 1.0, "top_p in (0,1]");
  require(max_depth >= 1, "max_depth >= 1");
  require(max_total_expansions >= 1, "max_total_expansions >= 1");
  require(cluster.distance_threshold > 0.0 && cluster.distance_threshold <= 2.0, "distance_threshold in (0,2]");
  require(ensemble_size >= 1, "ensemble_size >= 1");
  require(!marker.empty(), "answer marker non-empty");
  require(!frontier_merging || merging, "frontier_merging requires merging");
  require(!frontier_merging || method == Method::Bfs || method == Method::Tree,
          "frontier_merging applies to bfs and tree only");
}

nlohmann::ordered_json SearchConfig::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = to_string(method);
  j["expansion_size"] = expansion_size;
  j["beam_size"] = beam_size;
  j["expected_accuracy"] = expected_accuracy;
  j["mcts_root_budget"] = mcts_root_budget;
  j["mcts_child_budget"] = mcts_child_budget;
  j["mcts_simulation_rollouts"] = mcts_simulation_rollouts;
  j["mcts_iterations"] = mcts_iterations;
  j["mcts_exploration"] = mcts_exploration;
  j["mcts_label_mode"] = mcts_label_mode;
  j["num_samples"] = num_samples;
  j["temperature"] = temperature;
  j["top_p"] = top_p;
  j["max_depth"] = max_depth;
  j["max_total_expansions"] = max_total_expansions;
  j["merging"] = merging;
  j["frontier_merging"] = frontier_merging;
  j["distance_threshold"] = cluster.distance_threshold;
  j["linkage"] = to_string(cluster.linkage);
  j["aggregation"] = to_string(aggregation);
  j["embed_text"] = embed_text == EmbedText::NewestStep ? "step" : "state";
  j["ensemble_size"] = ensemble_size;
  j["seed"] = seed;
  j["marker"] = marker;
  return j;
}

SearchConfig SearchConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "search config must be a JSON object");
  const auto known = SearchConfig{}.to_json();
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw Error(ErrorKind::InvalidArgument, "unknown search config key '" + key + "'");
  }
  const std::string embed = j.value("embed_text", std::string("step"));
  if (embed != "step" && embed != "state") {
    throw Error(ErrorKind::InvalidArgument, "embed_text must be step or state");
  }
  SearchConfig c;
  try {
    c.method = parse_method(j.value("method", std::string("bfs")));
    c.expansion_size = j.value("expansion_size", c.expansion_size);
    c.beam_size = j.value("beam_size", c.beam_size);
    c.expected_accuracy = j.value("expected_accuracy", c.expected_accuracy);
    c.mcts_root_budget = j.value("mcts_root_budget", c.mcts_root_budget);
    c.mcts_child_budget = j.value("mcts_child_budget", c.mcts_child_budget);
    c.mcts_simulation_rollouts = j.value("mcts_simulation_rollouts", c.mcts_simulation_rollouts);
    c.mcts_iterations = j.value("mcts_iterations", c.mcts_iterations);
    c.mcts_exploration = j.value("mcts_exploration", c.mcts_exploration);
    c.mcts_label_mode = j.value("mcts_label_mode", c.mcts_label_mode);
    c.num_samples = j.value("num_samples", c.num_samples);
    c.temperature = j.value("temperature", c.temperature);
    c.top_p = j.value("top_p", c.top_p);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.max_total_expansions = j.value("max_total_expansions", c.max_total_expansions);
    c.merging = j.value("merging", c.merging);
    c.frontier_merging = j.value("frontier_merging", c.frontier_merging);
    c.cluster.distance_threshold = j.value("distance_threshold", c.cluster.distance_threshold);
    c.cluster.linkage = parse_linkage(j.value("linkage", std::string("average")));
    c.aggregation = parse_aggregation(j.value("aggregation", std::string("max")));
    c.embed_text = embed == "state" ? EmbedText::FullState : EmbedText::NewestStep;
    c.ensemble_size = j.value("ensemble_size", c.ensemble_size);
    c.seed = j.value("seed", c.seed);
    c.marker = j.value("marker", c.marker);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad search config value: ") + e.what());
  }
  return c;
}

}  // namespace arbor
