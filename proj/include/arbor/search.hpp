#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "arbor/backends.hpp"
#include "arbor/clustering.hpp"
#include "arbor/merging.hpp"
#include "arbor/trace.hpp"

namespace arbor {

enum class Method { Bfs, Beam, Tree, Mcts, Greedy, SelfConsistency, BestOfN, WeightedVote };
std::string_view to_string(Method m);
Method parse_method(std::string_view text);

enum class EmbedText { NewestStep, FullState };

struct SearchConfig {
  Method method = Method::Bfs;
  int expansion_size = 10;          // N
  int beam_size = 5;                // B
  double expected_accuracy = 0.95;  // epsilon, tree search
  int mcts_root_budget = 8;
  int mcts_child_budget = 4;
  int mcts_simulation_rollouts = 2;
  int mcts_iterations = 20;
  double mcts_exploration = 1.0;
  // Simulation value from rollout correctness instead of the verifier; only
  // used when the problem has a reference answer.
  bool mcts_label_mode = false;
  int num_samples = 10;             // sampling baselines
  double temperature = 0.8;
  double top_p = 1.0;
  int max_depth = 12;
  int max_total_expansions = 50;
  bool merging = false;
  bool frontier_merging = false;    // also merge against same-depth frontier entries
  ClusterConfig cluster;
  Aggregation aggregation = Aggregation::Max;
  EmbedText embed_text = EmbedText::NewestStep;
  int ensemble_size = 2;            // recorded; the ensemble itself is a Verifier
  std::uint64_t seed = 0;
  std::string marker{kDefaultAnswerMarker};

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SearchConfig from_json(const nlohmann::json& j);
};

struct SearchBackends {
  Policy& policy;
  Verifier& verifier;
  Embedder* embedder = nullptr;  // required when merging is on
};

struct TerminalCandidate {
  ReasoningState state;
  double score = 0.0;
  std::string answer;
};

struct SearchResult {
  std::optional<ReasoningState> chosen;
  std::optional<std::string> answer;
  bool complete = false;
  std::string outcome;
  std::vector<TerminalCandidate> terminals;
  std::int64_t tokens = 0;
  std::int64_t expansions = 0;
  SearchTrace trace;
};

// Tree-search budget: min(N, ceil(log(1 - eps) / log(1 - v))), with v >= 1 - 1e-6
// giving 1 and v <= 1e-6 giving N.
int tree_search_budget(double value, double expected_accuracy, int max_budget);

SearchResult bfs_search(const Problem& problem, const SearchConfig& config, SearchBackends backends);
SearchResult tree_search(const Problem& problem, const SearchConfig& config, SearchBackends backends);
SearchResult beam_search(const Problem& problem, const SearchConfig& config, SearchBackends backends);
SearchResult mcts_search(const Problem& problem, const SearchConfig& config, SearchBackends backends);
SearchResult greedy_decode(const Problem& problem, const SearchConfig& config, SearchBackends backends);

struct Solution {
  ReasoningState state;
  std::optional<double> score;
  std::optional<std::string> answer;  // set for terminal solutions
};

// n independent full rollouts from the root; scored when score is true.
std::vector<Solution> sample_solutions(const Problem& problem, int n, const SearchConfig& config,
                                       SearchBackends backends, bool score, RngStream& rng, TokenMeter& meter);

enum class AnswerAggregation { Majority, BestOfN, Weighted };
// Throws NoSolutions when no solution reached an answer.
std::string aggregate_answers(std::span<const Solution> solutions, AnswerAggregation mode);

// Dispatches on config.method (sampling baselines included).
SearchResult run_search(const Problem& problem, const SearchConfig& config, SearchBackends backends);

}  // namespace arbor
