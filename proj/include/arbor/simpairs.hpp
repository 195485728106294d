#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arbor/backends.hpp"
#include "arbor/trace.hpp"

namespace arbor {

enum class PairSource { Prompting, Consistency };
std::string_view to_string(PairSource s);

struct SimilarityPair {
  std::string step_a;
  std::string step_b;
  std::optional<int> label;  // nullopt = discarded
  PairSource source = PairSource::Consistency;
  std::optional<double> delta;  // consistency only
};

struct ConsistencyConfig {
  double alpha = 0.02;
  double beta = 0.08;
  int rollouts = 1;  // K
  int rollout_steps = 1;  // length of each sampled continuation
  ProbabilityMode mode = ProbabilityMode::Raw;
  SamplingParams params{1.0, 1.0};
  std::string marker{kDefaultAnswerMarker};

  void validate() const;
};

// Mean |p(a_k | s_i) - p(a_k | s_j)| over the given continuations.
double consistency_delta(Policy& policy, const ReasoningState& s_i, const ReasoningState& s_j,
                         std::span<const std::vector<Step>> rollouts, ProbabilityMode mode);
// Samples K continuations from s_i, then scores them under both states.
// Throws InvalidArgument when s_i is terminal.
double consistency_delta(Policy& policy, const ReasoningState& s_i, const ReasoningState& s_j,
                         const ConsistencyConfig& config, RngStream& rng, TokenMeter& meter);

std::optional<int> label_pair(double delta, const ConsistencyConfig& config);

class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);
  static PromptTemplate load(const std::string& path);
  std::string render(std::string_view step_a, std::string_view step_b) const;

 private:
  std::string text_;
};

// Leading yes/no, case-insensitive; anything else is nullopt.
std::optional<int> parse_yes_no(std::string_view response);
std::optional<int> prompt_label(const std::string& step_a, const std::string& step_b, TextCompleter& llm,
                                const PromptTemplate& prompt);

double bce_objective(double cosine_similarity, int label);
double edit_distance_similarity(std::string_view a, std::string_view b);
double pearson_correlation(std::span<const double> xs, std::span<const double> ys);

// Sibling pairs from the expansion batches of a recorded trace. Each pair
// carries the two parent-side states so consistency labeling can run.
struct CandidatePair {
  ReasoningState a;
  ReasoningState b;
};
std::vector<CandidatePair> mine_sibling_pairs(const SearchTrace& trace, const std::string& question,
                                              std::size_t max_pairs_per_batch = 45);

// Discarded pairs are skipped. Consistency pairs also record K, mode and the
// thresholds when a config is given.
void write_pairs_jsonl(std::ostream& out, std::span<const SimilarityPair> pairs,
                       const ConsistencyConfig* consistency = nullptr);

}  // namespace arbor
