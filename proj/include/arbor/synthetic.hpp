#pragma once
// Scripted task backend whose ground truth is enumerable.
//
// A SyntheticTaskSpec holds one rooted DAG per problem. Each state lists its
// outgoing step templates; a template has a sampling probability, a set of
// surface-form aliases (paraphrases that mean the same step), a token cost, and
// either a successor state or a terminal answer. JSON layout:
//
//   {
//     "name": "...", "marker": "The answer is",
//     "problems": [{
//       "id": "p0", "question": "...", "answer": "7", "sigma": 0.1,
//       "root": "s0",
//       "states": {
//         "s0": [{"template": "add", "prob": 1.0, "aliases": ["3+4=7", "4+3=7"],
//                 "tokens": 5, "next": "s1"}],
//         "s1": [{"template": "ans", "prob": 1.0, "aliases": ["The answer is 7."],
//                 "tokens": 4, "answer": "7"}]
//       }
//     }]
//   }
//
// "sigma" (noisy-verifier std for that problem) and "template" are optional.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "arbor/backends.hpp"

namespace arbor {

struct SpecEdge {
  std::string template_name;
  double prob = 0.0;
  std::vector<std::string> aliases;
  std::int64_t tokens = 1;
  std::optional<std::size_t> next;     // successor state index
  std::optional<std::string> answer;   // set iff the step is terminal
};

struct SpecState {
  std::string name;
  std::vector<SpecEdge> edges;
  std::unordered_map<std::string, std::size_t> alias_to_edge;
};

struct SpecProblem {
  Problem problem;
  std::optional<double> sigma;
  std::size_t root = 0;
  std::vector<SpecState> states;
};

// Where a reasoning state sits in its problem's DAG.
struct SpecPosition {
  const SpecProblem* problem = nullptr;
  std::optional<std::size_t> state;   // unset once a terminal step was taken
  std::optional<std::string> answer;  // canonical answer of the terminal step
};

class SyntheticTaskSpec {
 public:
  static SyntheticTaskSpec from_json(const nlohmann::json& j);
  static SyntheticTaskSpec load(const std::string& path);
  nlohmann::json to_json() const;

  const std::string& name() const { return name_; }
  const std::string& marker() const { return marker_; }
  const std::vector<SpecProblem>& problems() const { return problems_; }
  std::vector<Problem> dataset() const;

  const SpecProblem& problem(const std::string& id) const;  // UnknownState
  // Walk state.steps() from the root; unknown step text -> UnknownState.
  SpecPosition locate(const ReasoningState& state) const;

  ReasoningState root_state(const std::string& problem_id) const;

  // Global template index of a step text, shared across problems by name.
  std::optional<std::size_t> template_of(std::string_view alias) const;
  std::size_t template_count() const { return template_names_.size(); }

 private:
  void index_and_validate();

  std::string name_;
  std::string marker_{kDefaultAnswerMarker};
  std::vector<SpecProblem> problems_;
  std::unordered_map<std::string, std::size_t> problem_index_;
  std::vector<std::string> template_names_;
  std::unordered_map<std::string, std::size_t> template_index_;
  std::unordered_map<std::string, std::size_t> alias_template_;
};

// Exact probability that a rollout from state (under the spec's own
// probabilities) ends at the correct answer. Alias-insensitive.
double true_state_value(const SyntheticTaskSpec& spec, const ReasoningState& state);

// Exact distribution over canonical terminal answers of a rollout from state.
std::map<std::string, double> terminal_answer_distribution(const SyntheticTaskSpec& spec,
                                                           const ReasoningState& state);

// Edge sampling distribution after temperature and nucleus truncation.
// temperature == 0 puts all mass on the first maximum.
std::vector<double> sampling_distribution(const std::vector<SpecEdge>& edges, const SamplingParams& params);

class SyntheticPolicy final : public Policy {
 public:
  explicit SyntheticPolicy(std::shared_ptr<const SyntheticTaskSpec> spec) : spec_(std::move(spec)) {}

  std::vector<Step> generate(const ReasoningState& state, int n, const SamplingParams& params,
                             RngStream& rng) override;
  // Template log-probability under the spec, spread evenly over the step's
  // tokens; steps not reachable from the state score -inf.
  std::vector<double> score_continuation(const ReasoningState& state,
                                         std::span<const Step> rollout) override;
  std::string identity() const override { return "synthetic-policy:" + spec_->name(); }

 private:
  std::shared_ptr<const SyntheticTaskSpec> spec_;
};

enum class SyntheticVerifierMode { Oracle, Noisy };

// Oracle value, optionally plus Gaussian noise truncated at +-3 sigma and
// clamped to [0, 1]. The noise is a pure function of (seed, problem, state
// text), so a verifier instance is a fixed scorer.
class SyntheticVerifier final : public Verifier {
 public:
  SyntheticVerifier(std::shared_ptr<const SyntheticTaskSpec> spec, SyntheticVerifierMode mode,
                    double sigma = 0.0, std::uint64_t seed = 0, bool per_problem_sigma = true);

  double score(const ReasoningState& state) override;
  std::string identity() const override;

  double sigma_for(const std::string& problem_id) const;

 private:
  std::shared_ptr<const SyntheticTaskSpec> spec_;
  SyntheticVerifierMode mode_;
  double sigma_;
  std::uint64_t seed_;
  bool per_problem_sigma_;
};

// One-hot embedding of the step's template: aliases of one template share a
// vector and distinct templates are orthogonal. Multi-line input embeds its
// last line.
class ExactAliasEmbedder final : public Embedder {
 public:
  explicit ExactAliasEmbedder(std::shared_ptr<const SyntheticTaskSpec> spec) : spec_(std::move(spec)) {}
  std::vector<double> embed(std::string_view text) override;
  std::size_t dimension() const override { return spec_->template_count(); }
  std::string identity() const override { return "exact-alias:" + spec_->name(); }

 private:
  std::shared_ptr<const SyntheticTaskSpec> spec_;
};

// Answers the equivalence prompt by comparing the templates of Step A and Step B.
class SyntheticJudge final : public TextCompleter {
 public:
  explicit SyntheticJudge(std::shared_ptr<const SyntheticTaskSpec> spec) : spec_(std::move(spec)) {}
  std::string complete(const std::string& prompt) override;

 private:
  std::shared_ptr<const SyntheticTaskSpec> spec_;
};

}  // namespace arbor
