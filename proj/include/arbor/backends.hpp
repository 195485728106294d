#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arbor/core.hpp"

namespace arbor {

struct SamplingParams {
  double temperature = 0.8;
  double top_p = 1.0;
};

// Step generator. Implementations must tolerate concurrent calls.
class Policy {
 public:
  virtual ~Policy() = default;

  // Exactly n candidate next steps for state, each carrying its token count.
  virtual std::vector<Step> generate(const ReasoningState& state, int n, const SamplingParams& params,
                                     RngStream& rng) = 0;

  // Per-token log-probabilities of rollout appended to state.
  // Throws LogprobsUnsupported if the backend cannot score text.
  virtual std::vector<double> score_continuation(const ReasoningState& state,
                                                 std::span<const Step> rollout) = 0;

  virtual std::string identity() const = 0;
};

class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual double score(const ReasoningState& state) = 0;
  virtual std::string identity() const = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Unit-norm vector of dimension().
  virtual std::vector<double> embed(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string identity() const = 0;
};

// Free-form completion, used by the prompting-based equivalence labeler.
class TextCompleter {
 public:
  virtual ~TextCompleter() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Calls policy.generate, validates the response and meters every step.
std::vector<Step> generate_steps(Policy& policy, const ReasoningState& state, int n,
                                 const SamplingParams& params, RngStream& rng, TokenMeter& meter);

struct RolloutResult {
  ReasoningState state;
  std::vector<Step> appended;
  bool depth_capped = false;
};

// Appends one sampled step at a time until the state is terminal or
// max_depth steps were appended.
RolloutResult rollout(Policy& policy, const ReasoningState& state, const SamplingParams& params,
                      RngStream& rng, int max_depth, std::string_view marker, TokenMeter& meter);

enum class ProbabilityMode { Raw, LengthNormalized };
std::string_view to_string(ProbabilityMode mode);
ProbabilityMode parse_probability_mode(std::string_view text);

// raw: exp(sum); length_normalized: exp(mean). Any -inf entry gives 0.
double sequence_probability(std::span<const double> token_logprobs, ProbabilityMode mode);
double sequence_probability(Policy& policy, const ReasoningState& state, std::span<const Step> rollout,
                            ProbabilityMode mode);

// Verifier output clamped to [0, 1]; NaN is a MalformedResponse.
double score_state(Verifier& verifier, const ReasoningState& state);

// Scales v to unit L2 norm in place; zero vectors are left untouched.
void normalize(std::vector<double>& v);

// Deterministic character-trigram hashing embedder for offline runs on free text.
class HashedNgramEmbedder final : public Embedder {
 public:
  explicit HashedNgramEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}
  std::vector<double> embed(std::string_view text) override;
  std::size_t dimension() const override { return dimension_; }
  std::string identity() const override { return "hashed-ngram-" + std::to_string(dimension_); }

 private:
  std::size_t dimension_;
};

}  // namespace arbor
