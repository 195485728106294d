#pragma once

#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "arbor/backends.hpp"

namespace arbor {

// One sampled reasoning trajectory s_0..s_{T-1} with verifier values and
// rollout-estimated returns per state.
struct TrajectoryRecord {
  std::vector<ReasoningState> states;
  std::vector<std::optional<double>> values;  // values[j] = v(s_j)
  std::vector<double> returns;                // returns[j] = G_j
  int rollout_count = 0;

  std::size_t length() const { return states.size(); }
  void validate() const;
};

// Fraction of correct rollouts. Throws EmptyRollouts.
double mc_return(std::span<const bool> rollout_correct);

// (1 - lambda) * sum_{t=1}^{T-i-1} lambda^{t-1} v(s_{i+t}) + lambda^{T-i-1} G_i
double lambda_return(const TrajectoryRecord& record, std::size_t i, double lambda);

// Arithmetic mean in member order. A running mean is used so N identical
// scores reduce to exactly that score.
double ensemble_score(std::span<const double> scores);

class EnsembleVerifier final : public Verifier {
 public:
  explicit EnsembleVerifier(std::vector<std::shared_ptr<Verifier>> members);
  double score(const ReasoningState& state) override;
  std::string identity() const override;
  std::size_t size() const { return members_.size(); }

 private:
  std::vector<std::shared_ptr<Verifier>> members_;
};

double sample_std(std::span<const double> xs);

// Sample std per problem, averaged within each difficulty level.
std::map<int, double> score_std_by_difficulty(const std::map<std::string, std::vector<double>>& scores,
                                              const std::map<std::string, int>& levels);

struct BrierSample {
  int step = 0;
  double predicted = 0.0;
  int outcome = 0;  // final correctness, 0 or 1
};
std::map<int, double> brier_by_step(std::span<const BrierSample> samples);

enum class LabelMethod { Mc, TdLambda };
std::string_view to_string(LabelMethod m);
LabelMethod parse_label_method(std::string_view text);

struct ValueLabel {
  std::string state;
  double target = 0.0;
  LabelMethod method = LabelMethod::Mc;
  std::optional<double> lambda;
};

// One label per (trajectory, state) with target min(return, 1).
std::vector<ValueLabel> export_value_labels(std::span<const TrajectoryRecord> records, LabelMethod method,
                                            double lambda);
void write_value_labels_jsonl(std::ostream& out, std::span<const ValueLabel> labels);

struct ReturnEstimation {
  int rollouts = 16;  // rho
  SamplingParams params{1.0, 1.0};
  int max_depth = 12;
  std::string marker{kDefaultAnswerMarker};
};

// G_j for each state by rho rollouts scored against the reference answer.
std::vector<double> estimate_returns(Policy& policy, std::span<const ReasoningState> states,
                                     const std::string& reference, const ReturnEstimation& est, RngStream& rng,
                                     TokenMeter& meter);

// Samples one trajectory from the root, estimates returns, and scores every
// state with the verifier (the bootstrap pass lambda-returns need).
TrajectoryRecord build_trajectory_record(Policy& policy, Verifier& verifier, const Problem& problem,
                                         const ReturnEstimation& est, const SamplingParams& trajectory_params,
                                         RngStream& rng, TokenMeter& meter);

}  // namespace arbor
