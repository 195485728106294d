#pragma once
// Generators for the built-in synthetic task families. The JSON files under
// data/synthetic/ are produced by these with the defaults below.

#include <cstdint>
#include <string>

#include "arbor/synthetic.hpp"

namespace arbor::families {

// One template per state; `depth` steps, the last one answering.
struct ChainParams {
  int problems = 1;
  int depth = 3;
  int aliases_per_step = 1;
  std::int64_t tokens_per_step = 5;
};
SyntheticTaskSpec deterministic_chain(const ChainParams& p);

// Layered DAG whose every non-final state offers round(1 / alias_rate)
// equiprobable templates, so two sibling samples are paraphrases of the same
// step with probability alias_rate. Template j leads to layer state j. Final
// layer states answer correctly with per-state probabilities drawn from
// [min_success, max_success].
struct AliasFanoutParams {
  int problems = 50;
  int min_depth = 6;
  int max_depth = 10;
  double alias_rate = 0.5;
  int aliases_per_template = 8;
  double min_success = 0.6;
  double max_success = 0.9;
  double sigma = 0.1;
  std::uint64_t seed = 7;
};
SyntheticTaskSpec alias_fanout(const AliasFanoutParams& p);

// Chain of `depth` states; at state k the policy advances with probability
// advance_prob or slips to a wrong answer. The last state answers correctly
// with probability final_success. Problem i gets difficulty level
// 1 + i % levels and verifier sigma = sigma_base * level.
struct LadderParams {
  int problems = 4;
  int depth = 5;
  double advance_prob = 0.85;
  double final_success = 0.8;
  int levels = 4;
  double sigma_base = 0.05;
  int aliases_per_template = 3;
};
SyntheticTaskSpec noisy_ladder(const LadderParams& p);

// Root with several approaches, each a short chain ending in an answer
// distribution; the policy's most likely first step is not always the one
// most likely to be right. Used by the sampling-baseline comparisons.
struct StochasticParams {
  int problems = 100;
  int approaches = 3;
  int chain_length = 2;
  std::uint64_t seed = 11;
};
SyntheticTaskSpec stochastic_answers(const StochasticParams& p);

}  // namespace arbor::families
