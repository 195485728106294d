#include "arbor/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "arbor/kernels.hpp"

namespace arbor {

std::vector<Step> generate_steps(Policy& policy, const ReasoningState& state, int n,
                                 const SamplingParams& params, RngStream& rng, TokenMeter& meter) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "generate_steps needs n >= 1");
  auto steps = policy.generate(state, n, params, rng);
  if (steps.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorKind::MalformedResponse, "policy returned " + std::to_string(steps.size()) +
                                                  " steps, expected " + std::to_string(n));
  }
  for (const auto& s : steps) {
    if (s.token_count < 0) throw Error(ErrorKind::MalformedResponse, "negative token count");
    meter.add(s.token_count);
  }
  return steps;
}

RolloutResult rollout(Policy& policy, const ReasoningState& state, const SamplingParams& params,
                      RngStream& rng, int max_depth, std::string_view marker, TokenMeter& meter) {
  if (max_depth < 1) throw Error(ErrorKind::InvalidArgument, "rollout needs max_depth >= 1");
  RolloutResult out{state, {}, false};
  if (out.state.terminal()) return out;
  for (int d = 0; d < max_depth; ++d) {
    auto steps = generate_steps(policy, out.state, 1, params, rng, meter);
    out.appended.push_back(steps.front());
    out.state = out.state.extend(std::move(steps.front()), marker);
    if (out.state.terminal()) return out;
  }
  out.depth_capped = true;
  return out;
}

std::string_view to_string(ProbabilityMode mode) {
  return mode == ProbabilityMode::Raw ? "raw" : "length_normalized";
}

ProbabilityMode parse_probability_mode(std::string_view text) {
  if (text == "raw") return ProbabilityMode::Raw;
  if (text == "length_normalized") return ProbabilityMode::LengthNormalized;
  throw Error(ErrorKind::InvalidArgument, "unknown probability mode '" + std::string(text) + "'");
}

double sequence_probability(std::span<const double> token_logprobs, ProbabilityMode mode) {
  if (token_logprobs.empty()) throw Error(ErrorKind::InvalidArgument, "empty rollout");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (std::isinf(lp) && lp < 0) return 0.0;
    sum += lp;
  }
  const double exponent =
      mode == ProbabilityMode::Raw ? sum : sum / static_cast<double>(token_logprobs.size());
  return std::clamp(std::exp(exponent), 0.0, 1.0);
}

double sequence_probability(Policy& policy, const ReasoningState& state, std::span<const Step> rollout,
                            ProbabilityMode mode) {
  if (rollout.empty()) throw Error(ErrorKind::InvalidArgument, "empty rollout");
  auto lps = policy.score_continuation(state, rollout);
  return sequence_probability(lps, mode);
}

double score_state(Verifier& verifier, const ReasoningState& state) {
  const double v = verifier.score(state);
  if (std::isnan(v)) throw Error(ErrorKind::MalformedResponse, verifier.identity() + " returned NaN");
  return std::clamp(v, 0.0, 1.0);
}

void normalize(std::vector<double>& v) {
  const double norm = std::sqrt(kernels::dot(v, v));
  if (norm > 0.0) kernels::scale_inplace(v, 1.0 / norm);
}

std::vector<double> HashedNgramEmbedder::embed(std::string_view text) {
  std::vector<double> v(dimension_, 0.0);
  std::string padded = "  ";
  for (char c : text) padded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  padded += "  ";
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const auto h = fnv1a64(std::string_view(padded).substr(i, 3));
    v[h % dimension_] += (h >> 63) ? 1.0 : -1.0;
  }
  normalize(v);
  if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
  return v;
}

}  // namespace arbor
