#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "arbor/error.hpp"
#include "arbor/rng.hpp"

namespace arbor {

inline constexpr std::string_view kDefaultAnswerMarker = "The answer is";

struct Problem {
  std::string id;
  std::string question;
  std::optional<std::string> reference_answer;
};

struct Step {
  std::string text;
  std::int64_t token_count = 0;
  std::optional<double> logprob;  // <= 0 when the backend reports it
};

// A question plus an ordered prefix of reasoning steps. Immutable by
// convention: extend() returns a new state.
class ReasoningState {
 public:
  ReasoningState() = default;
  ReasoningState(std::string problem_id, std::string question)
      : problem_id_(std::move(problem_id)), question_(std::move(question)) {}

  const std::string& problem_id() const { return problem_id_; }
  const std::string& question() const { return question_; }
  const std::vector<Step>& steps() const { return steps_; }
  std::size_t depth() const { return steps_.size(); }
  bool terminal() const { return terminal_; }
  bool empty() const { return steps_.empty(); }
  const Step& last_step() const { return steps_.back(); }

  ReasoningState extend(Step step, std::string_view marker) const;

  // Question and steps, one per line. This is the policy prompt and the
  // embedder's full-state text.
  std::string text() const;

 private:
  std::string problem_id_;
  std::string question_;
  std::vector<Step> steps_;
  bool terminal_ = false;
};

enum class NodeStatus { Unexplored, Expanded, Terminal };
std::string_view to_string(NodeStatus status);

using NodeId = std::int64_t;
inline constexpr NodeId kRootParent = -1;

struct Node {
  NodeId id = 0;
  NodeId parent = kRootParent;
  ReasoningState state;
  double score = 0.0;
  NodeStatus status = NodeStatus::Unexplored;
};

// Counts generated tokens within one metered scope. Increments are atomic so
// concurrent backend calls can share a meter.
class TokenMeter {
 public:
  void add(std::int64_t tokens) { generated_.fetch_add(tokens, std::memory_order_relaxed); }
  std::int64_t generated_tokens() const { return generated_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::int64_t> generated_{0};
};

bool detect_terminal(const ReasoningState& state, std::string_view marker);
bool contains_marker(std::string_view text, std::string_view marker);

// Trim, strip trailing punctuation, and canonicalize decimals ("7.0" -> "7",
// "1,000" -> "1000"). Non-numeric answers come back trimmed.
std::string canonicalize_answer(std::string_view raw);

// Canonical text after the last marker in the final step. Throws NotTerminal.
std::string extract_answer(const ReasoningState& state, std::string_view marker);

bool answers_match(std::string_view a, std::string_view b);

// JSONL with keys id, question and optional answer.
std::vector<Problem> parse_dataset(std::string_view jsonl);
std::vector<Problem> load_dataset(const std::string& path);

}  // namespace arbor
