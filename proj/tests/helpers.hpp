#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "arbor/backends.hpp"
#include "arbor/core.hpp"
#include "arbor/synthetic.hpp"

namespace arbor::testing {

inline ReasoningState state_of(const std::vector<std::string>& steps, std::string id = "p",
                               std::string question = "Q?") {
  ReasoningState s(std::move(id), std::move(question));
  for (const auto& t : steps) s = s.extend(Step{t, 1, std::nullopt}, kDefaultAnswerMarker);
  return s;
}

inline std::shared_ptr<const SyntheticTaskSpec> make_spec(const nlohmann::json& j) {
  return std::make_shared<const SyntheticTaskSpec>(SyntheticTaskSpec::from_json(j));
}

inline nlohmann::json edge(const std::string& tmpl, double prob, std::vector<std::string> aliases,
                           const std::string& next, std::int64_t tokens = 3) {
  return {{"template", tmpl}, {"prob", prob}, {"aliases", aliases}, {"tokens", tokens}, {"next", next}};
}

inline nlohmann::json answer_edge(const std::string& tmpl, double prob, std::vector<std::string> aliases,
                                  const std::string& answer, std::int64_t tokens = 3) {
  return {{"template", tmpl}, {"prob", prob}, {"aliases", aliases}, {"tokens", tokens}, {"answer", answer}};
}

inline nlohmann::json one_problem(const std::string& id, const std::string& answer, nlohmann::json states,
                                  const std::string& root = "s0") {
  return {{"name", "test"},
          {"problems", nlohmann::json::array({{{"id", id},
                                               {"question", "Question " + id},
                                               {"answer", answer},
                                               {"root", root},
                                               {"states", std::move(states)}}})}};
}

// Root with two branches: "good" leads to the right answer, "bad" to a
// wrong one.
inline nlohmann::json two_branch_spec(double p_good = 0.5) {
  return one_problem("two", "1",
                     {{"s0", {edge("good", p_good, {"Go left."}, "g"), edge("bad", 1.0 - p_good, {"Go right."}, "b")}},
                      {"g", {answer_edge("g-end", 1.0, {"The answer is 1."}, "1")}},
                      {"b", {answer_edge("b-end", 1.0, {"The answer is 2."}, "2")}}});
}

// Verifier reading scores from a table keyed by the newest step text.
class TableVerifier final : public Verifier {
 public:
  TableVerifier(std::map<std::string, double> table, double fallback = 0.5)
      : table_(std::move(table)), fallback_(fallback) {}
  double score(const ReasoningState& s) override {
    if (s.empty()) return fallback_;
    auto it = table_.find(s.last_step().text);
    return it == table_.end() ? fallback_ : it->second;
  }
  std::string identity() const override { return "table"; }

 private:
  std::map<std::string, double> table_;
  double fallback_;
};

// Wraps a verifier with a fixed transform of its output.
template <class F>
class MappedVerifier final : public Verifier {
 public:
  MappedVerifier(Verifier& inner, F f) : inner_(inner), f_(f) {}
  double score(const ReasoningState& s) override { return f_(inner_.score(s)); }
  std::string identity() const override { return "mapped:" + inner_.identity(); }

 private:
  Verifier& inner_;
  F f_;
};

// Policy with fixed per-step token logprobs keyed by (state last step, step
// text). Only score_continuation is scripted.
class ScriptedPolicy final : public Policy {
 public:
  std::map<std::pair<std::string, std::string>, std::vector<double>> logprobs;

  std::vector<Step> generate(const ReasoningState&, int n, const SamplingParams&, RngStream&) override {
    return std::vector<Step>(static_cast<std::size_t>(n), Step{"x", 1, std::nullopt});
  }
  std::vector<double> score_continuation(const ReasoningState& s, std::span<const Step> steps) override {
    std::vector<double> out;
    for (const auto& st : steps) {
      const auto& v = logprobs.at({s.empty() ? "" : s.last_step().text, st.text});
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }
  std::string identity() const override { return "scripted"; }
};

}  // namespace arbor::testing
