#include "arbor/valuation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace arbor {

void TrajectoryRecord::validate() const {
  const auto t = states.size();
  if (t < 1) throw Error(ErrorKind::InvalidArgument, "trajectory needs T >= 1");
  if (values.size() != t || returns.size() != t) {
    throw Error(ErrorKind::InvalidArgument, "trajectory values/returns must have one entry per state");
  }
  for (std::size_t j = 0; j < t; ++j) {
    if (returns[j] < 0.0 || returns[j] > 1.0) throw Error(ErrorKind::InvalidArgument, "return outside [0,1]");
    if (values[j] && (*values[j] < 0.0 || *values[j] > 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "value outside [0,1]");
    }
  }
}

double mc_return(std::span<const bool> rollout_correct) {
  if (rollout_correct.empty()) throw Error(ErrorKind::EmptyRollouts, "mc_return needs at least one rollout");
  const auto hits = std::count(rollout_correct.begin(), rollout_correct.end(), true);
  return static_cast<double>(hits) / static_cast<double>(rollout_correct.size());
}

double lambda_return(const TrajectoryRecord& record, std::size_t i, double lambda) {
  const std::size_t t_len = record.length();
  if (i >= t_len || record.returns.size() != t_len) {
    throw Error(ErrorKind::IndexOutOfRange,
                "step " + std::to_string(i) + " outside trajectory of length " + std::to_string(t_len));
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorKind::InvalidArgument, "lambda must lie in [0,1]");
  double weight = 1.0;  // lambda^{t-1}
  double bootstrap = 0.0;
  for (std::size_t t = 1; i + t < t_len; ++t) {
    const auto& v = record.values.size() > i + t ? record.values[i + t] : std::nullopt;
    if (!v) throw Error(ErrorKind::MissingValues, "missing v(s_" + std::to_string(i + t) + ")");
    bootstrap += weight * *v;
    weight *= lambda;
  }
  return (1.0 - lambda) * bootstrap + weight * record.returns[i];
}

double ensemble_score(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorKind::EmptyEnsemble, "ensemble has no member scores");
  double mean = scores[0];
  for (std::size_t k = 1; k < scores.size(); ++k) mean += (scores[k] - mean) / static_cast<double>(k + 1);
  return mean;
}

EnsembleVerifier::EnsembleVerifier(std::vector<std::shared_ptr<Verifier>> members) : members_(std::move(members)) {
  if (members_.empty()) throw Error(ErrorKind::EmptyEnsemble, "ensemble needs at least one verifier");
}

double EnsembleVerifier::score(const ReasoningState& state) {
  std::vector<double> scores;
  scores.reserve(members_.size());
  for (const auto& m : members_) scores.push_back(score_state(*m, state));
  return ensemble_score(scores);
}

std::string EnsembleVerifier::identity() const {
  std::string out = "ensemble[";
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (k) out += ",";
    out += members_[k]->identity();
  }
  return out + "]";
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw Error(ErrorKind::InsufficientSamples, "sample std needs at least 2 values");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::map<int, double> score_std_by_difficulty(const std::map<std::string, std::vector<double>>& scores,
                                              const std::map<std::string, int>& levels) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& [id, list] : scores) {
    auto it = levels.find(id);
    if (it == levels.end()) throw Error(ErrorKind::InvalidArgument, "no difficulty level for '" + id + "'");
    if (list.size() < 2) {
      throw Error(ErrorKind::InsufficientSamples, "problem '" + id + "' has fewer than 2 scores");
    }
    auto& [sum, count] = acc[it->second];
    sum += sample_std(list);
    ++count;
  }
  std::map<int, double> out;
  for (const auto& [level, sc] : acc) out[level] = sc.first / sc.second;
  return out;
}

std::map<int, double> brier_by_step(std::span<const BrierSample> samples) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& s : samples) {
    if (s.outcome != 0 && s.outcome != 1) throw Error(ErrorKind::InvalidArgument, "outcome must be 0 or 1");
    auto& [sum, count] = acc[s.step];
    const double d = s.predicted - static_cast<double>(s.outcome);
    sum += d * d;
    ++count;
  }
  std::map<int, double> out;
  for (const auto& [step, sc] : acc) out[step] = sc.first / sc.second;
  return out;
}

std::string_view to_string(LabelMethod m) { return m == LabelMethod::Mc ? "mc" : "td_lambda"; }

LabelMethod parse_label_method(std::string_view text) {
  if (text == "mc") return LabelMethod::Mc;
  if (text == "td_lambda" || text == "td") return LabelMethod::TdLambda;
  throw Error(ErrorKind::InvalidArgument, "unknown label method '" + std::string(text) + "'");
}

std::vector<ValueLabel> export_value_labels(std::span<const TrajectoryRecord> records, LabelMethod method,
                                            double lambda) {
  std::vector<ValueLabel> out;
  for (const auto& r : records) {
    r.validate();
    for (std::size_t i = 0; i < r.length(); ++i) {
      ValueLabel label;
      label.state = r.states[i].text();
      label.method = method;
      if (method == LabelMethod::Mc) {
        label.target = std::min(r.returns[i], 1.0);
      } else {
        label.target = std::min(lambda_return(r, i, lambda), 1.0);
        label.lambda = lambda;
      }
      out.push_back(std::move(label));
    }
  }
  return out;
}

void write_value_labels_jsonl(std::ostream& out, std::span<const ValueLabel> labels) {
  for (const auto& l : labels) {
    nlohmann::ordered_json j;
    j["state"] = l.state;
    j["target"] = l.target;
    j["method"] = to_string(l.method);
    j["lambda"] = l.lambda ? nlohmann::ordered_json(*l.lambda) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing value labels");
}

std::vector<double> estimate_returns(Policy& policy, std::span<const ReasoningState> states,
                                     const std::string& reference, const ReturnEstimation& est, RngStream& rng,
                                     TokenMeter& meter) {
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) {
    if (s.terminal()) {
      out.push_back(answers_match(extract_answer(s, est.marker), reference) ? 1.0 : 0.0);
      continue;
    }
    const auto n = static_cast<std::size_t>(std::max(est.rollouts, 0));
    auto correct = std::make_unique<bool[]>(n);
    for (std::size_t k = 0; k < n; ++k) {
      auto r = rollout(policy, s, est.params, rng, est.max_depth, est.marker, meter);
      correct[k] = r.state.terminal() && answers_match(extract_answer(r.state, est.marker), reference);
    }
    out.push_back(mc_return(std::span<const bool>(correct.get(), n)));
  }
  return out;
}

TrajectoryRecord build_trajectory_record(Policy& policy, Verifier& verifier, const Problem& problem,
                                         const ReturnEstimation& est, const SamplingParams& trajectory_params,
                                         RngStream& rng, TokenMeter& meter) {
  if (!problem.reference_answer) {
    throw Error(ErrorKind::InvalidArgument, "value labels need a reference answer for '" + problem.id + "'");
  }
  ReasoningState root(problem.id, problem.question);
  auto traj = rollout(policy, root, trajectory_params, rng, est.max_depth, est.marker, meter);
  TrajectoryRecord rec;
  rec.states.push_back(root);
  ReasoningState cur = root;
  for (const auto& step : traj.appended) {
    cur = cur.extend(step, est.marker);
    rec.states.push_back(cur);
  }
  rec.returns = estimate_returns(policy, rec.states, *problem.reference_answer, est, rng, meter);
  for (const auto& s : rec.states) rec.values.push_back(score_state(verifier, s));
  rec.rollout_count = est.rollouts;
  return rec;
}

}  // namespace arbor
