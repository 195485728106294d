#include "arbor/simpairs.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace arbor {

std::string_view to_string(PairSource s) { return s == PairSource::Prompting ? "prompting" : "consistency"; }

void ConsistencyConfig::validate() const {
  if (!(alpha > 0.0 && alpha < beta)) throw Error(ErrorKind::InvalidArgument, "consistency thresholds need 0 < alpha < beta");
  if (rollouts < 1) throw Error(ErrorKind::InvalidArgument, "consistency needs K >= 1");
  if (rollout_steps < 1) throw Error(ErrorKind::InvalidArgument, "consistency needs rollout_steps >= 1");
}

double consistency_delta(Policy& policy, const ReasoningState& s_i, const ReasoningState& s_j,
                         std::span<const std::vector<Step>> rollouts, ProbabilityMode mode) {
  if (rollouts.empty()) throw Error(ErrorKind::EmptyRollouts, "consistency_delta needs K >= 1");
  double sum = 0.0;
  for (const auto& a : rollouts) {
    sum += std::abs(sequence_probability(policy, s_i, a, mode) - sequence_probability(policy, s_j, a, mode));
  }
  return sum / static_cast<double>(rollouts.size());
}

double consistency_delta(Policy& policy, const ReasoningState& s_i, const ReasoningState& s_j,
                         const ConsistencyConfig& config, RngStream& rng, TokenMeter& meter) {
  config.validate();
  if (s_i.terminal()) throw Error(ErrorKind::InvalidArgument, "cannot sample continuations of a terminal state");
  std::vector<std::vector<Step>> rollouts;
  for (int k = 0; k < config.rollouts; ++k) {
    auto r = rollout(policy, s_i, config.params, rng, config.rollout_steps, config.marker, meter);
    rollouts.push_back(std::move(r.appended));
  }
  return consistency_delta(policy, s_i, s_j, rollouts, config.mode);
}

std::optional<int> label_pair(double delta, const ConsistencyConfig& config) {
  if (!(delta >= 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be >= 0");
  if (delta < config.alpha) return 1;
  if (delta > config.beta) return 0;
  return std::nullopt;
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  if (text_.find("{STEP_A}") == std::string::npos || text_.find("{STEP_B}") == std::string::npos) {
    throw Error(ErrorKind::InvalidArgument, "prompt template needs {STEP_A} and {STEP_B}");
  }
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open prompt template " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return PromptTemplate(ss.str());
}

std::string PromptTemplate::render(std::string_view step_a, std::string_view step_b) const {
  std::string out;
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const auto a = text_.find("{STEP_A}", pos);
    const auto b = text_.find("{STEP_B}", pos);
    const auto next = std::min(a, b);
    if (next == std::string::npos) {
      out.append(text_, pos);
      break;
    }
    out.append(text_, pos, next - pos);
    out.append(next == a ? step_a : step_b);
    pos = next + 8;
  }
  return out;
}

std::optional<int> parse_yes_no(std::string_view response) {
  std::size_t i = 0;
  while (i < response.size() && !std::isalpha(static_cast<unsigned char>(response[i]))) ++i;
  std::size_t j = i;
  while (j < response.size() && std::isalpha(static_cast<unsigned char>(response[j]))) ++j;
  std::string word(response.substr(i, j - i));
  for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (word == "yes") return 1;
  if (word == "no") return 0;
  return std::nullopt;
}

std::optional<int> prompt_label(const std::string& step_a, const std::string& step_b, TextCompleter& llm,
                                const PromptTemplate& prompt) {
  return parse_yes_no(llm.complete(prompt.render(step_a, step_b)));
}

double bce_objective(double cosine_similarity, int label) {
  if (label != 0 && label != 1) throw Error(ErrorKind::InvalidArgument, "label must be 0 or 1");
  const double g = std::clamp(cosine_similarity, 1e-6, 1.0 - 1e-6);
  return label == 1 ? -std::log(g) : -std::log(1.0 - g);
}

double edit_distance_similarity(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diag = up;
    }
  }
  return 1.0 - static_cast<double>(row[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::LengthMismatch, "pearson needs equal lengths");
  if (xs.size() < 2) throw Error(ErrorKind::InvalidArgument, "pearson needs at least 2 points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::ZeroVariance, "pearson input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<CandidatePair> mine_sibling_pairs(const SearchTrace& trace, const std::string& question,
                                              std::size_t max_pairs_per_batch) {
  std::map<NodeId, const TraceNode*> by_id;
  for (const auto& n : trace.nodes) by_id[n.id] = &n;
  const std::string marker =
      trace.config.contains("marker") ? trace.config["marker"].get<std::string>() : std::string(kDefaultAnswerMarker);
  auto state_of = [&](NodeId id) {
    std::vector<const TraceNode*> chain;
    for (NodeId cur = id; cur != kRootParent;) {
      auto it = by_id.find(cur);
      if (it == by_id.end()) throw Error(ErrorKind::MalformedResponse, "trace references missing node");
      chain.push_back(it->second);
      cur = it->second->parent;
    }
    ReasoningState s(trace.problem_id, question);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      if ((*it)->step) s = s.extend(Step{*(*it)->step, (*it)->tokens, (*it)->logprob}, marker);
    }
    return s;
  };

  std::vector<CandidatePair> out;
  for (const auto& sel : trace.selections) {
    if (sel.action != "expand") continue;
    std::size_t taken = 0;
    for (std::size_t i = 0; i < sel.children.size() && taken < max_pairs_per_batch; ++i) {
      for (std::size_t j = i + 1; j < sel.children.size() && taken < max_pairs_per_batch; ++j) {
        const auto* a = by_id.at(sel.children[i]);
        const auto* b = by_id.at(sel.children[j]);
        if (a->step == b->step) continue;
        out.push_back({state_of(a->id), state_of(b->id)});
        ++taken;
      }
    }
  }
  return out;
}

void write_pairs_jsonl(std::ostream& out, std::span<const SimilarityPair> pairs,
                       const ConsistencyConfig* consistency) {
  for (const auto& p : pairs) {
    if (!p.label) continue;
    nlohmann::ordered_json j;
    j["a"] = p.step_a;
    j["b"] = p.step_b;
    j["y"] = *p.label;
    j["source"] = to_string(p.source);
    j["delta"] = p.delta ? nlohmann::ordered_json(*p.delta) : nlohmann::ordered_json(nullptr);
    if (consistency && p.source == PairSource::Consistency) {
      j["k"] = consistency->rollouts;
      j["mode"] = to_string(consistency->mode);
      j["alpha"] = consistency->alpha;
      j["beta"] = consistency->beta;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace arbor
