#include "arbor/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

namespace arbor {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); }

double state_value(const SpecProblem& p, std::size_t s, std::vector<std::optional<double>>& memo) {
  if (memo[s]) return *memo[s];
  double v = 0.0;
  for (const auto& e : p.states[s].edges) {
    if (e.answer) {
      v += e.prob * (answers_match(*e.answer, *p.problem.reference_answer) ? 1.0 : 0.0);
    } else {
      v += e.prob * state_value(p, *e.next, memo);
    }
  }
  memo[s] = v;
  return v;
}

void answer_mass(const SpecProblem& p, std::size_t s, double weight, std::map<std::string, double>& out) {
  for (const auto& e : p.states[s].edges) {
    if (e.prob == 0.0) continue;
    if (e.answer) {
      out[canonicalize_answer(*e.answer)] += weight * e.prob;
    } else {
      answer_mass(p, *e.next, weight * e.prob, out);
    }
  }
}

}  // namespace

SyntheticTaskSpec SyntheticTaskSpec::from_json(const nlohmann::json& j) {
  SyntheticTaskSpec spec;
  try {
    spec.name_ = j.value("name", std::string("synthetic"));
    spec.marker_ = j.value("marker", std::string(kDefaultAnswerMarker));
    if (spec.marker_.empty()) invalid("marker must be non-empty");
    for (const auto& jp : j.at("problems")) {
      SpecProblem p;
      p.problem.id = jp.at("id").get<std::string>();
      p.problem.question = jp.at("question").get<std::string>();
      p.problem.reference_answer = jp.at("answer").get<std::string>();
      if (jp.contains("sigma")) p.sigma = jp["sigma"].get<double>();
      const auto& jstates = jp.at("states");
      std::unordered_map<std::string, std::size_t> state_index;
      for (auto it = jstates.begin(); it != jstates.end(); ++it) {
        state_index.emplace(it.key(), p.states.size());
        p.states.push_back(SpecState{it.key(), {}, {}});
      }
      const std::string root = jp.at("root").get<std::string>();
      if (!state_index.count(root)) invalid(p.problem.id + ": unknown root state '" + root + "'");
      p.root = state_index.at(root);
      for (auto it = jstates.begin(); it != jstates.end(); ++it) {
        auto& st = p.states[state_index.at(it.key())];
        std::size_t k = 0;
        for (const auto& je : it.value()) {
          SpecEdge e;
          e.template_name = je.value("template", p.problem.id + "/" + st.name + "/" + std::to_string(k));
          e.prob = je.at("prob").get<double>();
          e.aliases = je.at("aliases").get<std::vector<std::string>>();
          e.tokens = je.value("tokens", std::int64_t{1});
          if (je.contains("answer") && !je["answer"].is_null()) {
            e.answer = je["answer"].is_string() ? je["answer"].get<std::string>() : je["answer"].dump();
          }
          if (je.contains("next") && !je["next"].is_null()) {
            const auto nx = je["next"].get<std::string>();
            if (!state_index.count(nx)) invalid(p.problem.id + ": unknown next state '" + nx + "'");
            e.next = state_index.at(nx);
          }
          st.edges.push_back(std::move(e));
          ++k;
        }
      }
      spec.problems_.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    invalid(std::string("malformed spec JSON: ") + e.what());
  }
  spec.index_and_validate();
  return spec;
}

SyntheticTaskSpec SyntheticTaskSpec::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open synthetic spec " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    invalid(path + ": " + e.what());
  }
  return from_json(j);
}

void SyntheticTaskSpec::index_and_validate() {
  for (std::size_t pi = 0; pi < problems_.size(); ++pi) {
    auto& p = problems_[pi];
    const auto& id = p.problem.id;
    if (id.empty() || p.problem.question.empty()) invalid("problem id and question must be non-empty");
    if (!problem_index_.emplace(id, pi).second) invalid("duplicate problem id '" + id + "'");
    if (p.sigma && *p.sigma < 0.0) invalid(id + ": sigma must be >= 0");
    bool any_terminal = false;
    for (auto& st : p.states) {
      if (st.edges.empty()) invalid(id + "/" + st.name + ": state has no outgoing steps");
      double total = 0.0;
      for (std::size_t k = 0; k < st.edges.size(); ++k) {
        const auto& e = st.edges[k];
        const std::string where = id + "/" + st.name + "/" + e.template_name;
        if (e.prob < 0.0) invalid(where + ": negative probability");
        if (e.aliases.empty()) invalid(where + ": no aliases");
        if (e.tokens < 1) invalid(where + ": tokens must be >= 1");
        if (e.answer.has_value() == e.next.has_value()) invalid(where + ": exactly one of next/answer required");
        any_terminal = any_terminal || e.answer.has_value();
        total += e.prob;

        auto [tit, fresh] = template_index_.emplace(e.template_name, template_names_.size());
        if (fresh) template_names_.push_back(e.template_name);
        for (const auto& a : e.aliases) {
          if (a.empty() || a.find('\n') != std::string::npos) invalid(where + ": alias must be one non-empty line");
          if (contains_marker(a, marker_) != e.answer.has_value()) {
            invalid(where + ": alias '" + a + "' must carry the answer marker iff the step is terminal");
          }
          if (!st.alias_to_edge.emplace(a, k).second) invalid(where + ": alias '" + a + "' repeated in state");
          auto [ait, ins] = alias_template_.emplace(a, tit->second);
          if (!ins && ait->second != tit->second) {
            invalid("alias '" + a + "' belongs to two templates");
          }
        }
      }
      if (std::fabs(total - 1.0) > 1e-9) invalid(id + "/" + st.name + ": probabilities sum to " + std::to_string(total));
    }
    if (!any_terminal) invalid(id + ": no terminal step");

    // Cycle check: 0 = new, 1 = on stack, 2 = done.
    std::vector<int> color(p.states.size(), 0);
    std::function<void(std::size_t)> visit = [&](std::size_t s) {
      color[s] = 1;
      for (const auto& e : p.states[s].edges) {
        if (!e.next) continue;
        if (color[*e.next] == 1) invalid(id + ": cycle through state '" + p.states[*e.next].name + "'");
        if (color[*e.next] == 0) visit(*e.next);
      }
      color[s] = 2;
    };
    for (std::size_t s = 0; s < p.states.size(); ++s) {
      if (color[s] == 0) visit(s);
    }
  }
}

nlohmann::json SyntheticTaskSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name_;
  j["marker"] = marker_;
  j["problems"] = nlohmann::json::array();
  for (const auto& p : problems_) {
    nlohmann::json jp;
    jp["id"] = p.problem.id;
    jp["question"] = p.problem.question;
    jp["answer"] = *p.problem.reference_answer;
    if (p.sigma) jp["sigma"] = *p.sigma;
    jp["root"] = p.states[p.root].name;
    nlohmann::json states = nlohmann::json::object();
    for (const auto& st : p.states) {
      nlohmann::json edges = nlohmann::json::array();
      for (const auto& e : st.edges) {
        nlohmann::json je;
        je["template"] = e.template_name;
        je["prob"] = e.prob;
        je["aliases"] = e.aliases;
        je["tokens"] = e.tokens;
        if (e.next) je["next"] = p.states[*e.next].name;
        if (e.answer) je["answer"] = *e.answer;
        edges.push_back(std::move(je));
      }
      states[st.name] = std::move(edges);
    }
    jp["states"] = std::move(states);
    j["problems"].push_back(std::move(jp));
  }
  return j;
}

std::vector<Problem> SyntheticTaskSpec::dataset() const {
  std::vector<Problem> out;
  for (const auto& p : problems_) out.push_back(p.problem);
  return out;
}

const SpecProblem& SyntheticTaskSpec::problem(const std::string& id) const {
  auto it = problem_index_.find(id);
  if (it == problem_index_.end()) throw Error(ErrorKind::UnknownState, "no problem '" + id + "' in spec");
  return problems_[it->second];
}

SpecPosition SyntheticTaskSpec::locate(const ReasoningState& state) const {
  const auto& p = problem(state.problem_id());
  SpecPosition pos{&p, p.root, std::nullopt};
  for (const auto& step : state.steps()) {
    if (!pos.state) throw Error(ErrorKind::UnknownState, "step after terminal step in '" + p.problem.id + "'");
    const auto& st = p.states[*pos.state];
    auto it = st.alias_to_edge.find(step.text);
    if (it == st.alias_to_edge.end()) {
      throw Error(ErrorKind::UnknownState, "step '" + step.text + "' not in state '" + st.name + "'");
    }
    const auto& e = st.edges[it->second];
    if (e.answer) {
      pos.state.reset();
      pos.answer = canonicalize_answer(*e.answer);
    } else {
      pos.state = *e.next;
    }
  }
  return pos;
}

ReasoningState SyntheticTaskSpec::root_state(const std::string& problem_id) const {
  const auto& p = problem(problem_id);
  return ReasoningState(p.problem.id, p.problem.question);
}

std::optional<std::size_t> SyntheticTaskSpec::template_of(std::string_view alias) const {
  auto it = alias_template_.find(std::string(alias));
  if (it == alias_template_.end()) return std::nullopt;
  return it->second;
}

double true_state_value(const SyntheticTaskSpec& spec, const ReasoningState& state) {
  const auto pos = spec.locate(state);
  if (pos.answer) return answers_match(*pos.answer, *pos.problem->problem.reference_answer) ? 1.0 : 0.0;
  std::vector<std::optional<double>> memo(pos.problem->states.size());
  return std::clamp(state_value(*pos.problem, *pos.state, memo), 0.0, 1.0);
}

std::map<std::string, double> terminal_answer_distribution(const SyntheticTaskSpec& spec,
                                                           const ReasoningState& state) {
  const auto pos = spec.locate(state);
  std::map<std::string, double> out;
  if (pos.answer) {
    out[*pos.answer] = 1.0;
  } else {
    answer_mass(*pos.problem, *pos.state, 1.0, out);
  }
  return out;
}

std::vector<double> sampling_distribution(const std::vector<SpecEdge>& edges, const SamplingParams& params) {
  const std::size_t n = edges.size();
  std::vector<double> q(n, 0.0);
  if (params.temperature <= 0.0) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (edges[k].prob > edges[best].prob) best = k;
    }
    q[best] = 1.0;
    return q;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    q[k] = edges[k].prob > 0.0 ? std::pow(edges[k].prob, 1.0 / params.temperature) : 0.0;
    total += q[k];
  }
  for (auto& x : q) x /= total;
  if (params.top_p < 1.0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
    double cum = 0.0;
    std::size_t keep = 0;
    while (keep < n && cum < params.top_p - 1e-12) cum += q[order[keep++]];
    keep = std::max<std::size_t>(keep, 1);
    double kept = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (r < keep) {
        kept += q[order[r]];
      } else {
        q[order[r]] = 0.0;
      }
    }
    for (auto& x : q) x /= kept;
  }
  return q;
}

std::vector<Step> SyntheticPolicy::generate(const ReasoningState& state, int n, const SamplingParams& params,
                                            RngStream& rng) {
  const auto pos = spec_->locate(state);
  if (!pos.state) throw Error(ErrorKind::InvalidArgument, "cannot extend a terminal state");
  const auto& st = pos.problem->states[*pos.state];
  const auto dist = sampling_distribution(st.edges, params);
  std::vector<Step> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::size_t pick = st.edges.size() - 1;
    if (params.temperature <= 0.0) {
      pick = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    } else {
      const double u = rng.uniform();
      double cum = 0.0;
      for (std::size_t k = 0; k < dist.size(); ++k) {
        cum += dist[k];
        if (dist[k] > 0.0 && u < cum) {
          pick = k;
          break;
        }
      }
      while (dist[pick] == 0.0) --pick;
    }
    const auto& e = st.edges[pick];
    const std::size_t alias = params.temperature <= 0.0 ? 0 : rng.below(e.aliases.size());
    out.push_back(Step{e.aliases[alias], e.tokens, std::log(e.prob)});
  }
  return out;
}

std::vector<double> SyntheticPolicy::score_continuation(const ReasoningState& state,
                                                        std::span<const Step> rollout) {
  const auto pos = spec_->locate(state);
  const SpecProblem& p = *pos.problem;
  std::optional<std::size_t> cur = pos.state;
  std::vector<double> out;
  bool dead = false;
  for (const auto& step : rollout) {
    double lp = -std::numeric_limits<double>::infinity();
    std::int64_t tokens = std::max<std::int64_t>(step.token_count, 1);
    if (!dead && cur) {
      const auto& st = p.states[*cur];
      auto it = st.alias_to_edge.find(step.text);
      if (it != st.alias_to_edge.end()) {
        const auto& e = st.edges[it->second];
        lp = std::log(e.prob);
        tokens = e.tokens;
        cur = e.next;
      } else {
        dead = true;
      }
    } else {
      dead = true;
    }
    for (std::int64_t t = 0; t < tokens; ++t) out.push_back(lp / static_cast<double>(tokens));
  }
  return out;
}

SyntheticVerifier::SyntheticVerifier(std::shared_ptr<const SyntheticTaskSpec> spec, SyntheticVerifierMode mode,
                                     double sigma, std::uint64_t seed, bool per_problem_sigma)
    : spec_(std::move(spec)), mode_(mode), sigma_(sigma), seed_(seed), per_problem_sigma_(per_problem_sigma) {
  if (sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
}

double SyntheticVerifier::sigma_for(const std::string& problem_id) const {
  if (per_problem_sigma_) {
    const auto& p = spec_->problem(problem_id);
    if (p.sigma) return *p.sigma;
  }
  return sigma_;
}

double SyntheticVerifier::score(const ReasoningState& state) {
  const double oracle = true_state_value(*spec_, state);
  if (mode_ == SyntheticVerifierMode::Oracle) return oracle;
  const double sigma = sigma_for(state.problem_id());
  if (sigma == 0.0) return oracle;
  RngStream noise(seed_, fnv1a64(state.problem_id() + '\x1f' + state.text()));
  return std::clamp(oracle + sigma * noise.truncated_normal(3.0), 0.0, 1.0);
}

std::string SyntheticVerifier::identity() const {
  if (mode_ == SyntheticVerifierMode::Oracle) return "oracle";
  std::ostringstream os;
  os << "noisy(sigma=" << sigma_ << ",seed=" << seed_ << ")";
  return os.str();
}

std::vector<double> ExactAliasEmbedder::embed(std::string_view text) {
  if (auto nl = text.rfind('\n'); nl != std::string_view::npos) text = text.substr(nl + 1);
  const auto t = spec_->template_of(text);
  if (!t) throw Error(ErrorKind::UnknownState, "exact-alias embedder: unknown step '" + std::string(text) + "'");
  std::vector<double> v(spec_->template_count(), 0.0);
  v[*t] = 1.0;
  return v;
}

std::string SyntheticJudge::complete(const std::string& prompt) {
  std::optional<std::string> a, b;
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Step A: ", 0) == 0) a = line.substr(8);
    if (line.rfind("Step B: ", 0) == 0) b = line.substr(8);
  }
  if (!a || !b) return "I cannot tell.";
  const auto ta = spec_->template_of(*a);
  const auto tb = spec_->template_of(*b);
  if (!ta || !tb) return "I cannot tell.";
  return *ta == *tb ? "Yes." : "No.";
}

}  // namespace arbor
