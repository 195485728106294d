#include "arbor/trace.hpp"

#include <cstdio>

namespace arbor {

namespace {

using ojson = nlohmann::ordered_json;

template <class T>
ojson opt(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <class T>
std::optional<T> get_opt(const ojson& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

NodeStatus parse_status(const std::string& s) {
  if (s == "unexplored") return NodeStatus::Unexplored;
  if (s == "expanded") return NodeStatus::Expanded;
  if (s == "terminal") return NodeStatus::Terminal;
  throw Error(ErrorKind::MalformedResponse, "unknown node status '" + s + "'");
}

}  // namespace

std::string config_hash(const nlohmann::ordered_json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

ojson SearchTrace::to_json() const {
  ojson j;
  j["schema_version"] = kSchemaVersion;
  j["run"] = {{"problem_id", problem_id},
              {"method", method},
              {"seed", seed},
              {"config_hash", config_hash(config)},
              {"config", config}};
  ojson jn = ojson::array();
  for (const auto& n : nodes) {
    jn.push_back({{"id", n.id},
                  {"parent", n.parent},
                  {"depth", n.depth},
                  {"step", opt(n.step)},
                  {"tokens", n.tokens},
                  {"logprob", opt(n.logprob)},
                  {"score", n.score},
                  {"status", to_string(n.status)},
                  {"answer", opt(n.answer)}});
  }
  j["nodes"] = std::move(jn);
  ojson jh = ojson::array();
  for (const auto& h : hyper_nodes) {
    jh.push_back({{"hyper_id", h.hyper_id},
                  {"batch", h.batch},
                  {"constituents", h.constituents},
                  {"scores", h.scores},
                  {"f", h.f},
                  {"v_bar", h.v_bar},
                  {"absorbed_into", opt(h.absorbed_into)}});
  }
  j["hyper_nodes"] = std::move(jh);
  ojson js = ojson::array();
  for (const auto& s : selections) {
    js.push_back({{"iteration", s.iteration},
                  {"hyper_id", s.hyper_id},
                  {"action", s.action},
                  {"budget", s.budget},
                  {"expanded_from", s.expanded_from},
                  {"children", s.children},
                  {"new_hyper_nodes", s.new_hyper_nodes}});
  }
  j["selections"] = std::move(js);
  ojson jr = ojson::array();
  for (const auto& r : rollouts) {
    ojson steps = ojson::array();
    for (const auto& s : r.steps) steps.push_back({{"text", s.text}, {"tokens", s.tokens}});
    jr.push_back({{"from", r.from},
                  {"purpose", r.purpose},
                  {"steps", std::move(steps)},
                  {"terminal", r.terminal},
                  {"answer", opt(r.answer)},
                  {"value", r.value}});
  }
  j["rollouts"] = std::move(jr);
  ojson jm = ojson::array();
  for (const auto& m : mcts) {
    jm.push_back({{"hyper_id", m.hyper_id},
                  {"visits", m.visits},
                  {"total_value", m.total_value},
                  {"mean_value", m.mean_value}});
  }
  j["mcts"] = std::move(jm);
  ojson terms = ojson::array();
  for (const auto& t : result.terminals) terms.push_back({{"node", t.node}, {"score", t.score}, {"answer", t.answer}});
  j["result"] = {{"answer", opt(result.answer)},
                 {"chosen_node", opt(result.chosen_node)},
                 {"chosen_rollout", opt(result.chosen_rollout)},
                 {"outcome", result.outcome},
                 {"tokens", result.tokens},
                 {"expansions", result.expansions},
                 {"terminals", std::move(terms)}};
  if (result.error) j["result"]["error"] = *result.error;
  return j;
}

std::string SearchTrace::dump() const { return to_json().dump(1) + "\n"; }

SearchTrace SearchTrace::parse(std::string_view text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("trace is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

SearchTrace SearchTrace::from_json(const nlohmann::ordered_json& j) {
  SearchTrace t;
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) {
      throw Error(ErrorKind::MalformedResponse, "unsupported trace schema version");
    }
    const auto& run = j.at("run");
    t.problem_id = run.at("problem_id").get<std::string>();
    t.method = run.at("method").get<std::string>();
    t.seed = run.at("seed").get<std::uint64_t>();
    t.config = run.at("config");
    for (const auto& n : j.at("nodes")) {
      TraceNode tn;
      tn.id = n.at("id").get<NodeId>();
      tn.parent = n.at("parent").get<NodeId>();
      tn.depth = n.at("depth").get<std::size_t>();
      tn.step = get_opt<std::string>(n, "step");
      tn.tokens = n.at("tokens").get<std::int64_t>();
      tn.logprob = get_opt<double>(n, "logprob");
      tn.score = n.at("score").get<double>();
      tn.status = parse_status(n.at("status").get<std::string>());
      tn.answer = get_opt<std::string>(n, "answer");
      t.nodes.push_back(std::move(tn));
    }
    for (const auto& h : j.at("hyper_nodes")) {
      TraceHyperNode th;
      th.hyper_id = h.at("hyper_id").get<std::int64_t>();
      th.batch = h.at("batch").get<std::int64_t>();
      th.constituents = h.at("constituents").get<std::vector<NodeId>>();
      th.scores = h.at("scores").get<std::vector<double>>();
      th.f = h.at("f").get<std::string>();
      th.v_bar = h.at("v_bar").get<double>();
      th.absorbed_into = get_opt<std::int64_t>(h, "absorbed_into");
      t.hyper_nodes.push_back(std::move(th));
    }
    for (const auto& s : j.at("selections")) {
      TraceSelection ts;
      ts.iteration = s.at("iteration").get<std::int64_t>();
      ts.hyper_id = s.at("hyper_id").get<std::int64_t>();
      ts.action = s.at("action").get<std::string>();
      ts.budget = s.at("budget").get<std::int64_t>();
      ts.expanded_from = s.at("expanded_from").get<std::vector<NodeId>>();
      ts.children = s.at("children").get<std::vector<NodeId>>();
      ts.new_hyper_nodes = s.at("new_hyper_nodes").get<std::vector<std::int64_t>>();
      t.selections.push_back(std::move(ts));
    }
    for (const auto& r : j.at("rollouts")) {
      TraceRollout tr;
      tr.from = r.at("from").get<NodeId>();
      tr.purpose = r.at("purpose").get<std::string>();
      for (const auto& s : r.at("steps")) {
        tr.steps.push_back({s.at("text").get<std::string>(), s.at("tokens").get<std::int64_t>()});
      }
      tr.terminal = r.at("terminal").get<bool>();
      tr.answer = get_opt<std::string>(r, "answer");
      tr.value = r.at("value").get<double>();
      t.rollouts.push_back(std::move(tr));
    }
    for (const auto& m : j.at("mcts")) {
      t.mcts.push_back({m.at("hyper_id").get<std::int64_t>(), m.at("visits").get<std::int64_t>(),
                        m.at("total_value").get<double>(), m.at("mean_value").get<double>()});
    }
    const auto& res = j.at("result");
    t.result.answer = get_opt<std::string>(res, "answer");
    t.result.chosen_node = get_opt<NodeId>(res, "chosen_node");
    t.result.chosen_rollout = get_opt<std::int64_t>(res, "chosen_rollout");
    t.result.outcome = res.at("outcome").get<std::string>();
    t.result.error = get_opt<std::string>(res, "error");
    t.result.tokens = res.at("tokens").get<std::int64_t>();
    t.result.expansions = res.at("expansions").get<std::int64_t>();
    for (const auto& term : res.at("terminals")) {
      t.result.terminals.push_back(
          {term.at("node").get<NodeId>(), term.at("score").get<double>(), term.at("answer").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedResponse, std::string("trace does not match schema: ") + e.what());
  }
  return t;
}

std::int64_t SearchTrace::resum_tokens() const {
  std::int64_t total = 0;
  for (const auto& n : nodes) total += n.tokens;
  for (const auto& r : rollouts) {
    for (const auto& s : r.steps) total += s.tokens;
  }
  return total;
}

}  // namespace arbor
