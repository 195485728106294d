#include "arbor/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "arbor/valuation.hpp"

namespace arbor {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::InvalidArgument, "'" + key + "' expects a boolean, got '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(v, &used);
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
      out = std::stoull(v, &used);
    } else {
      out = static_cast<T>(std::stoll(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::InvalidArgument, "'" + key + "' expects a number, got '" + v + "'");
  }
}

std::string fixed(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

bool is_correct(const ReasoningState& state, const Problem& problem, std::string_view marker) {
  if (!problem.reference_answer || !state.terminal()) return false;
  return answers_match(extract_answer(state, marker), *problem.reference_answer);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string trace_file_name(const std::string& id) {
  std::string safe;
  for (char c : id) safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  if (safe != id || safe.empty() || safe[0] == '.') {
    char buf[24];
    std::snprintf(buf, sizeof buf, "-%08llx", static_cast<unsigned long long>(fnv1a64(id) & 0xffffffffULL));
    safe += buf;
  }
  return safe + ".json";
}

ReasoningState root_of(const Problem& p) { return ReasoningState(p.id, p.question); }

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") dataset = value;
  else if (key == "spec") spec = value;
  else if (key == "backend") backend = value;
  else if (key == "verifier") verifier = value;
  else if (key == "sigma") sigma = parse_number<double>(key, value);
  else if (key == "per_problem_sigma") per_problem_sigma = parse_bool(key, value);
  else if (key == "verifier_seed") verifier_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "embedder") embedder = value;
  else if (key == "workers") workers = parse_number<int>(key, value);
  else if (key == "output") output = value;
  else if (key == "difficulty") difficulty = value;
  else if (key == "difficulty_rollouts") difficulty_rollouts = parse_number<int>(key, value);
  else if (key == "paired_with") paired_with = value;
  else if (key == "http.base_url") http.base_url = value;
  else if (key == "http.model") http.model = value;
  else if (key == "http.embed_model") http_embed_model = value;
  else if (key == "http.verifier_model") http_verifier_model = value;
  else if (key == "http.token_env") http.token_env = value;
  else if (key == "http.timeout_seconds") http.timeout_seconds = parse_number<double>(key, value);
  else if (key == "http.max_retries") http.max_retries = parse_number<int>(key, value);
  else if (key == "http.backoff_ms") http.backoff_ms = parse_number<int>(key, value);
  else if (key == "http.max_tokens") http.max_tokens = parse_number<int>(key, value);
  else if (key == "http.pool_size") http.pool_size = parse_number<int>(key, value);
  else if (key == "http.score_path") http.score_path = value;
  else {
    // SearchConfig keys, typed by their defaults.
    json j = json::parse(search.to_json().dump());
    if (!j.contains(key)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
    auto& slot = j[key];
    if (slot.is_boolean()) slot = parse_bool(key, value);
    else if (slot.is_number_unsigned()) slot = parse_number<std::uint64_t>(key, value);
    else if (slot.is_number_integer()) slot = parse_number<std::int64_t>(key, value);
    else if (slot.is_number_float()) slot = parse_number<double>(key, value);
    else slot = value;
    search = SearchConfig::from_json(j);
    if (key == "temperature") http.temperature = search.temperature;
    if (key == "top_p") http.top_p = search.top_p;
  }
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidArgument, "config line " + std::to_string(lineno) + " has no '='");
    }
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) { return parse(read_file(path)); }

void RunConfig::validate() const {
  auto must_exist = [](const std::string& what, const std::string& p) {
    if (!fs::exists(p)) throw Error(ErrorKind::Io, what + " not found: " + p);
  };
  if (workers < 1) throw Error(ErrorKind::InvalidArgument, "workers must be >= 1");
  if (backend != "synthetic" && backend != "http") throw Error(ErrorKind::InvalidArgument, "backend must be synthetic or http");
  if (verifier != "oracle" && verifier != "noisy" && verifier != "http") {
    throw Error(ErrorKind::InvalidArgument, "verifier must be oracle, noisy or http");
  }
  if (embedder != "exact_alias" && embedder != "hashed" && embedder != "http") {
    throw Error(ErrorKind::InvalidArgument, "embedder must be exact_alias, hashed or http");
  }
  const bool needs_spec = backend == "synthetic" || verifier != "http" || embedder == "exact_alias";
  if (needs_spec && spec.empty()) throw Error(ErrorKind::InvalidArgument, "synthetic components need 'spec'");
  if (!spec.empty()) must_exist("spec", spec);
  if (!dataset.empty()) must_exist("dataset", dataset);
  if (spec.empty() && dataset.empty()) throw Error(ErrorKind::InvalidArgument, "config needs 'dataset' or 'spec'");
  if (!difficulty.empty() && difficulty != "auto") must_exist("difficulty index", difficulty);
  if (!paired_with.empty()) must_exist("paired report", paired_with);
  if (difficulty_rollouts < 1) throw Error(ErrorKind::InvalidArgument, "difficulty_rollouts must be >= 1");
  if (sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  if (backend == "http" || verifier == "http" || embedder == "http") http.validate();
  search.validate();
}

BackendBundle make_backends(const RunConfig& config) {
  config.validate();
  BackendBundle b;
  if (!config.spec.empty()) b.spec = std::make_shared<const SyntheticTaskSpec>(SyntheticTaskSpec::load(config.spec));
  std::shared_ptr<HttpTransport> transport;
  auto http_for = [&](const std::string& model) {
    auto c = config.http;
    if (!model.empty()) c.model = model;
    return std::make_shared<HttpTransport>(c);
  };

  if (config.backend == "http") {
    transport = http_for("");
    b.policy = std::make_shared<HttpPolicy>(transport);
    b.judge = std::make_shared<HttpCompleter>(transport);
  } else {
    b.policy = std::make_shared<SyntheticPolicy>(b.spec);
    b.judge = std::make_shared<SyntheticJudge>(b.spec);
  }

  const int k = config.search.ensemble_size;
  if (config.verifier == "http") {
    std::vector<std::string> models;
    std::stringstream ss(config.http_verifier_model);
    for (std::string m; std::getline(ss, m, ',');) models.push_back(trim(m));
    if (models.empty()) models.push_back(config.http.model);
    if (k != 1 && static_cast<int>(models.size()) != k) {
      throw Error(ErrorKind::InvalidArgument, "ensemble_size must match the number of http.verifier_model entries");
    }
    std::vector<std::shared_ptr<Verifier>> members;
    for (const auto& m : models) members.push_back(std::make_shared<HttpVerifier>(http_for(m)));
    b.verifier = members.size() == 1 ? members.front() : std::make_shared<EnsembleVerifier>(members);
  } else {
    const auto mode = config.verifier == "oracle" ? SyntheticVerifierMode::Oracle : SyntheticVerifierMode::Noisy;
    std::vector<std::shared_ptr<Verifier>> members;
    for (int i = 0; i < k; ++i) {
      members.push_back(std::make_shared<SyntheticVerifier>(b.spec, mode, config.sigma,
                                                            config.verifier_seed + static_cast<std::uint64_t>(i),
                                                            config.per_problem_sigma));
    }
    b.verifier = k == 1 ? members.front() : std::make_shared<EnsembleVerifier>(members);
  }

  if (config.embedder == "exact_alias") b.embedder = std::make_shared<ExactAliasEmbedder>(b.spec);
  else if (config.embedder == "hashed") b.embedder = std::make_shared<HashedNgramEmbedder>();
  else b.embedder = std::make_shared<HttpEmbedder>(http_for(config.http_embed_model));
  return b;
}

std::vector<Problem> load_problems(const RunConfig& config, const BackendBundle& backends) {
  if (!config.dataset.empty()) return load_dataset(config.dataset);
  if (!backends.spec) throw Error(ErrorKind::InvalidArgument, "no dataset and no synthetic spec");
  return backends.spec->dataset();
}

int difficulty_level(double failure_rate) {
  if (!(failure_rate >= 0.0 && failure_rate <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "failure rate must be in [0, 1]");
  }
  return 1 + static_cast<int>(std::floor(std::min(failure_rate, 0.999) * 4.0));
}

DifficultyIndex build_difficulty_index(std::span<const Problem> problems, Policy& policy, int rollouts,
                                       std::uint64_t seed, const SamplingParams& params, int max_depth,
                                       std::string_view marker, int workers) {
  if (rollouts < 1) throw Error(ErrorKind::InvalidArgument, "difficulty needs rollouts >= 1");
  for (const auto& p : problems) {
    if (!p.reference_answer) throw Error(ErrorKind::InvalidArgument, "problem '" + p.id + "' has no reference answer");
  }
  std::vector<DifficultyEntry> entries(problems.size());
  parallel_for(problems.size(), workers, [&](std::size_t i) {
    const auto& p = problems[i];
    RngStream rng(seed, fnv1a64("difficulty\x1f" + p.id));
    TokenMeter meter;
    int wrong = 0;
    for (int r = 0; r < rollouts; ++r) {
      auto res = rollout(policy, root_of(p), params, rng, max_depth, marker, meter);
      if (!is_correct(res.state, p, marker)) ++wrong;
    }
    const double rate = static_cast<double>(wrong) / rollouts;
    entries[i] = {rate, difficulty_level(rate)};
  });
  DifficultyIndex out;
  for (std::size_t i = 0; i < problems.size(); ++i) out[problems[i].id] = entries[i];
  return out;
}

void write_difficulty_csv(const std::string& path, const DifficultyIndex& index) {
  std::string out = "id,failure_rate,level\n";
  for (const auto& [id, e] : index) out += csv_field(id) + "," + fixed(e.failure_rate) + "," + std::to_string(e.level) + "\n";
  write_file(path, out);
}

DifficultyIndex read_difficulty_csv(const std::string& path) {
  auto rows = parse_csv(read_file(path));
  if (rows.empty() || rows[0] != std::vector<std::string>{"id", "failure_rate", "level"}) {
    throw Error(ErrorKind::MalformedResponse, "difficulty CSV needs header id,failure_rate,level");
  }
  DifficultyIndex out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 3) throw Error(ErrorKind::MalformedResponse, "difficulty CSV row " + std::to_string(r));
    const double rate = parse_number<double>("failure_rate", rows[r][1]);
    const int level = parse_number<int>("level", rows[r][2]);
    if (level != difficulty_level(rate)) throw Error(ErrorKind::MalformedResponse, "level disagrees with rate for " + rows[r][0]);
    out[rows[r][0]] = {rate, level};
  }
  return out;
}

void RunReport::summarize() {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::size_t correct = 0;
  double tokens = 0.0;
  errors = 0;
  std::map<int, std::tuple<std::size_t, std::size_t, double>> by_level;
  for (const auto& r : rows) {
    correct += r.correct;
    tokens += static_cast<double>(r.tokens);
    errors += r.outcome == "error";
    auto& [n, c, t] = by_level[r.level];
    ++n;
    c += r.correct;
    t += static_cast<double>(r.tokens);
  }
  const double n = static_cast<double>(rows.size());
  accuracy = rows.empty() ? 0.0 : static_cast<double>(correct) / n;
  mean_tokens_k = rows.empty() ? 0.0 : tokens / n / 1000.0;
  levels.clear();
  for (const auto& [level, v] : by_level) {
    if (level == 0) continue;
    const auto& [ln, lc, lt] = v;
    levels.push_back({level, ln, static_cast<double>(lc) / static_cast<double>(ln),
                      lt / static_cast<double>(ln) / 1000.0});
  }
}

std::string RunReport::csv() const {
  const bool ratio = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.token_ratio.has_value(); });
  std::string out = "id,predicted,correct,tokens,level,outcome,expansions,trace";
  out += ratio ? ",token_ratio\n" : "\n";
  for (const auto& r : rows) {
    out += csv_field(r.id) + "," + csv_field(r.predicted.value_or("")) + "," + (r.correct ? "1" : "0") + "," +
           std::to_string(r.tokens) + "," + std::to_string(r.level) + "," + r.outcome + "," +
           std::to_string(r.expansions) + "," + csv_field(r.trace);
    if (ratio) out += "," + (r.token_ratio ? fixed(*r.token_ratio) : std::string());
    out += "\n";
  }
  return out;
}

std::string RunReport::summary_json() const {
  ordered_json j;
  j["method"] = method;
  j["config_hash"] = config_hash;
  j["problems"] = rows.size();
  j["accuracy"] = accuracy;
  j["mean_tokens_k"] = mean_tokens_k;
  j["errors"] = errors;
  ordered_json lv = ordered_json::array();
  for (const auto& l : levels) {
    lv.push_back({{"level", l.level}, {"problems", l.problems}, {"accuracy", l.accuracy}, {"mean_tokens_k", l.mean_tokens_k}});
  }
  j["levels"] = std::move(lv);
  return j.dump(2) + "\n";
}

RunReport read_report_csv(const std::string& path) {
  auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw Error(ErrorKind::MalformedResponse, "empty report " + path);
  const auto& header = rows[0];
  auto col = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  for (const char* required : {"id", "predicted", "correct", "tokens", "level", "outcome", "expansions", "trace"}) {
    if (!col(required)) throw Error(ErrorKind::MalformedResponse, std::string("report lacks column ") + required);
  }
  const auto ratio = col("token_ratio");
  RunReport rep;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != header.size()) throw Error(ErrorKind::MalformedResponse, "report row " + std::to_string(r) + " width");
    ReportRow row;
    row.id = f[*col("id")];
    if (!f[*col("predicted")].empty()) row.predicted = f[*col("predicted")];
    row.correct = f[*col("correct")] == "1";
    row.tokens = parse_number<std::int64_t>("tokens", f[*col("tokens")]);
    row.level = parse_number<int>("level", f[*col("level")]);
    row.outcome = f[*col("outcome")];
    row.expansions = parse_number<std::int64_t>("expansions", f[*col("expansions")]);
    row.trace = f[*col("trace")];
    if (ratio && !f[*ratio].empty()) row.token_ratio = parse_number<double>("token_ratio", f[*ratio]);
    rep.rows.push_back(std::move(row));
  }
  rep.summarize();
  return rep;
}

RunReport build_report(std::span<const SearchTrace> traces, std::span<const Problem> problems,
                       const DifficultyIndex& difficulty, const RunReport* baseline) {
  std::map<std::string, const Problem*> by_id;
  for (const auto& p : problems) by_id[p.id] = &p;
  std::map<std::string, std::int64_t> base_tokens;
  if (baseline) {
    for (const auto& r : baseline->rows) base_tokens[r.id] = r.tokens;
  }
  RunReport rep;
  for (const auto& t : traces) {
    auto it = by_id.find(t.problem_id);
    if (it == by_id.end()) throw Error(ErrorKind::DatasetMismatch, "trace for unknown problem '" + t.problem_id + "'");
    const Problem& p = *it->second;
    ReportRow row;
    row.id = p.id;
    row.predicted = t.result.answer;
    row.correct = p.reference_answer && t.result.answer && answers_match(*t.result.answer, *p.reference_answer);
    row.tokens = t.result.tokens;
    if (auto d = difficulty.find(p.id); d != difficulty.end()) row.level = d->second.level;
    row.outcome = t.result.outcome;
    row.expansions = t.result.expansions;
    row.trace = "traces/" + trace_file_name(p.id);
    if (auto b = base_tokens.find(p.id); b != base_tokens.end() && b->second > 0) {
      row.token_ratio = static_cast<double>(row.tokens) / static_cast<double>(b->second);
    }
    rep.rows.push_back(std::move(row));
    if (rep.method.empty()) {
      rep.method = t.method;
      rep.config_hash = config_hash(t.config);
    }
  }
  rep.summarize();
  return rep;
}

RunOutcome run_experiment(const RunConfig& config) {
  auto backends = make_backends(config);
  auto problems = load_problems(config, backends);
  DifficultyIndex difficulty;
  if (config.difficulty == "auto") {
    difficulty = build_difficulty_index(problems, *backends.policy, config.difficulty_rollouts, config.search.seed,
                                        {config.search.temperature, config.search.top_p}, config.search.max_depth,
                                        config.search.marker, config.workers);
    write_difficulty_csv((fs::path(config.output) / "difficulty.csv").string(), difficulty);
  } else if (!config.difficulty.empty()) {
    difficulty = read_difficulty_csv(config.difficulty);
  }
  return run_experiment(config, backends, problems, difficulty);
}

RunOutcome run_experiment(const RunConfig& config, const BackendBundle& backends, std::span<const Problem> problems,
                          const DifficultyIndex& difficulty) {
  if (config.workers < 1) throw Error(ErrorKind::InvalidArgument, "workers must be >= 1");
  config.search.validate();
  std::vector<const Problem*> ordered;
  std::set<std::string> ids;
  for (const auto& p : problems) {
    if (!ids.insert(p.id).second) throw Error(ErrorKind::InvalidArgument, "duplicate problem id '" + p.id + "'");
    ordered.push_back(&p);
  }
  std::sort(ordered.begin(), ordered.end(), [](auto a, auto b) { return a->id < b->id; });

  RunOutcome out;
  out.traces.resize(ordered.size());
  std::vector<double> wall(ordered.size());
  const auto view = backends.view();
  parallel_for(ordered.size(), config.workers, [&](std::size_t i) {
    const Problem& p = *ordered[i];
    const auto start = std::chrono::steady_clock::now();
    try {
      out.traces[i] = run_search(p, config.search, view).trace;
    } catch (const Error& e) {
      SearchTrace t;
      t.problem_id = p.id;
      t.method = std::string(to_string(config.search.method));
      t.seed = config.search.seed;
      t.config = config.search.to_json();
      t.result.outcome = "error";
      t.result.error = std::string(to_string(e.kind())) + ": " + e.what();
      out.traces[i] = std::move(t);
    }
    wall[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  });

  std::optional<RunReport> baseline;
  if (!config.paired_with.empty()) baseline = read_report_csv(config.paired_with);
  out.report = build_report(out.traces, problems, difficulty, baseline ? &*baseline : nullptr);

  const fs::path dir(config.output);
  fs::create_directories(dir / "traces");
  std::string timing = "id,wall_ms\n";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    write_file((dir / "traces" / trace_file_name(ordered[i]->id)).string(), out.traces[i].dump());
    out.wall_ms[ordered[i]->id] = wall[i];
    timing += csv_field(ordered[i]->id) + "," + fixed(wall[i], 3) + "\n";
  }
  write_file((dir / "report.csv").string(), out.report.csv());
  write_file((dir / "summary.json").string(), out.report.summary_json());
  write_file((dir / "timing.csv").string(), timing);
  return out;
}

RunReport rerender_report(const std::string& run_dir, std::span<const Problem> problems,
                          const DifficultyIndex& difficulty, const RunReport* baseline) {
  const fs::path dir(run_dir);
  std::vector<SearchTrace> traces;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir / "traces")) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      traces.push_back(SearchTrace::parse(read_file(f.string())));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::MalformedResponse, f.string() + ": " + e.what());
    }
  }
  auto rep = build_report(traces, problems, difficulty, baseline);
  write_file((dir / "report.csv").string(), rep.csv());
  write_file((dir / "summary.json").string(), rep.summary_json());
  return rep;
}

std::string Comparison::csv() const {
  std::string out = "# level problems tokens_a_k tokens_b_k delta_k token_ratio accuracy_a accuracy_b\n";
  out += "level,problems,tokens_a_k,tokens_b_k,delta_k,token_ratio,accuracy_a,accuracy_b\n";
  for (const auto& l : levels) {
    out += std::to_string(l.level) + "," + std::to_string(l.problems) + "," + fixed(l.tokens_a_k) + "," +
           fixed(l.tokens_b_k) + "," + fixed(l.delta_k) + "," + fixed(l.token_ratio) + "," + fixed(l.accuracy_a) +
           "," + fixed(l.accuracy_b) + "\n";
  }
  out += "# overall delta_accuracy=" + fixed(delta_accuracy) + " token_ratio=" + fixed(token_ratio) + "\n";
  for (const auto& n : notes) out += "# " + n + "\n";
  return out;
}

Comparison compare_runs(const RunReport& a, const RunReport& b) {
  std::map<std::string, const ReportRow*> rb;
  for (const auto& r : b.rows) rb[r.id] = &r;
  if (a.rows.size() != b.rows.size()) throw Error(ErrorKind::DatasetMismatch, "reports cover different problem counts");
  for (const auto& r : a.rows) {
    if (!rb.count(r.id)) throw Error(ErrorKind::DatasetMismatch, "problem '" + r.id + "' missing from second report");
  }
  auto ratio = [](double num, double den) {
    if (den == 0.0) return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return num / den;
  };
  Comparison c;
  double ta = 0.0, tb = 0.0;
  std::size_t ca = 0, cb = 0;
  std::map<int, LevelComparison> levels;
  std::size_t unknown = 0;
  for (const auto& r : a.rows) {
    const ReportRow& o = *rb.at(r.id);
    ta += static_cast<double>(r.tokens);
    tb += static_cast<double>(o.tokens);
    ca += r.correct;
    cb += o.correct;
    if (r.level < 1 || r.level > 4) {
      ++unknown;
      continue;
    }
    auto& l = levels[r.level];
    l.level = r.level;
    ++l.problems;
    l.tokens_a_k += static_cast<double>(r.tokens);
    l.tokens_b_k += static_cast<double>(o.tokens);
    l.accuracy_a += r.correct;
    l.accuracy_b += o.correct;
  }
  const double n = static_cast<double>(a.rows.size());
  c.accuracy_a = n > 0 ? static_cast<double>(ca) / n : 0.0;
  c.accuracy_b = n > 0 ? static_cast<double>(cb) / n : 0.0;
  c.delta_accuracy = c.accuracy_b - c.accuracy_a;
  c.token_ratio = ratio(tb, ta);
  for (int level = 1; level <= 4; ++level) {
    auto it = levels.find(level);
    if (it == levels.end()) {
      c.notes.push_back("level " + std::to_string(level) + ": no problems, row omitted");
      continue;
    }
    auto l = it->second;
    const double ln = static_cast<double>(l.problems);
    l.tokens_a_k /= ln * 1000.0;
    l.tokens_b_k /= ln * 1000.0;
    l.delta_k = l.tokens_b_k - l.tokens_a_k;
    l.token_ratio = ratio(l.tokens_b_k, l.tokens_a_k);
    l.accuracy_a /= ln;
    l.accuracy_b /= ln;
    c.levels.push_back(l);
  }
  if (unknown) c.notes.push_back(std::to_string(unknown) + " problems without a difficulty level");
  return c;
}

std::map<int, double> similarity_degree_curve(std::span<const Problem> problems, Policy& policy, Embedder& embedder,
                                              const ClusterConfig& cluster, std::span<const int> sizes, int draws,
                                              std::uint64_t seed, const SamplingParams& params, int max_depth,
                                              std::string_view marker) {
  if (problems.empty()) throw Error(ErrorKind::InvalidArgument, "no problems");
  if (draws < 1) throw Error(ErrorKind::InvalidArgument, "draws must be >= 1");
  for (int n : sizes) {
    if (n < 1) throw Error(ErrorKind::InvalidArgument, "batch sizes must be >= 1");
  }
  RngStream rng(seed, fnv1a64("similarity-degree"));
  TokenMeter meter;
  std::map<int, double> sums;
  for (int d = 0; d < draws; ++d) {
    const Problem& p = problems[rng.below(problems.size())];
    // A uniformly chosen non-terminal state along one sampled trajectory.
    auto traj = rollout(policy, root_of(p), params, rng, max_depth, marker, meter);
    std::vector<ReasoningState> candidates{root_of(p)};
    for (const auto& step : traj.appended) {
      auto next = candidates.back().extend(step, marker);
      if (next.terminal()) break;
      candidates.push_back(std::move(next));
    }
    const ReasoningState& state = candidates[rng.below(candidates.size())];
    for (int n : sizes) {
      auto steps = generate_steps(policy, state, n, params, rng, meter);
      std::vector<std::vector<double>> emb;
      for (const auto& s : steps) emb.push_back(embedder.embed(s.text));
      const auto partition = agglomerative_cluster(emb, cluster);
      sums[n] += similarity_degree(static_cast<std::size_t>(n), partition);
    }
  }
  for (auto& [n, s] : sums) s /= draws;
  return sums;
}

std::map<int, double> score_std_analysis(std::span<const Problem> problems, Policy& policy, Verifier& verifier,
                                         const DifficultyIndex& difficulty, int trajectories, int max_attempts,
                                         std::uint64_t seed, const SamplingParams& params, int max_depth,
                                         std::string_view marker) {
  if (trajectories < 2) throw Error(ErrorKind::InsufficientSamples, "score std needs at least 2 trajectories");
  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, int> levels;
  TokenMeter meter;
  for (const auto& p : problems) {
    auto d = difficulty.find(p.id);
    if (d == difficulty.end()) continue;
    RngStream rng(seed, fnv1a64("score-std\x1f" + p.id));
    std::vector<double> list;
    for (int a = 0; a < max_attempts && static_cast<int>(list.size()) < trajectories; ++a) {
      auto res = rollout(policy, root_of(p), params, rng, max_depth, marker, meter);
      if (is_correct(res.state, p, marker)) list.push_back(score_state(verifier, res.state));
    }
    if (list.size() < 2) continue;
    scores[p.id] = std::move(list);
    levels[p.id] = d->second.level;
  }
  return score_std_by_difficulty(scores, levels);
}

std::map<int, double> brier_analysis(std::span<const Problem> problems, Policy& policy, Verifier& verifier,
                                     int trajectories, std::uint64_t seed, const SamplingParams& params, int max_depth,
                                     std::string_view marker) {
  std::vector<BrierSample> samples;
  TokenMeter meter;
  for (const auto& p : problems) {
    if (!p.reference_answer) continue;
    RngStream rng(seed, fnv1a64("brier\x1f" + p.id));
    for (int t = 0; t < trajectories; ++t) {
      auto res = rollout(policy, root_of(p), params, rng, max_depth, marker, meter);
      const int outcome = is_correct(res.state, p, marker) ? 1 : 0;
      ReasoningState cur = root_of(p);
      for (std::size_t k = 0; k < res.appended.size(); ++k) {
        cur = cur.extend(res.appended[k], marker);
        samples.push_back({static_cast<int>(k + 1), score_state(verifier, cur), outcome});
      }
    }
  }
  return brier_by_step(samples);
}

}  // namespace arbor
