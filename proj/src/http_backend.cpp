#include "arbor/http_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include <httplib.h>

namespace arbor {

using nlohmann::json;

void HttpBackendConfig::validate() const {
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    throw Error(ErrorKind::InvalidArgument, "base_url must start with http:// or https://");
  }
  if (!(timeout_seconds > 0.0)) throw Error(ErrorKind::InvalidArgument, "http timeout must be > 0");
  if (max_retries < 0) throw Error(ErrorKind::InvalidArgument, "http retries must be >= 0");
  if (backoff_ms < 0) throw Error(ErrorKind::InvalidArgument, "http backoff must be >= 0");
  if (max_tokens < 1) throw Error(ErrorKind::InvalidArgument, "http max_tokens must be >= 1");
  if (pool_size < 1) throw Error(ErrorKind::InvalidArgument, "http pool_size must be >= 1");
}

HttpBackendConfig HttpBackendConfig::from_json(const json& j) {
  HttpBackendConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.model = j.value("model", c.model);
  c.token_env = j.value("token_env", c.token_env);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
  c.temperature = j.value("temperature", c.temperature);
  c.top_p = j.value("top_p", c.top_p);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.pool_size = j.value("pool_size", c.pool_size);
  c.score_path = j.value("score_path", c.score_path);
  c.validate();
  return c;
}

class HttpClientPool {
 public:
  HttpClientPool(std::string origin, const HttpBackendConfig& config) : origin_(std::move(origin)), config_(config) {}

  struct Lease {
    HttpClientPool* pool;
    std::unique_ptr<httplib::Client> client;
    ~Lease() {
      if (client) pool->release(std::move(client));
    }
  };

  Lease acquire() {
    {
      std::lock_guard lock(mu_);
      if (!idle_.empty()) {
        auto c = std::move(idle_.back());
        idle_.pop_back();
        return {this, std::move(c)};
      }
    }
    auto c = std::make_unique<httplib::Client>(origin_);
    if (!c->is_valid()) throw Error(ErrorKind::InvalidArgument, "unsupported base_url '" + origin_ + "'");
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(config_.timeout_seconds));
    c->set_connection_timeout(timeout);
    c->set_read_timeout(timeout);
    c->set_write_timeout(timeout);
    c->set_keep_alive(true);
    return {this, std::move(c)};
  }

 private:
  void release(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(mu_);
    if (idle_.size() < static_cast<std::size_t>(config_.pool_size)) idle_.push_back(std::move(c));
  }

  std::string origin_;
  HttpBackendConfig config_;
  std::mutex mu_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
};

namespace {

// Splits scheme://host[:port][/prefix] into origin and prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "base_url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpTransport::HttpTransport(HttpBackendConfig config) : config_(std::move(config)) {
  config_.validate();
  auto [origin, prefix] = split_url(config_.base_url);
  prefix_ = std::move(prefix);
  pool_ = std::make_unique<HttpClientPool>(origin, config_);
}

HttpTransport::~HttpTransport() = default;

json HttpTransport::post(const std::string& path, const json& body) {
  httplib::Headers headers;
  if (!config_.token_env.empty()) {
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && config_.backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(config_.backoff_ms) << (attempt - 1)));
    }
    auto lease = pool_->acquire();
    auto res = lease.client->Post(prefix_ + path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      lease.client.reset();  // drop a possibly broken connection
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::MalformedResponse, "invalid JSON from " + path + ": " + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status) + " from " + path;
    if (!retryable(res->status)) break;
  }
  throw Error(ErrorKind::BackendUnavailable, last_error);
}

namespace {

std::string strip_step(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r' || text.back() == ' ')) text.pop_back();
  std::size_t i = 0;
  while (i < text.size() && (text[i] == ' ' || text[i] == '\n')) ++i;
  return text.substr(i);
}

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorKind::MalformedResponse, std::string("response is missing '") + key + "'");
  }
  return j.at(key);
}

}  // namespace

std::vector<Step> HttpPolicy::generate(const ReasoningState& state, int n, const SamplingParams& params,
                                       RngStream& rng) {
  const auto& cfg = http_->config();
  json body{{"model", cfg.model},
            {"prompt", state.text() + "\n"},
            {"n", n},
            {"temperature", params.temperature},
            {"top_p", params.top_p},
            {"max_tokens", cfg.max_tokens},
            {"stop", json::array({"\n"})},
            {"logprobs", 1},
            {"seed", rng.next_u64() >> 33}};
  const json res = http_->post("/v1/completions", body);
  const json& choices = require(res, "choices");
  if (!choices.is_array() || choices.size() != static_cast<std::size_t>(n)) {
    throw Error(ErrorKind::MalformedResponse, "expected " + std::to_string(n) + " choices");
  }
  std::vector<const json*> ordered;
  for (const auto& c : choices) ordered.push_back(&c);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const json* a, const json* b) { return a->value("index", 0) < b->value("index", 0); });

  // Usage fallback: completion tokens spread over choices, remainder first.
  std::int64_t usage_tokens = -1;
  if (res.contains("usage") && res["usage"].contains("completion_tokens")) {
    usage_tokens = res["usage"]["completion_tokens"].get<std::int64_t>();
  }
  std::vector<Step> steps;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const json& c = *ordered[i];
    Step s;
    s.text = strip_step(require(c, "text").get<std::string>());
    const json* lp = c.contains("logprobs") && c["logprobs"].is_object() ? &c["logprobs"] : nullptr;
    if (lp && lp->contains("token_logprobs") && (*lp)["token_logprobs"].is_array()) {
      const auto& toks = (*lp)["token_logprobs"];
      s.token_count = static_cast<std::int64_t>(toks.size());
      double sum = 0.0;
      for (const auto& t : toks) sum += t.is_number() ? t.get<double>() : 0.0;
      s.logprob = sum;
    } else if (usage_tokens >= 0) {
      const auto k = static_cast<std::int64_t>(n);
      s.token_count = usage_tokens / k + (static_cast<std::int64_t>(i) < usage_tokens % k ? 1 : 0);
    } else {
      throw Error(ErrorKind::MalformedResponse, "no token counts in completion response");
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

std::vector<double> HttpPolicy::score_continuation(const ReasoningState& state, std::span<const Step> steps) {
  const std::string prefix = state.text() + "\n";
  std::string prompt = prefix;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) prompt += "\n";
    prompt += steps[i].text;
  }
  json body{{"model", http_->config().model}, {"prompt", prompt}, {"max_tokens", 0}, {"echo", true}, {"logprobs", 1}};
  const json res = http_->post("/v1/completions", body);
  const json& choices = require(res, "choices");
  if (!choices.is_array() || choices.empty()) throw Error(ErrorKind::MalformedResponse, "no choices");
  const json& c = choices.front();
  if (!c.contains("logprobs") || !c["logprobs"].is_object()) {
    throw Error(ErrorKind::LogprobsUnsupported, "server returned no logprobs for echoed prompt");
  }
  const json& lp = c["logprobs"];
  if (!lp.contains("token_logprobs") || !lp.contains("text_offset")) {
    throw Error(ErrorKind::LogprobsUnsupported, "echoed logprobs lack token_logprobs or text_offset");
  }
  const auto& values = lp["token_logprobs"];
  const auto& offsets = lp["text_offset"];
  if (values.size() != offsets.size()) throw Error(ErrorKind::MalformedResponse, "logprob/offset length mismatch");
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (offsets[i].get<std::size_t>() < prefix.size()) continue;
    if (!values[i].is_number()) throw Error(ErrorKind::LogprobsUnsupported, "null logprob inside continuation");
    out.push_back(values[i].get<double>());
  }
  if (out.empty()) throw Error(ErrorKind::MalformedResponse, "continuation has no scored tokens");
  return out;
}

std::vector<double> HttpEmbedder::embed(std::string_view text) {
  json body{{"model", http_->config().model}, {"input", std::string(text)}};
  const json res = http_->post("/v1/embeddings", body);
  const json& data = require(res, "data");
  if (!data.is_array() || data.empty()) throw Error(ErrorKind::MalformedResponse, "embedding response has no data");
  auto v = require(data.front(), "embedding").get<std::vector<double>>();
  if (v.empty()) throw Error(ErrorKind::MalformedResponse, "empty embedding");
  {
    std::lock_guard lock(mu_);
    if (dimension_ == 0) dimension_ = v.size();
    if (v.size() != dimension_) {
      throw Error(ErrorKind::DimensionMismatch, "embedding dimension changed from " + std::to_string(dimension_) +
                                                    " to " + std::to_string(v.size()));
    }
  }
  normalize(v);
  return v;
}

std::size_t HttpEmbedder::dimension() const {
  {
    std::lock_guard lock(mu_);
    if (dimension_ != 0) return dimension_;
  }
  return const_cast<HttpEmbedder*>(this)->embed("dimension probe").size();
}

double HttpVerifier::score(const ReasoningState& state) {
  json body{{"model", http_->config().model}, {"input", json::array({state.text()})}};
  const json res = http_->post(http_->config().score_path, body);
  const json& data = require(res, "data");
  if (!data.is_array() || data.empty()) throw Error(ErrorKind::MalformedResponse, "score response has no data");
  const json& s = require(data.front(), "score");
  if (!s.is_number()) throw Error(ErrorKind::MalformedResponse, "score is not a number");
  return s.get<double>();
}

std::string HttpCompleter::complete(const std::string& prompt) {
  json body{{"model", http_->config().model}, {"prompt", prompt}, {"max_tokens", max_tokens_}, {"temperature", 0.0}};
  const json res = http_->post("/v1/completions", body);
  const json& choices = require(res, "choices");
  if (!choices.is_array() || choices.empty()) throw Error(ErrorKind::MalformedResponse, "no choices");
  return require(choices.front(), "text").get<std::string>();
}

}  // namespace arbor
