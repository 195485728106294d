#pragma once
// Backends for OpenAI-compatible services: completions (policy, judge),
// embeddings, and a JSON scoring endpoint for verifiers.

#include <memory>
#include <mutex>
#include <string>

#include <json.hpp>

#include "arbor/backends.hpp"

namespace arbor {

struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8000";  // path prefix allowed
  std::string model;
  std::string token_env = "ARBOR_API_KEY";  // unset or empty variable -> no auth header
  double timeout_seconds = 60.0;
  int max_retries = 3;
  int backoff_ms = 250;  // doubled per retry
  double temperature = 0.8;
  double top_p = 1.0;
  int max_tokens = 256;  // per generated step
  int pool_size = 4;
  // Verifier endpoint. Request {"model", "input": [texts]}, response
  // {"data": [{"score": x}, ...]}.
  std::string score_path = "/v1/score";

  void validate() const;
  static HttpBackendConfig from_json(const nlohmann::json& j);
};

class HttpClientPool;

// Shared transport: pooled connections, retries with exponential backoff on
// transport errors, 429 and 5xx.
class HttpTransport {
 public:
  explicit HttpTransport(HttpBackendConfig config);
  ~HttpTransport();
  HttpTransport(const HttpTransport&) = delete;
  HttpTransport& operator=(const HttpTransport&) = delete;

  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  const HttpBackendConfig& config() const { return config_; }

 private:
  HttpBackendConfig config_;
  std::string prefix_;
  std::unique_ptr<HttpClientPool> pool_;
};

class HttpPolicy final : public Policy {
 public:
  explicit HttpPolicy(std::shared_ptr<HttpTransport> transport) : http_(std::move(transport)) {}

  // One completion per step: prompt = state text plus newline, stop at "\n".
  // Token counts come from the returned logprob tokens, else from usage.
  std::vector<Step> generate(const ReasoningState& state, int n, const SamplingParams& params,
                             RngStream& rng) override;
  // Echoed prompt scoring; LogprobsUnsupported when the server omits them.
  std::vector<double> score_continuation(const ReasoningState& state, std::span<const Step> steps) override;
  std::string identity() const override { return "http-policy:" + http_->config().model; }

 private:
  std::shared_ptr<HttpTransport> http_;
};

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(std::shared_ptr<HttpTransport> transport) : http_(std::move(transport)) {}

  std::vector<double> embed(std::string_view text) override;
  // Known after the first call; probes the service otherwise.
  std::size_t dimension() const override;
  std::string identity() const override { return "http-embedder:" + http_->config().model; }

 private:
  std::shared_ptr<HttpTransport> http_;
  mutable std::mutex mu_;
  mutable std::size_t dimension_ = 0;
};

class HttpVerifier final : public Verifier {
 public:
  explicit HttpVerifier(std::shared_ptr<HttpTransport> transport) : http_(std::move(transport)) {}
  double score(const ReasoningState& state) override;
  std::string identity() const override { return "http-verifier:" + http_->config().model; }

 private:
  std::shared_ptr<HttpTransport> http_;
};

class HttpCompleter final : public TextCompleter {
 public:
  explicit HttpCompleter(std::shared_ptr<HttpTransport> transport, int max_tokens = 16)
      : http_(std::move(transport)), max_tokens_(max_tokens) {}
  std::string complete(const std::string& prompt) override;

 private:
  std::shared_ptr<HttpTransport> http_;
  int max_tokens_;
};

}  // namespace arbor
