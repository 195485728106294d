#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "arbor/http_backend.hpp"
#include "arbor/search.hpp"
#include "helpers.hpp"

using namespace arbor;
using nlohmann::json;

namespace {

// Local OpenAI-style stub. Handlers are swapped per test.
class StubServer {
 public:
  StubServer() {
    server_.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      requests.push_back({req.path, json::parse(req.body), req.get_header_value("Authorization")});
      auto it = routes.find(req.path);
      if (it == routes.end()) {
        res.status = 404;
        return;
      }
      it->second(requests.back().body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  HttpBackendConfig config(const std::string& prefix = "") const {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port_) + prefix;
    c.model = "stub";
    c.backoff_ms = 1;
    c.max_retries = 2;
    c.timeout_seconds = 5;
    c.token_env = "ARBOR_TEST_TOKEN";
    return c;
  }

  struct Seen {
    std::string path;
    json body;
    std::string auth;
  };
  std::vector<Seen> requests;
  std::map<std::string, std::function<void(const json&, httplib::Response&)>> routes;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
};

void reply(httplib::Response& res, const json& j) { res.set_content(j.dump(), "application/json"); }

}  // namespace

TEST_SUITE("http") {
  TEST_CASE("completions become steps with token counts") {
    StubServer s;
    s.routes["/v1/completions"] = [](const json& req, httplib::Response& res) {
      json choices = json::array();
      const int n = req["n"];
      for (int i = n - 1; i >= 0; --i) {
        choices.push_back({{"index", i},
                           {"text", " step " + std::to_string(i) + "\n"},
                           {"logprobs", {{"token_logprobs", json::array({-0.5, -0.25, -0.25})}}}});
      }
      reply(res, {{"choices", choices}});
    };
    auto http = std::make_shared<HttpTransport>(s.config());
    HttpPolicy policy(http);
    RngStream rng(0, 0);
    auto steps = policy.generate(testing::state_of({"first"}), 3, {0.7, 0.9}, rng);
    REQUIRE(steps.size() == 3);
    CHECK(steps[0].text == "step 0");
    CHECK(steps[2].text == "step 2");
    CHECK(steps[1].token_count == 3);
    CHECK(*steps[1].logprob == doctest::Approx(-1.0));
    const auto& body = s.requests.at(0).body;
    CHECK(body["n"] == 3);
    CHECK(body["temperature"] == 0.7);
    CHECK(body["top_p"] == 0.9);
    CHECK(body["stop"] == json::array({"\n"}));
    CHECK(body["model"] == "stub");
    CHECK(body["prompt"].get<std::string>().find("first") != std::string::npos);
    CHECK(body.contains("seed"));
  }

  TEST_CASE("usage fallback spreads tokens with the remainder first") {
    StubServer s;
    s.routes["/v1/completions"] = [](const json&, httplib::Response& res) {
      reply(res, {{"choices", json::array({{{"index", 0}, {"text", "a"}}, {{"index", 1}, {"text", "b"}}})},
                  {"usage", {{"completion_tokens", 7}}}});
    };
    HttpPolicy policy(std::make_shared<HttpTransport>(s.config()));
    RngStream rng(0, 0);
    auto steps = policy.generate(testing::state_of({}), 2, {1.0, 1.0}, rng);
    CHECK(steps[0].token_count == 4);
    CHECK(steps[1].token_count == 3);
  }

  TEST_CASE("echo scoring keeps continuation tokens only") {
    StubServer s;
    s.routes["/v1/completions"] = [](const json& req, httplib::Response& res) {
      const std::string prompt = req["prompt"];
      CHECK(req["echo"] == true);
      CHECK(req["max_tokens"] == 0);
      // one token per character, logprob -0.01 * offset
      json lp = json::array(), off = json::array();
      for (std::size_t i = 0; i < prompt.size(); i += 4) {
        lp.push_back(i == 0 ? json(nullptr) : json(-0.01));
        off.push_back(i);
      }
      reply(res, {{"choices", json::array({{{"text", prompt},
                                              {"logprobs", {{"token_logprobs", lp}, {"text_offset", off}}}}})}});
    };
    HttpPolicy policy(std::make_shared<HttpTransport>(s.config()));
    const auto st = testing::state_of({"abc"}, "p", "Q?");
    const std::string prefix = st.text() + "\n";
    std::vector<Step> cont{Step{"xyz12345", 2, std::nullopt}};
    auto lps = policy.score_continuation(st, cont);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < (prefix + "xyz12345").size(); i += 4)
      if (i >= prefix.size()) ++expected;
    CHECK(lps.size() == expected);
    for (double v : lps) CHECK(v == -0.01);
  }

  TEST_CASE("missing logprobs are reported as unsupported") {
    StubServer s;
    s.routes["/v1/completions"] = [](const json&, httplib::Response& res) {
      reply(res, {{"choices", json::array({{{"text", "x"}, {"logprobs", nullptr}}})}});
    };
    HttpPolicy policy(std::make_shared<HttpTransport>(s.config()));
    std::vector<Step> cont{Step{"x", 1, std::nullopt}};
    try {
      policy.score_continuation(testing::state_of({}), cont);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::LogprobsUnsupported);
    }
  }

  TEST_CASE("embeddings are normalized and dimension-checked") {
    StubServer s;
    std::atomic<int> calls{0};
    s.routes["/v1/embeddings"] = [&](const json& req, httplib::Response& res) {
      CHECK(req["input"].is_string());
      const int k = calls++;
      reply(res, {{"data", json::array({{{"embedding", k < 2 ? json::array({3.0, 4.0}) : json::array({1.0})}}})}});
    };
    HttpEmbedder emb(std::make_shared<HttpTransport>(s.config()));
    CHECK(emb.dimension() == 2);
    auto v = emb.embed("hello");
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    try {
      emb.embed("again");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DimensionMismatch);
    }
  }

  TEST_CASE("verifier score endpoint") {
    StubServer s;
    s.routes["/api/v1/score"] = [](const json& req, httplib::Response& res) {
      CHECK(req["input"].is_array());
      reply(res, {{"data", json::array({{{"score", 0.625}}})}});
    };
    HttpVerifier v(std::make_shared<HttpTransport>(s.config("/api")));
    CHECK(v.score(testing::state_of({"a"})) == 0.625);
  }

  TEST_CASE("retries on 500 and 429, then succeeds") {
    StubServer s;
    std::atomic<int> calls{0};
    s.routes["/v1/score"] = [&](const json&, httplib::Response& res) {
      const int k = calls++;
      if (k == 0) {
        res.status = 500;
        return;
      }
      if (k == 1) {
        res.status = 429;
        return;
      }
      reply(res, {{"data", json::array({{{"score", 0.5}}})}});
    };
    HttpVerifier v(std::make_shared<HttpTransport>(s.config()));
    CHECK(v.score(testing::state_of({"a"})) == 0.5);
    CHECK(calls == 3);
  }

  TEST_CASE("exhausted retries and client errors surface as unavailable") {
    StubServer s;
    std::atomic<int> calls{0};
    s.routes["/v1/score"] = [&](const json&, httplib::Response& res) {
      ++calls;
      res.status = 503;
    };
    s.routes["/v1/embeddings"] = [&](const json&, httplib::Response& res) {
      ++calls;
      res.status = 400;
    };
    auto http = std::make_shared<HttpTransport>(s.config());
    HttpVerifier v(http);
    try {
      v.score(testing::state_of({"a"}));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BackendUnavailable);
    }
    CHECK(calls == 3);
    calls = 0;
    HttpEmbedder emb(http);
    CHECK_THROWS_AS(emb.embed("x"), Error);
    CHECK(calls == 1);
  }

  TEST_CASE("unreachable server") {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:1";
    c.max_retries = 1;
    c.backoff_ms = 0;
    c.timeout_seconds = 2;
    HttpVerifier v(std::make_shared<HttpTransport>(c));
    try {
      v.score(testing::state_of({"a"}));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::BackendUnavailable);
    }
  }

  TEST_CASE("bearer token from the configured variable") {
    StubServer s;
    s.routes["/v1/score"] = [](const json&, httplib::Response& res) {
      reply(res, {{"data", json::array({{{"score", 0.1}}})}});
    };
    HttpVerifier v(std::make_shared<HttpTransport>(s.config()));
    ::unsetenv("ARBOR_TEST_TOKEN");
    v.score(testing::state_of({"a"}));
    ::setenv("ARBOR_TEST_TOKEN", "sekret", 1);
    v.score(testing::state_of({"a"}));
    ::unsetenv("ARBOR_TEST_TOKEN");
    REQUIRE(s.requests.size() == 2);
    CHECK(s.requests[0].auth.empty());
    CHECK(s.requests[1].auth == "Bearer sekret");
  }

  TEST_CASE("malformed responses") {
    StubServer s;
    s.routes["/v1/completions"] = [](const json& req, httplib::Response& res) {
      if (req.contains("n")) {
        reply(res, {{"choices", json::array({{{"text", "only one"}, {"logprobs", {{"token_logprobs", {-1}}}}}})}});
      } else {
        res.set_content("{not json", "application/json");
      }
    };
    s.routes["/v1/score"] = [](const json&, httplib::Response& res) { reply(res, {{"data", json::array()}}); };
    auto http = std::make_shared<HttpTransport>(s.config());
    HttpPolicy policy(http);
    RngStream rng(0, 0);
    auto kind = [](auto fn) {
      try {
        fn();
      } catch (const Error& e) {
        return e.kind();
      }
      return ErrorKind::Io;
    };
    CHECK(kind([&] { policy.generate(testing::state_of({}), 2, {1.0, 1.0}, rng); }) ==
          ErrorKind::MalformedResponse);
    HttpCompleter judge(http);
    CHECK(kind([&] { judge.complete("hi"); }) == ErrorKind::MalformedResponse);
    HttpVerifier v(http);
    CHECK(kind([&] { v.score(testing::state_of({})); }) == ErrorKind::MalformedResponse);
  }

  TEST_CASE("config validation") {
    HttpBackendConfig c;
    c.base_url = "ftp://x";
    CHECK_THROWS_AS(c.validate(), Error);
    auto j = HttpBackendConfig::from_json({{"base_url", "http://h:1/p"}, {"model", "m"}, {"max_retries", 0}});
    CHECK(j.model == "m");
    CHECK(j.max_retries == 0);
    CHECK(j.score_path == "/v1/score");
  }

  TEST_CASE("bfs end to end over the stub") {
    StubServer s;
    s.routes["/v1/completions"] = [](const json& req, httplib::Response& res) {
      const std::string prompt = req["prompt"];
      const bool done = prompt.find("Step two") != std::string::npos;
      const bool one = prompt.find("Step one") != std::string::npos;
      const std::string text = done ? "The answer is 4." : one ? "Step two." : "Step one.";
      json choices = json::array();
      for (int i = 0; i < req["n"].get<int>(); ++i)
        choices.push_back({{"index", i}, {"text", text}, {"logprobs", {{"token_logprobs", {-0.1, -0.1}}}}});
      reply(res, {{"choices", choices}});
    };
    s.routes["/v1/score"] = [](const json&, httplib::Response& res) {
      reply(res, {{"data", json::array({{{"score", 0.7}}})}});
    };
    auto http = std::make_shared<HttpTransport>(s.config());
    HttpPolicy policy(http);
    HttpVerifier verifier(http);
    SearchConfig cfg;
    cfg.expansion_size = 1;
    auto r = bfs_search({"h1", "What is 2+2?", "4"}, cfg, {policy, verifier, nullptr});
    CHECK(r.answer == std::optional<std::string>("4"));
    CHECK(r.tokens == 6);
  }
}
