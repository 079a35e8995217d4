#include <doctest.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "disco/chat_provider.hpp"
#include "disco/errors.hpp"
#include "oracle.hpp"

using namespace disco;

namespace {

// Local chat-completions server that fails `failures` times with `status`
// before answering.
class FakeServer {
 public:
  FakeServer(int failures, int status) : failures_(failures), status_(status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      if (hits_++ < failures_) {
        res.status = status_;
        res.set_content("{}", "application/json");
        return;
      }
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"hello"}}]})",
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_; }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int failures_;
  int status_;
  std::atomic<int> hits_{0};
  std::string last_body_;
  std::string last_auth_;
};

HttpSettings fast(const std::string& endpoint) {
  HttpSettings s;
  s.endpoint = endpoint;
  s.backoff_initial_seconds = 0.001;
  s.timeout_seconds = 5.0;
  s.max_retries = 3;
  s.api_key = "k";
  return s;
}

const std::vector<ChatMessage> kMessages = {{"system", "s"}, {"user", "u"}};

}  // namespace

TEST_SUITE("chat_provider") {
  TEST_CASE("mock returns scripted responses in order") {
    MockProvider p({"a", "b"});
    CHECK(p.chat(kMessages) == "a");
    CHECK(p.chat(kMessages) == "b");
    CHECK(p.calls() == 2);
    CHECK_THROWS_AS(p.chat(kMessages), ProviderError);
  }

  TEST_CASE("mock scripts load from JSON lines") {
    const std::string path = "mock_script.jsonl";
    {
      std::ofstream out(path);
      out << "\"first\\nline\"\n\n{\"content\": \"second\"}\n";
    }
    MockProvider p = MockProvider::from_script(path);
    CHECK(p.remaining() == 2);
    CHECK(p.chat(kMessages) == "first\nline");
    CHECK(p.chat(kMessages) == "second");
    {
      std::ofstream out(path);
      out << "42\n";
    }
    CHECK_THROWS_AS(MockProvider::from_script(path), ConfigError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(MockProvider::from_script("does_not_exist.jsonl"), ConfigError);
  }

  TEST_CASE("request body") {
    HttpSettings s;
    s.model = "m";
    CHECK(chat_request_body(s, kMessages) ==
          R"({"model":"m","messages":[{"role":"system","content":"s"},{"role":"user","content":"u"}]})");
    s.temperature = 0.5;
    CHECK(chat_request_body(s, kMessages).find("\"temperature\":0.5") != std::string::npos);
  }

  TEST_CASE("rate limits are retried") {
    FakeServer server(2, 429);
    HttpProvider p(fast(server.endpoint()));
    CHECK(p.chat(kMessages) == "hello");
    CHECK(p.last_retries() == 2);
    CHECK(server.hits() == 3);
    CHECK(server.last_auth() == "Bearer k");
    CHECK(server.last_body().find("\"role\":\"user\"") != std::string::npos);
  }

  TEST_CASE("server errors exhaust the retry budget") {
    FakeServer server(100, 503);
    HttpProvider p(fast(server.endpoint()));
    try {
      p.chat(kMessages);
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(e.last_status() == 503);
      CHECK(e.retries() == 3);
    }
    CHECK(server.hits() == 4);
  }

  TEST_CASE("client errors are not retried") {
    FakeServer server(100, 400);
    HttpProvider p(fast(server.endpoint()));
    CHECK_THROWS_AS(p.chat(kMessages), ProviderError);
    CHECK(server.hits() == 1);
  }

  TEST_CASE("connection failures are retried then reported") {
    HttpSettings s = fast("http://127.0.0.1:1/v1");
    s.max_retries = 1;
    HttpProvider p(s);
    try {
      p.chat(kMessages);
      FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
      CHECK(e.retries() == 1);
      CHECK(e.last_status() == 0);
    }
  }

  TEST_CASE("endpoint validation") {
    CHECK_THROWS_AS(HttpProvider(fast("127.0.0.1:8000")), ConfigError);
    CHECK_THROWS_AS(HttpProvider(fast("ftp://x/v1")), ConfigError);
  }
}
