#include "disco/chat_provider.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "disco/errors.hpp"

namespace disco {

MockProvider MockProvider::from_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path);
  std::vector<std::string> responses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_string()) {
      responses.push_back(doc.get<std::string>());
    } else if (doc.is_object() && doc.contains("content") && doc["content"].is_string()) {
      responses.push_back(doc["content"].get<std::string>());
    } else {
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected a JSON string or an object with \"content\"");
    }
  }
  return MockProvider(std::move(responses));
}

std::string MockProvider::chat(std::span<const ChatMessage>) {
  ++calls_;
  if (next_ >= responses_.size()) {
    throw ProviderError("mock script exhausted after " +
                        std::to_string(responses_.size()) + " responses");
  }
  return responses_[next_++];
}

std::string chat_request_body(const HttpSettings& settings,
                              std::span<const ChatMessage> messages) {
  nlohmann::ordered_json body;
  body["model"] = settings.model;
  body["messages"] = nlohmann::ordered_json::array();
  for (const auto& m : messages) {
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  }
  if (settings.temperature) body["temperature"] = *settings.temperature;
  return body.dump();
}

HttpProvider::HttpProvider(HttpSettings settings) : settings_(std::move(settings)) {
  const std::string& url = settings_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must start with http:// or https://: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported endpoint scheme: " + scheme);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  origin_ = url.substr(0, path_start);
  std::string base = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!base.empty() && base.back() == '/') base.pop_back();
  path_ = base + "/chat/completions";
  if (settings_.api_key.empty()) {
    if (const char* key = std::getenv("DISCO_API_KEY")) settings_.api_key = key;
  }
}

std::string HttpProvider::chat(std::span<const ChatMessage> messages) {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration<double>(settings_.timeout_seconds);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  client.set_connection_timeout(timeout_us);
  client.set_read_timeout(timeout_us);
  client.set_write_timeout(timeout_us);
  httplib::Headers headers;
  if (!settings_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + settings_.api_key);
  }
  const std::string body = chat_request_body(settings_, messages);

  last_retries_ = 0;
  int last_status = 0;
  std::string last_problem;
  double delay = settings_.backoff_initial_seconds;
  for (std::size_t attempt = 0;; ++attempt) {
    auto res = client.Post(path_, headers, body, "application/json");
    bool retryable = true;
    if (!res) {
      last_problem = "request failed: " + httplib::to_string(res.error());
    } else {
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) {
        const auto doc = nlohmann::json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) {
          throw ProviderError("chat response is not JSON", res->status, last_retries_);
        }
        try {
          return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
          throw ProviderError("chat response has no choices[0].message.content",
                              res->status, last_retries_);
        }
      }
      retryable = res->status == 429 || res->status >= 500;
      last_problem = "HTTP status " + std::to_string(res->status);
    }
    if (!retryable || attempt >= settings_.max_retries) {
      throw ProviderError("chat completion failed after " +
                              std::to_string(last_retries_) + " retries: " + last_problem,
                          last_status, last_retries_);
    }
    ++last_retries_;
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    delay *= 2.0;
  }
}

}  // namespace disco
