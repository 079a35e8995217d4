#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disco/prompts.hpp"

namespace disco {

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  // Content of the model's reply. Throws ProviderError.
  virtual std::string chat(std::span<const ChatMessage> messages) = 0;
};

// Returns scripted responses in order.
class MockProvider : public ChatProvider {
 public:
  explicit MockProvider(std::vector<std::string> responses)
      : responses_(std::move(responses)) {}

  // One response per line: a JSON string, or an object with a "content"
  // string. Blank lines are skipped. Throws ConfigError.
  static MockProvider from_script(const std::string& path);

  std::string chat(std::span<const ChatMessage> messages) override;

  std::size_t remaining() const { return responses_.size() - next_; }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<std::string> responses_;
  std::size_t next_ = 0;
  std::size_t calls_ = 0;
};

struct HttpSettings {
  std::string endpoint = "http://127.0.0.1:8000/v1";  // POSTs {endpoint}/chat/completions
  std::string model = "gpt-4";
  std::optional<double> temperature;
  double timeout_seconds = 120.0;
  std::size_t max_retries = 5;
  double backoff_initial_seconds = 1.0;  // doubles on every retry
  std::string api_key;  // empty: read DISCO_API_KEY
};

// OpenAI-compatible chat-completions client. Rate limits (429), server errors
// (5xx) and transport failures are retried with exponential backoff.
class HttpProvider : public ChatProvider {
 public:
  explicit HttpProvider(HttpSettings settings);

  std::string chat(std::span<const ChatMessage> messages) override;

  // Retries spent on the most recent call.
  std::size_t last_retries() const { return last_retries_; }

 private:
  HttpSettings settings_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // .../chat/completions
  std::size_t last_retries_ = 0;
};

// Request body for a chat-completions call.
std::string chat_request_body(const HttpSettings& settings,
                              std::span<const ChatMessage> messages);

}  // namespace disco
