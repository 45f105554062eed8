#pragma once

#include <string>
#include <vector>

#include "varsel/generate.hpp"

namespace varsel {

/// Minimal chat-completion client. complete() posts one user message and
/// returns the assistant text. When the settings name a replay file, its
/// recorded response bodies are consumed by request index instead of
/// touching the network; this is how all tests run.
class ChatClient {
 public:
  explicit ChatClient(const LlmSettings& settings);

  std::string complete(const std::string& prompt, int request_index);

 private:
  LlmSettings settings_;
  std::vector<std::string> replay_bodies_;
};

/// Assistant text from a chat-completion response body.
std::string parse_chat_response(const std::string& body);

/// Request body for one prompt.
std::string build_chat_request(const std::string& model, const std::string& prompt);

}  // namespace varsel
