#include "varsel/llm.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "varsel/csv.hpp"
#include "varsel/errors.hpp"

namespace varsel {

namespace {

using nlohmann::json;

struct ParsedUrl {
  std::string host;  // scheme://host:port for httplib
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    raise(Errc::ConfigError, "endpoint '" + url + "' has no scheme");
  const std::size_t path_start = url.find('/', scheme + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string build_chat_request(const std::string& model, const std::string& prompt) {
  json body = {
      {"model", model},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
  };
  return body.dump();
}

std::string parse_chat_response(const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::exception& e) {
    raise(Errc::EndpointUnavailable, std::string("response is not JSON: ") + e.what());
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    raise(Errc::EndpointUnavailable, "response has no choices");
  }
  const json& message = parsed["choices"][0].value("message", json::object());
  if (!message.contains("content") || !message["content"].is_string())
    raise(Errc::EndpointUnavailable, "response choice has no message content");
  return message["content"].get<std::string>();
}

ChatClient::ChatClient(const LlmSettings& settings) : settings_(settings) {
  if (settings_.replay_path.empty()) return;
  json replay;
  try {
    replay = json::parse(read_file(settings_.replay_path));
  } catch (const json::exception& e) {
    raise(Errc::ConfigError, "replay file '" + settings_.replay_path +
                                 "' is not valid JSON: " + e.what());
  }
  const json* bodies = nullptr;
  if (replay.is_array()) {
    bodies = &replay;
  } else if (replay.contains("responses") && replay["responses"].is_array()) {
    bodies = &replay["responses"];
  } else {
    raise(Errc::ConfigError, "replay file must hold an array of response bodies");
  }
  for (const json& body : *bodies) {
    replay_bodies_.push_back(body.is_string() ? body.get<std::string>() : body.dump());
  }
  if (replay_bodies_.empty())
    raise(Errc::ConfigError, "replay file holds no responses");
}

std::string ChatClient::complete(const std::string& prompt, int request_index) {
  if (!replay_bodies_.empty()) {
    const std::size_t i = static_cast<std::size_t>(request_index) % replay_bodies_.size();
    return parse_chat_response(replay_bodies_[i]);
  }

  const ParsedUrl url = split_url(settings_.endpoint);
  httplib::Client client(url.host);
  const auto timeout = std::chrono::duration<double>(settings_.request_timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::milliseconds>(timeout));

  httplib::Headers headers;
  if (!settings_.token_env.empty()) {
    if (const char* token = std::getenv(settings_.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  const auto result = client.Post(url.path, headers,
                                  build_chat_request(settings_.model, prompt),
                                  "application/json");
  if (!result) {
    raise(Errc::EndpointUnavailable, "request to " + settings_.endpoint +
                                         " failed: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    raise(Errc::EndpointUnavailable, "endpoint answered HTTP " +
                                         std::to_string(result->status) + ": " +
                                         result->body.substr(0, 512));
  }
  return parse_chat_response(result->body);
}

}  // namespace varsel
