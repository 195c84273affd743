#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "laenet/reward_designer.hpp"

namespace laenet {

// OpenAI-compatible chat-completion client. Base URL and key come from
// LAENET_LLM_URL / LAENET_LLM_KEY unless given explicitly.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(std::string base_url = "", std::string api_key = "",
                          std::string model = "gpt-4o")
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)) {
    if (base_url_.empty())
      if (const char* env = std::getenv("LAENET_LLM_URL")) base_url_ = env;
    if (api_key_.empty())
      if (const char* env = std::getenv("LAENET_LLM_KEY")) api_key_ = env;
    if (base_url_.empty())
      throw ClientError("no LLM endpoint configured (set LAENET_LLM_URL)");
  }

  std::string complete(const std::vector<ChatMessage>& messages) override {
    ++calls_;
    Json body;
    body["model"] = model_;
    body["messages"] = Json::array();
    for (const auto& m : messages)
      body["messages"].push_back({{"role", m.role}, {"content", m.content}});

    httplib::Client cli(base_url_);
    cli.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = cli.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw ClientError("LLM transport error: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw ClientError("LLM HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
      const Json j = Json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw ClientError(std::string("malformed LLM response: ") + e.what());
    }
  }

  int call_count() const override { return calls_; }

 private:
  std::string base_url_;
  std::string api_key_;
  std::string model_;
  int calls_ = 0;
};

}  // namespace laenet
