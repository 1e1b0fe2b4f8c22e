#include "lapis/generation.hpp"

#include "httplib.h"
#include "lapis/error.hpp"
#include "lapis/text.hpp"

namespace lapis {

json to_json(const GenerationParams& p) {
  return {{"temperature", p.temperature}, {"max_tokens", p.max_tokens}};
}

GenerationParams generation_params_from_json(const json& j) {
  GenerationParams p;
  p.temperature = j.value("temperature", p.temperature);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  if (p.max_tokens <= 0) throw InvalidInput("max_tokens must be positive");
  return p;
}

RemoteGenerationService::RemoteGenerationService(RemoteServiceConfig config)
    : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw InvalidInput("generation service endpoint is not set");
}

std::string RemoteGenerationService::generate(const std::string& prompt,
                                              const GenerationParams& params) {
  httplib::Client client(config_.endpoint);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_token.empty()) headers.emplace("Authorization", "Bearer " + config_.api_token);
  json body = {{"model", config_.model},
               {"temperature", params.temperature},
               {"max_tokens", params.max_tokens},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("generation request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TransportError("generation service returned HTTP " + std::to_string(res->status));
  try {
    return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed generation response: ") + e.what());
  }
}

ScriptedMockService::ScriptedMockService(std::string id) : id_(std::move(id)) {}

std::shared_ptr<ScriptedMockService> ScriptedMockService::from_json(const json& script) {
  auto svc = std::make_shared<ScriptedMockService>(script.value("id", "mock"));
  if (script.contains("default")) svc->set_default(script["default"].get<std::string>());
  for (const auto& entry : script.value("responses", json::array())) {
    auto response = entry.at("response").get<std::string>();
    if (entry.contains("prompt_sha256")) {
      svc->add_hash(entry["prompt_sha256"].get<std::string>(), std::move(response));
    } else if (entry.contains("contains")) {
      const auto& c = entry["contains"];
      svc->add_rule(c.is_string() ? std::vector<std::string>{c.get<std::string>()}
                                  : c.get<std::vector<std::string>>(),
                    std::move(response));
    } else {
      throw InvalidInput("mock script entry needs prompt_sha256 or contains");
    }
  }
  return svc;
}

std::shared_ptr<ScriptedMockService> ScriptedMockService::load(const std::filesystem::path& file) {
  try {
    return from_json(json::parse(read_file(file)));
  } catch (const json::exception& e) {
    throw ParseError(1, file.string() + ": " + e.what());
  }
}

void ScriptedMockService::add_exact(const std::string& prompt, std::string response) {
  add_hash(sha256_hex(prompt), std::move(response));
}

void ScriptedMockService::add_hash(std::string prompt_sha256, std::string response) {
  std::lock_guard lock(mu_);
  by_hash_.emplace_back(std::move(prompt_sha256), std::move(response));
}

void ScriptedMockService::add_rule(std::vector<std::string> contains, std::string response) {
  std::lock_guard lock(mu_);
  rules_.push_back({std::move(contains), std::move(response)});
}

void ScriptedMockService::set_default(std::string response) {
  std::lock_guard lock(mu_);
  default_ = std::move(response);
}

void ScriptedMockService::fail_next(std::size_t n) {
  std::lock_guard lock(mu_);
  failures_pending_ = n;
}

std::string ScriptedMockService::generate(const std::string& prompt, const GenerationParams&) {
  calls_.fetch_add(1);
  std::lock_guard lock(mu_);
  if (failures_pending_ > 0) {
    --failures_pending_;
    throw TransportError("mock service: injected failure");
  }
  const auto hash = sha256_hex(prompt);
  for (const auto& [h, response] : by_hash_)
    if (h == hash) return response;
  for (const auto& rule : rules_) {
    bool all = true;
    for (const auto& needle : rule.contains)
      if (prompt.find(needle) == std::string::npos) {
        all = false;
        break;
      }
    if (all) return rule.response;
  }
  return default_.value_or("");
}

}  // namespace lapis
