#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lapis/io.hpp"

namespace lapis {

// Decoding parameters. Recorded in every report.
struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 1024;
  bool operator==(const GenerationParams&) const = default;
};

json to_json(const GenerationParams& p);
GenerationParams generation_params_from_json(const json& j);

class GenerationService {
 public:
  virtual ~GenerationService() = default;
  virtual std::string id() const = 0;
  // One request. Throws TransportError on timeout or service failure.
  virtual std::string generate(const std::string& prompt, const GenerationParams& params) = 0;
};

struct RemoteServiceConfig {
  std::string endpoint;  // base URL
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_token;  // from LAPIS_SERVICE_TOKEN; never logged
  std::chrono::seconds timeout{60};
};

// OpenAI-compatible chat-completions client.
class RemoteGenerationService final : public GenerationService {
 public:
  explicit RemoteGenerationService(RemoteServiceConfig config);
  std::string id() const override { return "remote:" + config_.model; }
  std::string generate(const std::string& prompt, const GenerationParams& params) override;

 private:
  RemoteServiceConfig config_;
};

// Deterministic canned responses. Lookup order: exact prompt sha256, then
// the first rule whose substrings all occur in the prompt, then the default
// (empty when unset).
class ScriptedMockService final : public GenerationService {
 public:
  struct Rule {
    std::vector<std::string> contains;
    std::string response;
  };

  explicit ScriptedMockService(std::string id = "mock");

  // {"id"?, "default"?, "responses": [{"prompt_sha256"|"contains": ..., "response": ...}]}
  static std::shared_ptr<ScriptedMockService> from_json(const json& script);
  static std::shared_ptr<ScriptedMockService> load(const std::filesystem::path& file);

  void add_exact(const std::string& prompt, std::string response);
  void add_hash(std::string prompt_sha256, std::string response);
  void add_rule(std::vector<std::string> contains, std::string response);
  void set_default(std::string response);
  // The next n generate() calls throw TransportError.
  void fail_next(std::size_t n);

  std::string id() const override { return id_; }
  std::string generate(const std::string& prompt, const GenerationParams& params) override;

  std::size_t calls() const { return calls_.load(); }

 private:
  std::string id_;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> by_hash_;
  std::vector<Rule> rules_;
  std::optional<std::string> default_;
  std::size_t failures_pending_ = 0;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace lapis
