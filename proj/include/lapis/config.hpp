#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "lapis/embedding.hpp"
#include "lapis/evaluator.hpp"
#include "lapis/generation.hpp"
#include "lapis/io.hpp"
#include "lapis/prompting.hpp"

namespace lapis {

struct ProviderSettings {
  std::string name = "hash";  // hash | remote
  std::size_t dim = 256;
  std::string endpoint;
  std::string model;
  std::string key;  // secret
};

struct ServiceSettings {
  std::string kind = "mock";  // mock | remote
  std::string script;         // mock script file
  std::string endpoint;
  std::string model;
  std::string token;  // secret
  int timeout_s = 60;
  std::size_t retries = 2;
  std::size_t max_in_flight = 4;
};

struct AppConfig {
  std::string index_dir;
  std::string corpus;
  ProviderSettings provider;
  ServiceSettings service;
  std::string locale = "en";
  std::string templates_dir;  // empty: builtin templates for locale
  std::string exemplars;      // exemplar file; empty: none
  std::size_t k = 5;
  GenerationParams decoding;
  std::uint64_t seed = 0;
  std::string api_token;  // secret; required by `serve` clients when set
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// File values, then environment overrides. Flags are applied by the caller
// afterwards, then validate() runs.
AppConfig load_settings(const std::optional<std::filesystem::path>& file, const EnvLookup& env);
void apply_settings_json(AppConfig& cfg, const json& j);
void apply_env(AppConfig& cfg, const EnvLookup& env);
void validate(const AppConfig& cfg);

// Secrets rendered as "***" when set.
json to_json(const AppConfig& cfg);

RemoteEmbeddingConfig remote_embedding_config(const AppConfig& cfg);
std::shared_ptr<GenerationService> make_generation_service(const ServiceSettings& s);
EvaluatorOptions evaluator_options(const AppConfig& cfg, const TemplateSet& templates);
TemplateSet load_templates(const AppConfig& cfg);

}  // namespace lapis
