#include "lapis/config.hpp"

#include <cstdlib>

#include "lapis/error.hpp"

namespace lapis {

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

std::size_t to_size(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw InvalidInput(name + " must be a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& name, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidInput(name + " must be a number, got '" + v + "'");
  }
}

}  // namespace

void apply_settings_json(AppConfig& c, const json& j) {
  try {
    c.index_dir = j.value("index_dir", c.index_dir);
    c.corpus = j.value("corpus", c.corpus);
    c.locale = j.value("locale", c.locale);
    c.templates_dir = j.value("templates_dir", c.templates_dir);
    c.exemplars = j.value("exemplars", c.exemplars);
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    if (j.contains("decoding")) c.decoding = generation_params_from_json(j["decoding"]);
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      c.provider.name = p.value("name", c.provider.name);
      c.provider.dim = p.value("dim", c.provider.dim);
      c.provider.endpoint = p.value("endpoint", c.provider.endpoint);
      c.provider.model = p.value("model", c.provider.model);
    }
    if (j.contains("service")) {
      const auto& s = j["service"];
      c.service.kind = s.value("kind", c.service.kind);
      c.service.script = s.value("script", c.service.script);
      c.service.endpoint = s.value("endpoint", c.service.endpoint);
      c.service.model = s.value("model", c.service.model);
      c.service.timeout_s = s.value("timeout_s", c.service.timeout_s);
      c.service.retries = s.value("retries", c.service.retries);
      c.service.max_in_flight = s.value("max_in_flight", c.service.max_in_flight);
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("settings: ") + e.what());
  }
}

void apply_env(AppConfig& c, const EnvLookup& env) {
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  auto size = [&](const char* name, std::size_t& field) {
    if (auto v = env(name)) field = to_size(name, *v);
  };
  str("LAPIS_INDEX_DIR", c.index_dir);
  str("LAPIS_CORPUS", c.corpus);
  str("LAPIS_LOCALE", c.locale);
  str("LAPIS_TEMPLATES", c.templates_dir);
  str("LAPIS_EXEMPLARS", c.exemplars);
  size("LAPIS_K", c.k);
  str("LAPIS_PROVIDER", c.provider.name);
  size("LAPIS_PROVIDER_DIM", c.provider.dim);
  str("LAPIS_PROVIDER_ENDPOINT", c.provider.endpoint);
  str("LAPIS_PROVIDER_MODEL", c.provider.model);
  str("LAPIS_PROVIDER_KEY", c.provider.key);
  str("LAPIS_SERVICE", c.service.kind);
  str("LAPIS_MOCK_SCRIPT", c.service.script);
  str("LAPIS_SERVICE_ENDPOINT", c.service.endpoint);
  str("LAPIS_SERVICE_MODEL", c.service.model);
  str("LAPIS_SERVICE_TOKEN", c.service.token);
  str("LAPIS_API_TOKEN", c.api_token);
  if (auto v = env("LAPIS_TEMPERATURE")) c.decoding.temperature = to_double("LAPIS_TEMPERATURE", *v);
  if (auto v = env("LAPIS_MAX_TOKENS"))
    c.decoding.max_tokens = static_cast<int>(to_size("LAPIS_MAX_TOKENS", *v));
}

AppConfig load_settings(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  AppConfig c;
  if (file) {
    json j;
    try {
      j = json::parse(read_file(*file));
    } catch (const json::parse_error& e) {
      throw InvalidInput("settings file " + file->string() + ": " + e.what());
    }
    apply_settings_json(c, j);
  }
  apply_env(c, env);
  return c;
}

void validate(const AppConfig& c) {
  if (c.k == 0) throw InvalidInput("k must be >= 1");
  if (c.provider.dim == 0) throw InvalidInput("provider dim must be positive");
  if (c.provider.name != "hash" && c.provider.name != "remote")
    throw InvalidInput("provider must be 'hash' or 'remote'");
  if (c.service.kind != "mock" && c.service.kind != "remote")
    throw InvalidInput("service kind must be 'mock' or 'remote'");
  if (c.decoding.max_tokens <= 0) throw InvalidInput("max_tokens must be positive");
  if (c.decoding.temperature < 0.0) throw InvalidInput("temperature must be >= 0");
  if (c.templates_dir.empty() && c.locale != "en" && c.locale != "ko")
    throw InvalidInput("no builtin templates for locale '" + c.locale + "'");
}

json to_json(const AppConfig& c) {
  auto secret = [](const std::string& s) { return s.empty() ? json("") : json("***"); };
  return {{"index_dir", c.index_dir},
          {"corpus", c.corpus},
          {"locale", c.locale},
          {"templates_dir", c.templates_dir},
          {"exemplars", c.exemplars},
          {"k", c.k},
          {"seed", c.seed},
          {"decoding", to_json(c.decoding)},
          {"api_token", secret(c.api_token)},
          {"provider",
           {{"name", c.provider.name},
            {"dim", c.provider.dim},
            {"endpoint", c.provider.endpoint},
            {"model", c.provider.model},
            {"key", secret(c.provider.key)}}},
          {"service",
           {{"kind", c.service.kind},
            {"script", c.service.script},
            {"endpoint", c.service.endpoint},
            {"model", c.service.model},
            {"token", secret(c.service.token)},
            {"timeout_s", c.service.timeout_s},
            {"retries", c.service.retries},
            {"max_in_flight", c.service.max_in_flight}}}};
}

RemoteEmbeddingConfig remote_embedding_config(const AppConfig& c) {
  RemoteEmbeddingConfig r;
  r.endpoint = c.provider.endpoint;
  r.model = c.provider.model;
  r.dim = c.provider.dim;
  r.api_key = c.provider.key;
  return r;
}

std::shared_ptr<GenerationService> make_generation_service(const ServiceSettings& s) {
  if (s.kind == "mock") {
    if (s.script.empty()) throw InvalidInput("mock service needs a script file (--mock-script)");
    return ScriptedMockService::load(s.script);
  }
  if (s.kind == "remote") {
    RemoteServiceConfig r;
    r.endpoint = s.endpoint;
    r.model = s.model;
    r.api_token = s.token;
    r.timeout = std::chrono::seconds(s.timeout_s);
    return std::make_shared<RemoteGenerationService>(r);
  }
  throw InvalidInput("unknown service kind '" + s.kind + "'");
}

EvaluatorOptions evaluator_options(const AppConfig& c, const TemplateSet& templates) {
  EvaluatorOptions o;
  o.params = c.decoding;
  o.retry_cap = c.service.retries;
  o.max_in_flight = c.service.max_in_flight;
  o.labels = LabelSynonyms::from(templates);
  return o;
}

TemplateSet load_templates(const AppConfig& c) {
  if (!c.templates_dir.empty()) return TemplateSet::load(c.templates_dir, c.locale);
  return TemplateSet::builtin(c.locale);
}

}  // namespace lapis
