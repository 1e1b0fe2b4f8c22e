#include "cli.hpp"

#include <csignal>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"
#include "lapis/dataset.hpp"
#include "lapis/error.hpp"
#include "lapis/eval_harness.hpp"
#include "lapis/http_api.hpp"
#include "lapis/knowledgebase.hpp"
#include "lapis/retriever.hpp"
#include "lapis/session.hpp"
#include "lapis/vector_index.hpp"

namespace lapis::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::optional<std::string> settings;
  std::optional<std::string> index_dir;
  std::optional<std::string> corpus;
  std::optional<std::string> provider;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> k;
  std::optional<std::string> locale;
  std::optional<std::string> templates;
  std::optional<std::string> exemplars;
  std::optional<std::string> service;
  std::optional<std::string> mock_script;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> retries;
};

void overlay(AppConfig& c, const Flags& f) {
  if (f.index_dir) c.index_dir = *f.index_dir;
  if (f.corpus) c.corpus = *f.corpus;
  if (f.provider) c.provider.name = *f.provider;
  if (f.dim) c.provider.dim = *f.dim;
  if (f.k) c.k = *f.k;
  if (f.locale) c.locale = *f.locale;
  if (f.templates) c.templates_dir = *f.templates;
  if (f.exemplars) c.exemplars = *f.exemplars;
  if (f.service) c.service.kind = *f.service;
  if (f.mock_script) c.service.script = *f.mock_script;
  if (f.endpoint) c.service.endpoint = *f.endpoint;
  if (f.model) c.service.model = *f.model;
  if (f.temperature) c.decoding.temperature = *f.temperature;
  if (f.max_tokens) c.decoding.max_tokens = *f.max_tokens;
  if (f.seed) c.seed = *f.seed;
  if (f.retries) c.service.retries = *f.retries;
}

const std::string& require_index(const AppConfig& c) {
  if (c.index_dir.empty())
    throw UsageError("--index is required (or LAPIS_INDEX_DIR / settings index_dir)");
  return c.index_dir;
}

void write_json_file(const fs::path& file, const json& j) {
  write_file_atomic(file, j.dump(2) + "\n");
}

template <typename T>
void write_jsonl_file(const fs::path& file, const std::vector<T>& items) {
  std::string buf;
  for (const auto& item : items) buf += to_json(item).dump() + "\n";
  write_file_atomic(file, buf);
}

std::vector<Exemplar> exemplar_pool(const AppConfig& c) {
  if (c.exemplars.empty()) return {};
  return load_exemplars(c.exemplars);
}

std::shared_ptr<const Evaluator> make_evaluator(const AppConfig& c, const TemplateSet& templates) {
  return std::make_shared<Evaluator>(make_generation_service(c.service),
                                     evaluator_options(c, templates));
}

std::vector<PromptStrategy> parse_strategy_list(const std::string& list) {
  if (list.empty() || list == "all") return all_presets();
  std::vector<PromptStrategy> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(parse_strategy(trim(item)));
  if (out.empty()) throw InvalidInput("no strategies given");
  return out;
}

// ---- subcommands ----

struct IngestArgs {
  std::size_t max_tokens = kDefaultMaxTokens;
  std::string out;
};

int run_ingest(const AppConfig& c, const IngestArgs& a, std::ostream& out) {
  if (c.corpus.empty()) throw UsageError("--corpus is required");
  auto kb = ingest_corpus(c.corpus, a.max_tokens);
  const fs::path dir = a.out;
  const auto paragraphs_file = dir / "paragraphs.jsonl";
  if (fs::exists(paragraphs_file) && read_file(paragraphs_file) != kb->serialize_paragraphs()) {
    fs::remove(dir / "meta.json");
    fs::remove(dir / "entries.jsonl");
  }
  kb->save(dir);
  auto stats = to_json(corpus_statistics(*kb));
  write_json_file(dir / "stats.json", stats);
  out << "ingested " << kb->documents().size() << " documents into " << kb->paragraphs().size()
      << " paragraphs\n"
      << stats.dump(2) << "\n";
  return 0;
}

int run_embed(const AppConfig& c, std::ostream& out) {
  const auto& dir = require_index(c);
  auto provider = make_provider(c.provider.name, c.provider.dim, remote_embedding_config(c));
  auto embedder = std::make_shared<Embedder>(provider);
  auto index = build_index_in(dir, *embedder);
  out << "indexed " << index.size() << " paragraphs with " << index.provider_id() << " ("
      << embedder->provider_calls() << " provider calls)\n";
  return 0;
}

struct RetrieveArgs {
  std::string context_file;
  std::string hypothesis;
  std::string out;
};

int run_retrieve(const AppConfig& c, const RetrieveArgs& a, std::ostream& out) {
  const auto& dir = require_index(c);
  if (a.hypothesis.empty()) throw UsageError("--hypothesis is required");
  RetrievalQuery q;
  if (!a.context_file.empty()) q.context.text = read_file(a.context_file);
  q.hypothesis.text = a.hypothesis;
  q.k = c.k;
  auto retriever = open_retriever(dir, remote_embedding_config(c));
  auto premises = retriever->retrieve(q);
  out << format_premises(premises) << "\n";
  if (!a.out.empty()) {
    write_json_file(a.out, {{"query",
                             {{"context", q.context.text},
                              {"hypothesis", q.hypothesis.text},
                              {"k", q.k}}},
                            {"provider_id", retriever->index().provider_id()},
                            {"premises", to_json(premises)}});
  }
  return 0;
}

struct DatasetArgs {
  std::string exam;
  std::string dataset;
  std::string out;
  std::string curation;
  std::string split;
  std::string strategies;
  std::string log;
  std::size_t workers = 1;
  bool without_dexp = false;
};

int run_dataset_build(const DatasetArgs& a, std::ostream& out) {
  if (a.exam.empty()) throw UsageError("--exam is required");
  if (a.out.empty()) throw UsageError("--out is required");
  std::vector<DataInstance> all;
  for (const auto& q : load_exam(a.exam))
    for (auto& d : explode_mcq(q)) all.push_back(std::move(d));
  all = split_by_year(std::move(all));
  save_dataset(a.out, all);
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& d : all) ++counts[static_cast<int>(*d.split)];
  out << "built " << all.size() << " instances (train " << counts[0] << ", dev " << counts[1]
      << ", test " << counts[2] << ")\n";
  return 0;
}

int run_dataset_rationales(const AppConfig& c, const DatasetArgs& a, std::ostream& out) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  if (a.out.empty()) throw UsageError("--out is required");
  auto strategies = parse_strategy_list(a.strategies);
  bool needs_index = false;
  for (const auto& s : strategies) needs_index |= s.uses_cikr;
  std::shared_ptr<Retriever> retriever;
  if (needs_index) retriever = open_retriever(require_index(c), remote_embedding_config(c));
  auto templates = load_templates(c);
  auto evaluator = make_evaluator(c, templates);
  auto instances = load_dataset(a.dataset);
  std::vector<DataInstance> work;
  std::vector<DataInstance> rest;
  for (auto& d : instances) {
    if (d.split && *d.split != Split::test) work.push_back(std::move(d));
    else rest.push_back(std::move(d));
  }
  RationaleGenerationOptions opts;
  opts.exemplar_pool = exemplar_pool(c);
  opts.seed = c.seed;
  opts.k = c.k;
  opts.templates = &templates;
  auto log = build_rationales(work, strategies, retriever.get(), *evaluator, opts, a.workers);
  std::size_t kept = 0;
  for (const auto& d : work) kept += d.rationales.size();
  for (auto& d : rest) work.push_back(std::move(d));
  save_dataset(a.out, work);
  if (!a.log.empty()) {
    std::string buf;
    for (const auto& [id, r] : log) {
      auto j = to_json(r);
      j["instance_id"] = id;
      buf += j.dump() + "\n";
    }
    write_file_atomic(a.log, buf);
  }
  out << "generated " << log.size() << " responses, " << kept << " rationales retained\n";
  return 0;
}

int run_dataset_curate(const DatasetArgs& a, std::ostream& out) {
  if (a.dataset.empty() || a.curation.empty() || a.out.empty())
    throw UsageError("--dataset, --curation and --out are required");
  auto entries = load_curation(a.curation);
  auto merged = merge_expert_curation(load_dataset(a.dataset), entries);
  save_dataset(a.out, merged);
  out << "applied " << entries.size() << " curation entries\n";
  return 0;
}

int run_dataset_export(const AppConfig& c, const DatasetArgs& a, std::ostream& out) {
  if (a.dataset.empty() || a.out.empty()) throw UsageError("--dataset and --out are required");
  auto split = parse_split(a.split);
  if (!split) throw UsageError("--split must be train or dev");
  auto instances = load_dataset(a.dataset);
  if (a.without_dexp) instances = without_expert_curation(std::move(instances));
  auto records = export_sft(instances, *split, load_templates(c));
  write_jsonl_file(a.out, records);
  out << "exported " << records.size() << " records\n";
  return 0;
}

int run_dataset_stats(const DatasetArgs& a, std::ostream& out) {
  if (a.dataset.empty()) throw UsageError("--dataset is required");
  auto stats = dataset_statistics(load_dataset(a.dataset));
  out << render_stats_table(stats);
  if (!a.out.empty()) write_json_file(a.out, to_json(stats));
  return 0;
}

struct EvalArgs {
  std::string config;
  std::string dataset;
  std::string out;
  std::string artifacts;
};

int run_eval(const AppConfig& c, const EvalArgs& a, std::ostream& out) {
  if (a.config.empty() || a.dataset.empty() || a.out.empty())
    throw UsageError("--config, --dataset and --out are required");
  json doc;
  try {
    doc = json::parse(read_file(a.config));
  } catch (const json::parse_error& e) {
    throw InvalidInput("eval config " + a.config + ": " + e.what());
  }
  const fs::path base = fs::path(a.config).parent_path();
  auto dataset = load_dataset(a.dataset);
  auto templates = load_templates(c);
  auto pool = exemplar_pool(c);

  std::vector<json> run_specs;
  if (doc.contains("runs")) {
    for (const auto& r : doc.at("runs")) run_specs.push_back(r);
  } else {
    run_specs.push_back(doc);
  }
  std::vector<AblationRun> runs;
  bool needs_index = false;
  for (const auto& r : run_specs) {
    AblationRun run;
    run.config = eval_config_from_json(r);
    if (!r.contains("k") && !r.contains("runs")) run.config.k = c.k;
    needs_index |= run.config.uses_cikr;
    auto settings = c.service;
    if (r.contains("script")) {
      fs::path p = r["script"].get<std::string>();
      settings.kind = "mock";
      settings.script = p.is_relative() ? (base / p).string() : p.string();
    }
    run.service = make_generation_service(settings);
    run.retry_cap = settings.retries;
    runs.push_back(std::move(run));
  }
  std::shared_ptr<Retriever> retriever;
  if (needs_index) retriever = open_retriever(require_index(c), remote_embedding_config(c));

  if (runs.size() == 1) {
    EvaluatorOptions opts = evaluator_options(c, templates);
    opts.retry_cap = runs[0].retry_cap;
    Evaluator evaluator(runs[0].service, opts);
    auto result =
        run_evaluation(runs[0].config, dataset, retriever.get(), evaluator, pool, templates);
    write_json_file(a.out, to_json(result.report));
    if (!a.artifacts.empty()) write_jsonl_file(a.artifacts, result.artifacts);
    out << render_comparison_table({result.report});
    return 0;
  }
  auto result = ablation_matrix(runs, dataset, retriever.get(), pool);
  json reports = json::array();
  for (const auto& r : result.reports) reports.push_back(to_json(r));
  json failures = json::array();
  for (const auto& [method, msg] : result.failures)
    failures.push_back({{"method", method}, {"error", msg}});
  write_json_file(a.out, {{"reports", reports}, {"failures", failures}, {"table", result.table}});
  out << result.table;
  for (const auto& [method, msg] : result.failures) out << "failed: " << method << ": " << msg << "\n";
  return result.failures.empty() ? 0 : 1;
}

struct ServeArgs {
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
};

httplib::Server* g_server = nullptr;

int run_serve(const AppConfig& c, const ServeArgs& a, std::ostream& out) {
  const auto& dir = require_index(c);
  if (a.store.empty()) throw UsageError("--store is required");
  auto templates = std::make_shared<TemplateSet>(load_templates(c));
  auto retriever = open_retriever(dir, remote_embedding_config(c));
  auto evaluator = make_evaluator(c, *templates);
  SessionServiceOptions opts;
  opts.k = c.k;
  opts.exemplar_pool = exemplar_pool(c);
  opts.exemplar_seed = c.seed;
  opts.templates = templates.get();
  SessionService service(std::make_shared<SessionStore>(a.store), retriever, evaluator, opts);
  HttpApiOptions api;
  if (!c.api_token.empty()) api.api_token = c.api_token;
  auto server = make_http_server(service, api);
  g_server = server.get();
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  out << "listening on http://" << a.host << ":" << a.port << "\n" << std::flush;
  bool ok = server->listen(a.host, a.port);
  g_server = nullptr;
  if (!ok) throw StorageError("could not bind " + a.host + ":" + std::to_string(a.port));
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, const EnvLookup& env, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"LAPIS: legal-premise retrieval and hypothesis assessment for crime investigation",
               "lapis"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", "lapis 0.1.0");

  Flags f;
  app.add_option("--settings", f.settings, "JSON settings file (overridden by env and flags)");
  app.add_option("--index", f.index_dir, "Index directory [LAPIS_INDEX_DIR]");
  app.add_option("--corpus", f.corpus, "Corpus file, one JSON record per line [LAPIS_CORPUS]");
  app.add_option("--provider", f.provider, "Embedding provider: hash | remote [LAPIS_PROVIDER]");
  app.add_option("--dim", f.dim, "Embedding dimension [LAPIS_PROVIDER_DIM]");
  app.add_option("--k", f.k, "Premises retrieved per query, default 5 [LAPIS_K]");
  app.add_option("--locale", f.locale, "Template locale: en | ko [LAPIS_LOCALE]");
  app.add_option("--templates", f.templates, "Template root directory [LAPIS_TEMPLATES]");
  app.add_option("--exemplars", f.exemplars, "Few-shot exemplar file [LAPIS_EXEMPLARS]");
  app.add_option("--service", f.service, "Generation service: mock | remote [LAPIS_SERVICE]");
  app.add_option("--mock-script", f.mock_script, "Mock service script [LAPIS_MOCK_SCRIPT]");
  app.add_option("--endpoint", f.endpoint, "Generation endpoint URL [LAPIS_SERVICE_ENDPOINT]");
  app.add_option("--model", f.model, "Generation model id [LAPIS_SERVICE_MODEL]");
  app.add_option("--temperature", f.temperature, "Decoding temperature [LAPIS_TEMPERATURE]");
  app.add_option("--max-tokens-out", f.max_tokens, "Decoding token cap [LAPIS_MAX_TOKENS]");
  app.add_option("--seed", f.seed, "Exemplar selection seed");
  app.add_option("--retries", f.retries, "Transport retry cap");
  app.footer(
      "Secrets come only from the environment: LAPIS_API_TOKEN (serve bearer token),\n"
      "LAPIS_PROVIDER_KEY (remote embeddings), LAPIS_SERVICE_TOKEN (remote generation).");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse a corpus, chunk it and write the knowledgebase");
  ingest_cmd->add_option("--max-tokens", ingest.max_tokens, "Paragraph token cap (>= 32)")
      ->capture_default_str();
  ingest_cmd->add_option("--out", ingest.out, "Output index directory")->required();

  auto* embed_cmd = app.add_subcommand("embed", "Embed every paragraph and write the vector index");

  RetrieveArgs retrieve;
  auto* retrieve_cmd = app.add_subcommand("retrieve", "Retrieve premises for a context and hypothesis");
  retrieve_cmd->add_option("--context-file", retrieve.context_file, "Investigation context file");
  retrieve_cmd->add_option("--hypothesis", retrieve.hypothesis, "Legal hypothesis text");
  retrieve_cmd->add_option("--out", retrieve.out, "Write the retrieval record as JSON");

  DatasetArgs ds;
  auto* dataset_cmd = app.add_subcommand("dataset", "Build and curate the evaluation dataset");
  dataset_cmd->require_subcommand(1);
  auto* ds_build = dataset_cmd->add_subcommand("build", "Explode exam questions and split by year");
  ds_build->add_option("--exam", ds.exam, "Exam questions file");
  ds_build->add_option("--out", ds.out, "Output dataset file");
  auto* ds_rat = dataset_cmd->add_subcommand("rationales", "Generate and filter rationales");
  ds_rat->add_option("--dataset", ds.dataset, "Input dataset file");
  ds_rat->add_option("--strategies", ds.strategies, "Comma-separated strategy names, or all");
  ds_rat->add_option("--out", ds.out, "Output dataset file");
  ds_rat->add_option("--log", ds.log, "Write every raw response as JSON lines");
  ds_rat->add_option("--workers", ds.workers, "Instances processed concurrently")->capture_default_str();
  auto* ds_curate = dataset_cmd->add_subcommand("curate", "Merge expert revisions and annotations");
  ds_curate->add_option("--dataset", ds.dataset, "Input dataset file");
  ds_curate->add_option("--curation", ds.curation, "Curation entries file");
  ds_curate->add_option("--out", ds.out, "Output dataset file");
  auto* ds_export = dataset_cmd->add_subcommand("export", "Export fine-tuning records");
  ds_export->add_option("--dataset", ds.dataset, "Input dataset file");
  ds_export->add_option("--split", ds.split, "train | dev")->required();
  ds_export->add_option("--out", ds.out, "Output JSON lines file");
  ds_export->add_flag("--without-dexp", ds.without_dexp, "Drop expert-curated content first");
  auto* ds_stats = dataset_cmd->add_subcommand("stats", "Per-subject, per-split counts");
  ds_stats->add_option("--dataset", ds.dataset, "Dataset file");
  ds_stats->add_option("--out", ds.out, "Write the statistics as JSON");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a configuration (or a list of runs) on a split");
  eval_cmd->add_option("--config", ev.config, "Eval config JSON (one config or {\"runs\": [...]})");
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset file");
  eval_cmd->add_option("--out", ev.out, "Report JSON file");
  eval_cmd->add_option("--artifacts", ev.artifacts, "Per-instance artifacts, JSON lines");

  ServeArgs sv;
  auto* serve_cmd = app.add_subcommand("serve", "Run the investigation session HTTP API");
  serve_cmd->add_option("--store", sv.store, "Session event log file");
  serve_cmd->add_option("--port", sv.port, "Listen port")->capture_default_str();
  serve_cmd->add_option("--host", sv.host, "Listen address")->capture_default_str();

  auto* show_cmd = app.add_subcommand("config", "Print the effective configuration (secrets masked)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    AppConfig c = load_settings(f.settings ? std::optional<fs::path>(*f.settings) : std::nullopt, env);
    overlay(c, f);
    validate(c);

    if (ingest_cmd->parsed()) return run_ingest(c, ingest, out);
    if (embed_cmd->parsed()) return run_embed(c, out);
    if (retrieve_cmd->parsed()) return run_retrieve(c, retrieve, out);
    if (ds_build->parsed()) return run_dataset_build(ds, out);
    if (ds_rat->parsed()) return run_dataset_rationales(c, ds, out);
    if (ds_curate->parsed()) return run_dataset_curate(ds, out);
    if (ds_export->parsed()) return run_dataset_export(c, ds, out);
    if (ds_stats->parsed()) return run_dataset_stats(ds, out);
    if (eval_cmd->parsed()) return run_eval(c, ev, out);
    if (serve_cmd->parsed()) return run_serve(c, sv, out);
    if (show_cmd->parsed()) {
      out << to_json(c).dump(2) << "\n";
      return 0;
    }
    err << "error: usage: no subcommand\n";
    return 2;
  } catch (const UsageError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

int dispatch(const std::vector<std::string>& args, const EnvLookup& env, std::ostream& out,
             std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("lapis");
  for (const auto& a : args) argv.push_back(a.c_str());
  return dispatch(static_cast<int>(argv.size()), argv.data(), env, out, err);
}

}  // namespace lapis::cli
