#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "lapis/dataset.hpp"
#include "support.hpp"

using namespace lapis;
using lapis::test::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  EnvLookup lookup = [env](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  int code = cli::dispatch(args, lookup, out, err);
  return {code, out.str(), err.str()};
}

std::string fx(const std::string& name) { return lapis::test::fixture(name).string(); }

}  // namespace

TEST_CASE("cli: help and usage errors") {
  auto help = run({"--help"});
  CHECK(help.code == 0);
  for (const char* sub : {"ingest", "embed", "retrieve", "dataset", "eval", "serve"})
    CHECK(help.out.find(sub) != std::string::npos);
  CHECK(help.out.find("LAPIS_API_TOKEN") != std::string::npos);

  auto retrieve_help = run({"retrieve", "--help"});
  CHECK(retrieve_help.code == 0);
  CHECK(retrieve_help.out.find("--hypothesis") != std::string::npos);

  auto missing = run({"retrieve"});
  CHECK(missing.code == 2);
  CHECK(missing.err.rfind("error: usage: --index", 0) == 0);
  CHECK(std::count(missing.err.begin(), missing.err.end(), '\n') == 1);

  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"dataset"}).code == 2);
  CHECK(run({"ingest", "--corpus", fx("small_corpus.jsonl")}).code == 2);
}

TEST_CASE("cli: runtime errors carry a category") {
  TempDir tmp;
  auto r = run({"ingest", "--corpus", (tmp / "nope.jsonl").string(), "--out", tmp.path().string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: not_found: ", 0) == 0);

  auto k0 = run({"config", "--k", "0"});
  CHECK(k0.code == 1);
  CHECK(k0.err.rfind("error: invalid_input: ", 0) == 0);

  auto bad_env = run({"config"}, {{"LAPIS_K", "many"}});
  CHECK(bad_env.code == 1);
}

TEST_CASE("cli: flags override environment override settings file") {
  TempDir tmp;
  write_file_atomic(tmp / "settings.json",
                    R"({"k": 3, "locale": "ko", "index_dir": "/from/file", "provider": {"dim": 32}})");
  const auto settings = (tmp / "settings.json").string();

  auto file_only = json::parse(run({"config", "--settings", settings}).out);
  CHECK(file_only["k"] == 3);
  CHECK(file_only["index_dir"] == "/from/file");

  std::map<std::string, std::string> env{{"LAPIS_K", "4"}, {"LAPIS_INDEX_DIR", "/from/env"}};
  auto with_env = json::parse(run({"config", "--settings", settings}, env).out);
  CHECK(with_env["k"] == 4);
  CHECK(with_env["index_dir"] == "/from/env");
  CHECK(with_env["locale"] == "ko");

  auto with_flag = json::parse(run({"config", "--settings", settings, "--k", "5"}, env).out);
  CHECK(with_flag["k"] == 5);
  CHECK(with_flag["index_dir"] == "/from/env");
  CHECK(with_flag["provider"]["dim"] == 32);
}

TEST_CASE("cli: secrets are never echoed") {
  auto r = run({"config"}, {{"LAPIS_API_TOKEN", "s3cr3t-api"},
                            {"LAPIS_PROVIDER_KEY", "s3cr3t-key"},
                            {"LAPIS_SERVICE_TOKEN", "s3cr3t-svc"}});
  CHECK(r.code == 0);
  CHECK(r.out.find("s3cr3t") == std::string::npos);
  auto j = json::parse(r.out);
  CHECK(j["api_token"] == "***");
  CHECK(j["provider"]["key"] == "***");
}

TEST_CASE("cli: full fixture pipeline") {
  TempDir tmp;
  const auto idx = (tmp / "idx").string();
  const auto ds = (tmp / "ds.jsonl").string();
  const auto ds2 = (tmp / "ds2.jsonl").string();
  const auto ds3 = (tmp / "ds3.jsonl").string();
  write_file_atomic(tmp / "ctx.txt",
                    "The victim was stabbed with a knife after a quarrel. The wound was 6cm long "
                    "and 17cm deep near the heart.");

  auto step = [](const std::vector<std::string>& args) {
    auto r = run(args);
    CAPTURE(args[0]);
    CAPTURE(r.err);
    CHECK(r.code == 0);
    return r;
  };

  step({"ingest", "--corpus", fx("scenario_corpus.jsonl"), "--max-tokens", "256", "--out", idx});
  auto paragraphs = read_file(tmp / "idx" / "paragraphs.jsonl");
  step({"ingest", "--corpus", fx("scenario_corpus.jsonl"), "--max-tokens", "256", "--out", idx});
  CHECK(read_file(tmp / "idx" / "paragraphs.jsonl") == paragraphs);

  step({"embed", "--index", idx, "--provider", "hash", "--dim", "128"});
  auto entries = read_file(tmp / "idx" / "entries.jsonl");
  step({"embed", "--index", idx, "--provider", "hash", "--dim", "128"});
  CHECK(read_file(tmp / "idx" / "entries.jsonl") == entries);

  auto retrieved = step({"retrieve", "--index", idx, "--context-file", (tmp / "ctx.txt").string(),
                         "--hypothesis", "Murder intent can be recognized.", "--k", "5", "--out",
                         (tmp / "retrieval.json").string()});
  CHECK(retrieved.out.find("(Ref No: 89do2087)") != std::string::npos);
  auto record = json::parse(read_file(tmp / "retrieval.json"));
  CHECK(record["premises"].size() == 5);
  CHECK(record["query"]["k"] == 5);

  step({"dataset", "build", "--exam", fx("exam.jsonl"), "--out", ds});
  step({"dataset", "rationales", "--dataset", ds, "--index", idx, "--mock-script",
        fx("exam_mock.json"), "--exemplars",
        (lapis::test::source_dir() / "data" / "exemplars" / "en.jsonl").string(), "--out", ds2,
        "--log", (tmp / "log.jsonl").string(), "--workers", "3"});
  step({"dataset", "curate", "--dataset", ds2, "--curation", fx("curation.jsonl"), "--out", ds3});
  step({"dataset", "export", "--dataset", ds3, "--split", "train", "--out",
        (tmp / "sft.jsonl").string()});
  auto stats = step({"dataset", "stats", "--dataset", ds3, "--out", (tmp / "stats.json").string()});
  CHECK(stats.out.find("All Subject Areas") != std::string::npos);

  auto instances = load_dataset(ds3);
  std::size_t train_rationales = 0;
  for (const auto& d : instances)
    if (d.split == Split::train) train_rationales += d.rationales.size();
  CHECK(read_jsonl(tmp / "sft.jsonl").size() == train_rationales);

  auto curated_again = run({"dataset", "curate", "--dataset", ds3, "--curation",
                            fx("curation.jsonl"), "--out", (tmp / "ds4.jsonl").string()});
  CHECK(curated_again.code == 0);
  CHECK(read_file(tmp / "ds4.jsonl") == read_file(ds3));

  CHECK(run({"dataset", "export", "--dataset", ds3, "--split", "test", "--out",
             (tmp / "x.jsonl").string()}).code == 1);

  auto eval = step({"eval", "--config", fx("eval_config.json"), "--dataset", ds3, "--index", idx,
                    "--mock-script", fx("exam_mock.json"), "--out", (tmp / "report.json").string(),
                    "--artifacts", (tmp / "artifacts.jsonl").string()});
  CHECK(eval.out.find("| Model") != std::string::npos);
  auto report = json::parse(read_file(tmp / "report.json"));
  CHECK(report["total"]["accuracy"] == 1.0);
  CHECK(read_jsonl(tmp / "artifacts.jsonl").size() == report["total"]["counts"]["n"].get<std::size_t>());

  auto ablation = step({"eval", "--config", fx("ablation_config.json"), "--dataset", ds3, "--index",
                        idx, "--out", (tmp / "ablation.json").string()});
  auto abl = json::parse(read_file(tmp / "ablation.json"));
  CHECK(abl["reports"].size() == 2);
}
