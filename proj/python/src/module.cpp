#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "lapis/config.hpp"
#include "lapis/eval_harness.hpp"
#include "lapis/evaluator.hpp"
#include "lapis/io.hpp"
#include "lapis/prompting.hpp"
#include "lapis/retriever.hpp"
#include "lapis/session.hpp"
#include "lapis/vector_index.hpp"

namespace py = pybind11;
using namespace lapis;

// Structured values cross the boundary as JSON text; the Python layer decodes them.
namespace {

std::string py_ingest(const std::string& corpus, const std::string& out_dir, std::size_t max_tokens) {
  auto kb = ingest_corpus(corpus, max_tokens);
  kb->save(out_dir);
  auto stats = to_json(corpus_statistics(*kb));
  write_file_atomic(std::filesystem::path(out_dir) / "stats.json", stats.dump(2) + "\n");
  return stats.dump();
}

std::string py_build_index(const std::string& index_dir, const std::string& provider, std::size_t dim) {
  Embedder embedder(make_provider(provider, dim));
  auto index = build_index_in(index_dir, embedder);
  return json{{"size", index.size()}, {"provider_id", index.provider_id()}, {"dim", index.dim()},
              {"provider_calls", embedder.provider_calls()}}
      .dump();
}

class PyRetriever {
 public:
  explicit PyRetriever(const std::string& index_dir) : inner_(open_retriever(index_dir)) {}

  std::string retrieve(const std::string& context, const std::string& hypothesis, std::size_t k) const {
    RetrievalQuery q;
    q.context.text = context;
    q.hypothesis.text = hypothesis;
    q.k = k;
    PremiseSet premises;
    {
      py::gil_scoped_release release;
      premises = inner_->retrieve(q);
    }
    return to_json(premises).dump();
  }

  std::size_t size() const { return inner_->index().size(); }
  std::size_t search_count() const { return inner_->index().search_count(); }
  std::string provider_id() const { return inner_->index().provider_id(); }
  std::shared_ptr<Retriever> handle() const { return inner_; }

 private:
  std::shared_ptr<Retriever> inner_;
};

std::string build_prompt_text(const std::string& strategy, const std::string& context,
                              const std::string& hypothesis, const std::optional<std::string>& premises,
                              const std::optional<std::string>& exemplars_file, std::uint64_t seed) {
  auto s = parse_strategy(strategy);
  std::optional<PremiseSet> ps;
  if (premises) ps = premise_set_from_json(json::parse(*premises));
  std::vector<Exemplar> exemplars;
  if (s.shots > 0) {
    if (!exemplars_file) throw InvalidInput(strategy + " needs an exemplars file");
    exemplars = select_exemplars(load_exemplars(*exemplars_file), static_cast<std::size_t>(s.shots), seed);
  }
  return build_prompt(s, {context}, {hypothesis}, ps, exemplars).rendered;
}

std::string parse(const std::string& raw) { return to_json(parse_response(raw)).dump(); }

std::string render(bool assessment, const std::string& rationale) {
  return render_answer(assessment_from_bool(assessment), rationale);
}

// labels: ground truth; predictions: None marks an unparseable answer.
std::pair<double, double> metrics(const std::vector<bool>& labels,
                                  const std::vector<std::optional<bool>>& predictions, bool macro) {
  if (labels.size() != predictions.size()) throw InvalidInput("labels and predictions differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!predictions[i]) {
      ++c.unparseable;
      if (labels[i]) ++c.unparseable_true;
    } else if (*predictions[i]) {
      ++(labels[i] ? c.tp : c.fp);
    } else {
      ++(labels[i] ? c.fn : c.tn);
    }
  }
  return {accuracy(c), f1(c, macro ? F1Mode::macro : F1Mode::binary_true)};
}

class PySessions {
 public:
  PySessions(const std::string& store, const PyRetriever& retriever, const std::string& mock_script,
             std::size_t k, const std::optional<std::string>& exemplars_file) {
    ServiceSettings settings;
    settings.kind = "mock";
    settings.script = mock_script;
    auto evaluator = std::make_shared<Evaluator>(make_generation_service(settings));
    SessionServiceOptions opts;
    opts.k = k;
    if (exemplars_file) opts.exemplar_pool = load_exemplars(*exemplars_file);
    inner_ = std::make_unique<SessionService>(std::make_shared<SessionStore>(store), retriever.handle(),
                                              evaluator, opts);
  }

  std::string create(const std::string& title) { return to_json(inner_->create_session(title)).dump(); }
  std::string add_context(const std::string& id, const std::string& delta) {
    return to_json(inner_->add_context(id, delta)).dump();
  }
  std::string submit(const std::string& id, const std::string& step, const std::string& hypothesis,
                     const std::optional<std::string>& strategy) {
    std::optional<PromptStrategy> s;
    if (strategy) s = parse_strategy(*strategy);
    HypothesisRecord rec;
    {
      py::gil_scoped_release release;
      rec = inner_->submit_hypothesis(id, step, hypothesis, s);
    }
    return to_json(rec).dump();
  }
  std::string close(const std::string& id) { return to_json(inner_->close_session(id)).dump(); }
  std::string get(const std::string& id) const { return to_json(inner_->get(id)).dump(); }
  std::string list() const {
    json arr = json::array();
    for (const auto& s : inner_->list()) arr.push_back(to_json(s));
    return arr.dump();
  }

 private:
  std::unique_ptr<SessionService> inner_;
};

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = cli::dispatch(args, process_env(), out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_lapis, m) {
  m.doc() = "LAPIS core bindings";

  static py::exception<Error> base(m, "LapisError", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<NotFound>(m, "NotFound", base.ptr());
  py::register_exception<Conflict>(m, "Conflict", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<StorageError>(m, "StorageError", base.ptr());

  m.def("ingest", &py_ingest, py::arg("corpus"), py::arg("out_dir"), py::arg("max_tokens") = 256);
  m.def("build_index", &py_build_index, py::arg("index_dir"), py::arg("provider") = "hash",
        py::arg("dim") = 256);
  m.def("build_prompt", &build_prompt_text, py::arg("strategy"), py::arg("context"),
        py::arg("hypothesis"), py::arg("premises") = py::none(), py::arg("exemplars") = py::none(),
        py::arg("seed") = 0);
  m.def("parse_response", &parse, py::arg("raw"));
  m.def("render_answer", &render, py::arg("assessment"), py::arg("rationale"));
  m.def("metrics", &metrics, py::arg("labels"), py::arg("predictions"), py::arg("macro") = false);
  m.def("cli", &run_cli, py::arg("args"));

  py::class_<PyRetriever>(m, "Retriever")
      .def(py::init<const std::string&>(), py::arg("index_dir"))
      .def("retrieve", &PyRetriever::retrieve, py::arg("context"), py::arg("hypothesis"),
           py::arg("k") = kDefaultTopK)
      .def_property_readonly("size", &PyRetriever::size)
      .def_property_readonly("search_count", &PyRetriever::search_count)
      .def_property_readonly("provider_id", &PyRetriever::provider_id);

  py::class_<PySessions>(m, "Sessions")
      .def(py::init<const std::string&, const PyRetriever&, const std::string&, std::size_t,
                    const std::optional<std::string>&>(),
           py::arg("store"), py::arg("retriever"), py::arg("mock_script"), py::arg("k") = kDefaultTopK,
           py::arg("exemplars") = py::none())
      .def("create", &PySessions::create, py::arg("title") = "")
      .def("add_context", &PySessions::add_context, py::arg("session_id"), py::arg("delta"))
      .def("submit", &PySessions::submit, py::arg("session_id"), py::arg("step_id"),
           py::arg("hypothesis"), py::arg("strategy") = py::none())
      .def("close", &PySessions::close, py::arg("session_id"))
      .def("get", &PySessions::get, py::arg("session_id"))
      .def("list", &PySessions::list);
}
