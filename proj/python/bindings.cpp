// Python surface: documents, reports and configs cross the boundary as JSON
// text; the package wrapper turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "docre/cli.hpp"
#include "docre/config.hpp"
#include "docre/error.hpp"
#include "docre/graph.hpp"
#include "docre/synth.hpp"
#include "docre/trainer.hpp"

namespace py = pybind11;
using namespace docre;
using nlohmann::json;

namespace {

std::vector<Document> parse_docs(const std::vector<std::string>& records) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < records.size(); ++i) docs.push_back(document_from_json(json::parse(records[i]), i + 1));
  return docs;
}

TrainConfig make_config(const std::map<std::string, std::string>& overrides) {
  TrainConfig c;
  for (const auto& [k, v] : overrides) c.set(k, v);
  c.validate();
  return c;
}

struct PyModel {
  Model model;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  std::vector<std::string> log;
};

}  // namespace

PYBIND11_MODULE(_docre, m) {
  static py::exception<Error> error(m, "DocreError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error((std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("config_text", [](const std::map<std::string, std::string>& overrides) {
    return make_config(overrides).to_text();
  });

  m.def(
      "gen_synth",
      [](std::size_t entities, std::size_t triples, std::size_t docs, double pct_inter, double pct_coref_only,
         std::uint64_t seed, std::uint64_t kb_seed) {
        const ToyKB kb = gen_kb(entities, triples, kb_seed);
        const SynthCorpus c = gen_corpus(kb, docs, pct_inter, pct_coref_only, seed);
        std::vector<std::string> out;
        for (const auto& d : c.documents) out.push_back(document_to_json(d).dump());
        return py::make_tuple(out, c.truth_json().dump(), kb.to_json().dump());
      },
      py::arg("entities"), py::arg("triples"), py::arg("docs"), py::arg("pct_inter"), py::arg("pct_coref_only"),
      py::arg("seed"), py::arg("kb_seed"));

  m.def("graph_report", [](const std::string& record, const std::map<std::string, std::string>& overrides) {
    const TrainConfig c = make_config(overrides);
    const Document d = merge_entities(document_from_json(json::parse(record), 1));
    return graph_report(d, build_graph(d, graph_options(c))).dump();
  });

  py::class_<PyModel>(m, "Model")
      .def_readonly("best_epoch", &PyModel::best_epoch)
      .def_readonly("best_dev_f1", &PyModel::best_dev_f1)
      .def_readonly("log", &PyModel::log)
      .def_property_readonly("parameter_count", [](const PyModel& p) { return p.model.parameter_count(); })
      .def("evaluate",
           [](const PyModel& p, const std::vector<std::string>& docs) {
             py::gil_scoped_release release;
             return evaluate(p.model, parse_docs(docs)).to_json().dump();
           })
      .def("save", [](const PyModel& p, const std::string& dir) {
        save_checkpoint(dir, p.model, {p.best_epoch, p.best_dev_f1});
      });

  m.def("train", [](const std::vector<std::string>& train_docs, const std::vector<std::string>& dev_docs,
                    const std::map<std::string, std::string>& overrides) {
    const TrainConfig c = make_config(overrides);
    const auto tr = parse_docs(train_docs);
    const auto dv = parse_docs(dev_docs);
    py::gil_scoped_release release;
    TrainResult r = train(tr, dv, c, c.seed);
    PyModel out{std::move(r.model), r.best_epoch, r.best_dev_f1, {}};
    for (const auto& e : r.log) out.log.push_back(e.to_json().dump());
    return out;
  });

  m.def("load", [](const std::string& dir) {
    LoadedCheckpoint c = load_checkpoint(dir);
    return PyModel{std::move(c.model), c.info.best_epoch, c.info.dev_f1, {}};
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
