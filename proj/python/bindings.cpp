#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hvaudit/agreement.hpp"
#include "hvaudit/audit.hpp"
#include "hvaudit/classifier.hpp"
#include "hvaudit/corpus.hpp"
#include "hvaudit/encoder.hpp"
#include "hvaudit/error.hpp"
#include "hvaudit/evaluation.hpp"
#include "hvaudit/io.hpp"
#include "hvaudit/pipeline.hpp"
#include "hvaudit/taxonomy.hpp"

namespace py = pybind11;
using namespace hvaudit;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string dump(const json& j) { return j.dump(); }

ReliabilityMatrix matrix_of(const std::vector<std::vector<std::optional<LabelId>>>& cells) {
  std::vector<std::string> units, coders;
  for (std::size_t u = 0; u < cells.size(); ++u) units.push_back(std::to_string(u));
  const std::size_t width = cells.empty() ? 0 : cells.front().size();
  for (std::size_t a = 0; a < width; ++a) coders.push_back(std::to_string(a));
  auto m = ReliabilityMatrix::with_shape(units, coders);
  m.cells = cells;
  return m;
}

std::string corpus_json(const IngestResult& r) {
  json items = json::array();
  for (const auto& p : r.corpus.items)
    items.push_back({{"pref_id", p.pref_id}, {"source", to_string(p.source)}, {"role", to_string(p.role)}, {"text", p.text}});
  json skips = json::array();
  for (const auto& s : r.skips) skips.push_back({{"line", s.line_no}, {"reason", s.reason}});
  return dump({{"items", items}, {"skips", skips}});
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<Error> error_type(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(error_type.ptr())(e.what());
      exc.attr("code") = py::str(std::string(error_code_name(e.code())));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.attr("version") = kToolVersion;

  m.def("taxonomy_json", [] { return dump(canonical_taxonomy().to_json()); });
  m.def("taxonomy_fingerprint", [] { return io::hex64(canonical_taxonomy().fingerprint()); });

  m.def("krippendorff_alpha", [](const std::vector<std::vector<std::optional<LabelId>>>& cells) {
    return krippendorff_alpha_nominal(matrix_of(cells));
  });
  m.def("percent_agreement", [](const std::vector<std::vector<std::optional<LabelId>>>& cells) {
    return percent_agreement(matrix_of(cells));
  });

  m.def("tokenize", [](const std::string& text, std::size_t max_len) { return tokenize(text, max_len).tokens; },
        py::arg("text"), py::arg("max_len") = 128);
  m.def("class_weights", [](const std::vector<LabelId>& labels, std::size_t n) { return class_weights(labels, n).values; });
  m.def("metrics_json", [](const std::vector<LabelId>& golds, const std::vector<LabelId>& preds, std::size_t n) {
    const auto cm = confusion(golds, preds, n);
    json j = metrics(cm).to_json();
    j["confusion"] = cm.to_json();
    return dump(j);
  });

  m.def("ingest_json", [](const std::string& source, const std::vector<std::filesystem::path>& paths) {
    if (source == "hh-rlhf" && paths.size() == 2) return corpus_json(ingest_hh_rlhf(paths[0], paths[1]));
    if (source == "webgpt" && paths.size() == 1) return corpus_json(ingest_webgpt(paths[0]));
    if (source == "alpaca" && paths.size() == 1) return corpus_json(ingest_alpaca(paths[0]));
    throw Error(ErrorCode::kConfigInvalid, "unknown source or wrong number of paths: " + source);
  });

  py::class_<LinearSoftmaxModel>(m, "Model")
      .def_static("load", &LinearSoftmaxModel::load)
      .def_property_readonly("num_classes", &LinearSoftmaxModel::num_classes)
      .def("predict", [](const LinearSoftmaxModel& model, const std::string& text) {
        const auto p = predict(model, text);
        return py::make_tuple(p.label, p.probabilities);
      });

  m.def("run_pipeline", [](const std::filesystem::path& config, std::optional<std::filesystem::path> out) {
    auto cfg = PipelineConfig::from_json(json::parse(io::read_file(config)), config.parent_path());
    if (out) cfg.out_dir = *out;
    py::gil_scoped_release release;
    return run_pipeline(cfg);
  }, py::arg("config"), py::arg("out") = std::nullopt);
}
