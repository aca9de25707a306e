#include "llmvs/aggregator.hpp"
#include "llmvs/config.hpp"
#include "llmvs/dataset.hpp"
#include "llmvs/evaluation.hpp"
#include "llmvs/knapsack.hpp"
#include "llmvs/kts.hpp"
#include "llmvs/local_scorer.hpp"
#include "llmvs/prompt.hpp"
#include "llmvs/rank_correlation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace llmvs;

namespace {

std::vector<Shot> to_shots(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::vector<Shot> shots;
  for (auto [s, e] : pairs) shots.push_back(Shot{s, e});
  return shots;
}

std::vector<std::pair<std::size_t, std::size_t>> from_shots(const std::vector<Shot>& shots) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& s : shots) out.emplace_back(s.start, s.end);
  return out;
}

AggregatorConfig make_config(const py::dict& kw) {
  AggregatorConfig c;
  for (auto [k, v] : kw) {
    const auto key = k.cast<std::string>();
    if (key == "projection_width") c.projection_width = v.cast<int>();
    else if (key == "num_blocks") c.num_blocks = v.cast<int>();
    else if (key == "num_heads") c.num_heads = v.cast<int>();
    else if (key == "ffn_width") c.ffn_width = v.cast<int>();
    else if (key == "use_query") c.use_query = v.cast<bool>();
    else if (key == "use_answer") c.use_answer = v.cast<bool>();
    else if (key == "positional_encoding") c.positional_encoding = positional_encoding_from_string(v.cast<std::string>());
    else if (key == "head") c.head = head_kind_from_string(v.cast<std::string>());
    else if (key == "pool_hidden_layer") c.pool_hidden_layer = v.cast<bool>();
    else if (key == "learning_rate") c.learning_rate = v.cast<double>();
    else if (key == "weight_decay") c.weight_decay = v.cast<double>();
    else if (key == "epochs") c.epochs = v.cast<int>();
    else if (key == "seed") c.seed = v.cast<std::uint64_t>();
    else throw py::key_error("unknown aggregator option '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_llmvs, m) {
  m.doc() = "Core operations of the llmvs video summarization library";

  py::register_exception<Error>(m, "LlmvsError", PyExc_RuntimeError);

  py::class_<WindowSpec>(m, "WindowSpec")
      .def_readonly("center", &WindowSpec::center)
      .def_readonly("lo", &WindowSpec::lo)
      .def_readonly("hi", &WindowSpec::hi)
      .def_readonly("center_position", &WindowSpec::center_position)
      .def("__len__", &WindowSpec::length);

  m.def("build_window", &build_window, py::arg("t"), py::arg("w"), py::arg("T"));
  m.def(
      "render_prompt",
      [](const std::vector<std::string>& captions, std::size_t t, std::size_t w) {
        const auto p = render_prompt(CaptionSequence{captions, CaptionSource::loaded},
                                     build_window(t, w, captions.size()));
        return py::make_tuple(p.text, p.query_span.begin, p.query_span.end);
      },
      py::arg("captions"), py::arg("t"), py::arg("w") = 7,
      "Rendered prompt text and the [begin, end) character span of its query section.");
  m.def("parse_score", [](const std::string& s) { return parse_score(s); }, py::arg("answer"));

  m.def(
      "kendall_tau",
      [](const std::vector<double>& x, const std::vector<double>& y) { return kendall_tau(x, y); },
      py::arg("x"), py::arg("y"), "Tau-b; None for constant input.");
  m.def(
      "spearman_rho",
      [](const std::vector<double>& x, const std::vector<double>& y) { return spearman_rho(x, y); },
      py::arg("x"), py::arg("y"));

  m.def(
      "knapsack_select",
      [](const std::vector<double>& values, const std::vector<std::size_t>& lengths, std::size_t budget) {
        const auto s = knapsack_select(values, lengths, budget);
        return py::make_tuple(s.selected, s.total_value, std::vector<int>(s.mask.begin(), s.mask.end()));
      },
      py::arg("values"), py::arg("lengths"), py::arg("budget"),
      "(selected shot indices, total value, frame mask)");
  m.def("summary_budget", &summary_budget, py::arg("T"));

  m.def(
      "kts_segment",
      [](const Matrix& features, std::size_t max_segments, double penalty) {
        return from_shots(kts_segment(features, max_segments, penalty).boundaries);
      },
      py::arg("features"), py::arg("max_segments"), py::arg("penalty") = 1.0);
  m.def(
      "shot_scores",
      [](const std::vector<double>& scores, const std::vector<std::pair<std::size_t, std::size_t>>& shots) {
        return shot_scores(ScoreSeries{scores, false}, to_shots(shots));
      },
      py::arg("scores"), py::arg("shots"));

  m.def(
      "make_folds",
      [](const std::vector<std::string>& ids, std::size_t k, std::uint64_t seed) {
        std::vector<VideoRecord> records(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) records[i].video_id = ids[i];
        return make_folds(records, k, seed).assignments;
      },
      py::arg("video_ids"), py::arg("k"), py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::vector<Matrix>& pooled, const std::vector<std::vector<double>>& targets, py::kwargs kw) {
        if (pooled.size() != targets.size()) throw py::value_error("pooled and targets differ in length");
        const auto cfg = make_config(kw);
        std::vector<TrainingExample> ex;
        for (std::size_t i = 0; i < pooled.size(); ++i) ex.push_back(TrainingExample{pooled[i], targets[i]});
        TrainResult result;
        {
          py::gil_scoped_release release;
          result = train(ex, cfg);
        }
        return py::make_tuple(py::cast(new Checkpoint{cfg, std::move(result.params)}, py::return_value_policy::take_ownership),
                              result.loss_history);
      },
      py::arg("pooled"), py::arg("targets"),
      "Train on per-video T x D max-pooled embeddings. Returns (model, loss history).");

  py::class_<Checkpoint>(m, "Model")
      .def("predict",
           [](const Checkpoint& c, const Matrix& pooled) {
             return predict_pooled(pooled, c.params, c.config).scores;
           },
           py::arg("pooled"))
      .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(c.params, c.config, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); })
      .def_property_readonly("parameter_count", [](const Checkpoint& c) { return c.params.parameter_count(); });
}
