// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "taxon/config.hpp"
#include "taxon/errors.hpp"
#include "taxon/grpo.hpp"
#include "taxon/metrics.hpp"
#include "taxon/orchestrator.hpp"
#include "taxon/response.hpp"
#include "taxon/taxonomy.hpp"

namespace py = pybind11;
using namespace taxon;

namespace {

std::vector<EvalRecord> records_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  return read_records(in);
}

py::dict report_dict(const std::string& records_jsonl) {
  const auto records = records_from_jsonl(records_jsonl);
  const auto j = report_to_json(compute_report(records));
  return py::module_::import("json").attr("loads")(j.dump());
}

py::list train_curve(std::size_t steps, std::size_t group_size, double beta, double learning_rate, std::uint64_t seed,
                     std::size_t contexts) {
  grpo::GrpoConfig c;
  c.steps = steps;
  c.group_size = group_size;
  c.beta = beta;
  c.learning_rate = learning_rate;
  c.seed = seed;
  c.contexts = contexts;
  grpo::TrainResult r;
  {
    py::gil_scoped_release release;
    r = grpo::train_toy(c, grpo::make_task(contexts, seed));
  }
  py::list out;
  for (const auto& p : r.curve) {
    py::dict row;
    row["step"] = p.step;
    row["mean_reward"] = p.mean_reward;
    row["mean_kl"] = p.mean_kl;
    row["objective"] = p.objective;
    out.append(row);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hierarchical taxonomic classification toolkit";
  m.attr("__version__") = std::string(tool_version());

  static py::exception<Error> error(m, "TaxonError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<Taxonomy>(m, "Taxonomy")
      .def_static("parse", &Taxonomy::parse, py::arg("csv"))
      .def_static("load", &Taxonomy::load_file, py::arg("path"))
      .def("ancestor_path", &Taxonomy::ancestor_path, py::arg("leaf"))
      .def("level_label_set", &Taxonomy::level_label_set, py::arg("level"))
      .def("leaves", &Taxonomy::leaves)
      .def("is_leaf", &Taxonomy::is_leaf, py::arg("label"))
      .def("depth", &Taxonomy::depth, py::arg("leaf"))
      .def_property_readonly("level_names", &Taxonomy::level_names)
      .def("to_csv", &Taxonomy::to_csv);

  py::class_<ParsedResponse>(m, "ParsedResponse")
      .def_readonly("well_formed", &ParsedResponse::well_formed)
      .def_readonly("think", &ParsedResponse::think)
      .def_readonly("answer", &ParsedResponse::answer);

  m.def("parse_tagged", &parse_tagged, py::arg("raw"));
  m.def("serialize_tagged", &serialize_tagged, py::arg("think"), py::arg("answer"));
  m.def(
      "extract_choice",
      [](const std::string& answer, const std::vector<std::pair<char, std::string>>& options) {
        std::vector<Option> opts;
        for (const auto& [letter, label] : options) opts.push_back({letter, label});
        return extract_choice(answer, opts);
      },
      py::arg("answer"), py::arg("options"), "Options are (letter, label) pairs; returns the letter or None.");
  m.def("format_reward", &grpo::format_reward, py::arg("raw"));
  m.def(
      "advantages", [](const std::vector<double>& rewards, double std_floor) { return grpo::advantages(rewards, std_floor); },
      py::arg("rewards"), py::arg("std_floor") = 1e-8);
  m.def("report", &report_dict, py::arg("records_jsonl"), "Metrics for records.jsonl contents.");
  m.def("train_toy", &train_curve, py::arg("steps") = 300, py::arg("group_size") = 8, py::arg("beta") = 0.4,
        py::arg("learning_rate") = 1.0, py::arg("seed") = 0, py::arg("contexts") = 8,
        "Runs the toy GRPO loop and returns the curve as a list of dicts.");
}
