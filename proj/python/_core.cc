// Copyright 2026 The promptlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Python bindings. Structured results cross the boundary as JSON text and
// are decoded on the Python side.

#include <sstream>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "promptlab/backend.h"
#include "promptlab/corpus.h"
#include "promptlab/errors.h"
#include "promptlab/metrics.h"
#include "promptlab/preference.h"
#include "promptlab/presampler.h"
#include "promptlab/prompt.h"
#include "promptlab/tasks.h"

namespace py = pybind11;
using namespace promptlab;

namespace {

const prompt::LengthClass& length_of(const std::string& name) {
  auto kind = prompt::parse_length_kind(name);
  if (!kind) throw InputError("unknown length class: " + name);
  return prompt::LengthClass::of(*kind);
}

std::vector<prompt::Tag> to_tags(const std::vector<std::string>& texts) {
  std::vector<prompt::Tag> out;
  for (const auto& t : texts) out.emplace_back(t);
  return out;
}

std::vector<prompt::Sentence> to_sentences(const std::vector<std::string>& texts) {
  std::vector<prompt::Sentence> out;
  for (std::size_t i = 0; i < texts.size(); ++i) out.push_back({texts[i], i + 1});
  return out;
}

std::string prompt_json(const prompt::StructuredPrompt& p) {
  nlohmann::ordered_json j;
  j["meta"] = nlohmann::ordered_json::array();
  for (const auto& e : p.meta) j["meta"].push_back({{"key", e.key()}, {"content", e.content}});
  j["tags"] = nlohmann::ordered_json::array();
  for (const auto& t : p.tags) j["tags"].push_back(t.text());
  j["nl"] = nlohmann::ordered_json::array();
  for (const auto& s : p.nl) j["nl"].push_back(s.text);
  return j.dump();
}

py::tuple pair_tuple(const corpus::PromptPair& p) {
  return py::make_tuple(p.simple, p.complete);
}

std::optional<pref::Metric> metric_of(const std::optional<std::string>& name) {
  if (!name || *name == "all") return std::nullopt;
  auto m = pref::parse_metric(*name);
  if (!m) throw InputError("unknown metric: " + *name);
  return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "promptlab native core";

  static py::exception<Error> error(m, "Error", PyExc_RuntimeError);
  static py::exception<InputError> input_error(m, "InputError", error.ptr());
  static py::exception<ParseError> parse_error(m, "ParseError", error.ptr());
  static py::exception<NumericalError> numerical_error(m, "NumericalError", error.ptr());
  static py::exception<BackendError> backend_error(m, "BackendError", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    } catch (const NumericalError& e) {
      py::set_error(numerical_error, e.what());
    } catch (const BackendError& e) {
      py::set_error(backend_error, e.what());
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  m.def("normalize_tag", &prompt::normalize_tag);
  m.def("parse_tags", [](const std::string& text) {
    std::vector<std::string> out;
    for (const auto& t : prompt::parse_tags(text)) out.push_back(t.text());
    return out;
  });
  m.def("split_sentences", [](const std::string& text) {
    std::vector<std::string> out;
    for (const auto& s : prompt::split_sentences(text)) out.push_back(s.text);
    return out;
  });
  m.def("parse_prompt_json", [](const std::string& text) {
    return prompt_json(prompt::parse_prompt(text));
  });
  m.def("normalize_prompt", [](const std::string& text) {
    return prompt::serialize_prompt(prompt::parse_prompt(text));
  });
  m.def("length_caps", [](const std::string& name) {
    const auto& l = length_of(name);
    return py::make_tuple(l.max_tags, l.max_sentences);
  });
  m.def("special_tokens", [] {
    const auto& t = tasks::special_tokens();
    return std::vector<std::string>(t.begin(), t.end());
  });

  m.def("build_tag_pair", [](const std::vector<std::string>& tags, std::size_t k,
                             std::uint64_t seed) {
    auto t = to_tags(tags);
    return pair_tuple(corpus::build_tag_pair(t, k, seed));
  }, py::arg("tags"), py::arg("m"), py::arg("seed"));
  m.def("build_nl_pair", [](const std::vector<std::string>& sentences, std::size_t k,
                            std::uint64_t seed) {
    auto s = to_sentences(sentences);
    return pair_tuple(corpus::build_nl_pair(s, k, seed));
  }, py::arg("sentences"), py::arg("m"), py::arg("seed"));
  m.def("forge_sample_json", [](const std::string& record_json, const std::string& task,
                                const std::string& length, std::uint64_t seed) {
    auto kind = tasks::parse_task(task);
    if (!kind) throw InputError("unknown task: " + task);
    auto record = corpus::parse_record(record_json);
    return corpus::sample_to_json(
        corpus::make_training_sample(record, *kind, length_of(length), seed));
  }, py::arg("record_json"), py::arg("task"), py::arg("length"), py::arg("seed"));

  m.def("run_cycle_json", [](const std::string& text, const std::string& length,
                             std::uint64_t seed, const std::string& mode) {
    presample::CycleOptions opts;
    if (mode == "three_step") {
      opts.mode = presample::CycleMode::kThreeStep;
    } else if (mode != "two_step") {
      throw InputError("unknown cycle mode: " + mode);
    }
    presample::MockBackend backend;
    auto input = prompt::parse_prompt(text);
    py::gil_scoped_release release;
    auto result = presample::run_cycle(backend, input, length_of(length), seed, opts);
    return presample::cycle_to_json(input, result);
  }, py::arg("prompt"), py::arg("length") = "long", py::arg("seed") = 0,
     py::arg("mode") = "two_step");

  using Rows = std::vector<std::vector<double>>;
  m.def("vendi_score", [](const Rows& rows) {
    return metrics::vendi_score(metrics::EmbeddingSet(rows));
  });
  m.def("frechet_distance", [](const Rows& a, const Rows& b) {
    return metrics::frechet_distance(metrics::EmbeddingSet(a), metrics::EmbeddingSet(b));
  });
  m.def("summarize", [](const std::vector<double>& values, std::size_t bins) {
    auto s = metrics::summarize(values, bins);
    py::dict d;
    d["count"] = s.count;
    d["mean"] = s.mean;
    d["std"] = s.std;
    d["min"] = s.min;
    d["q1"] = s.q1;
    d["median"] = s.median;
    d["q3"] = s.q3;
    d["max"] = s.max;
    d["edges"] = s.histogram.edges;
    d["counts"] = s.histogram.counts;
    return d;
  }, py::arg("values"), py::arg("bins") = 10);

  m.def("adjusted_win_rate", [](long wins, long ties, long losses) {
    pref::PairTally t;
    t.wins_a = wins;
    t.ties = ties;
    t.wins_b = losses;
    return pref::adjusted_win_rate(t);
  });
  m.def("elo_difference", &pref::elo_difference);
  m.def("binomial_test", &pref::binomial_test);
  m.def("mcnemar_test", [](long wins, long losses) {
    auto r = pref::mcnemar_test(wins, losses);
    return py::make_tuple(r.chi2, r.p);
  });
  m.def("results_text", [](const std::string& votes_jsonl,
                           const std::optional<std::string>& metric, double base) {
    std::istringstream in(votes_jsonl);
    return pref::results_text(pref::read_votes(in), metric_of(metric), base);
  }, py::arg("votes_jsonl"), py::arg("metric") = py::none(),
     py::arg("base") = pref::kDefaultBase);
}
