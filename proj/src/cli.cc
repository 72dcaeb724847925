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

#include "promptlab/cli.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "promptlab/backend.h"
#include "promptlab/corpus.h"
#include "promptlab/errors.h"
#include "promptlab/preference.h"
#include "promptlab/presampler.h"
#include "promptlab/prompt.h"
#include "promptlab/random.h"
#include "promptlab/strings.h"
#include "promptlab/survey.h"
#include "promptlab/survey_server.h"

namespace promptlab::cli {
namespace {

using nlohmann::json;

// Missing or contradictory arguments that CLI11 cannot express.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::map<std::string, std::set<std::string>> kConfigSections = {
    {"forge", {"tasks", "lengths", "samples_per_record", "p_drop", "p_end"}},
    {"presample",
     {"backend", "endpoint", "length", "mode", "jobs", "temperature",
      "max_new_units", "timeout_ms", "max_attempts"}},
    {"eval", {"bins", "batch_size", "endpoint"}},
    {"pref", {"base", "metric"}},
    {"serve", {"host", "port", "pairs", "votes", "state", "images", "ui"}},
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw InputError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw InputError("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed" || key == "log_level") continue;
    auto sec = kConfigSections.find(key);
    if (sec == kConfigSections.end()) {
      throw InputError("unknown config key '" + key + "'");
    }
    if (!value.is_object()) {
      throw InputError("config section '" + key + "' must be an object");
    }
    for (const auto& [k, v] : value.items()) {
      if (!sec->second.count(k)) {
        throw InputError("unknown config key '" + key + "." + k + "'");
      }
    }
  }
  return j;
}

template <typename T>
T parse_text(const std::string& s, const std::string& where) {
  if constexpr (std::is_same_v<T, std::string>) {
    return s;
  } else {
    T v{};
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) {
      throw InputError(where + " has invalid value '" + s + "'");
    }
    return v;
  }
}

class Resolver {
 public:
  Resolver(json file, const EnvLookup& env) : file_(std::move(file)), env_(env) {}

  template <typename T>
  T get(const CLI::Option* flag, const T& flag_value, const char* env_name,
        const std::string& section, const std::string& key, T fallback) const {
    if (flag != nullptr && flag->count() > 0) return flag_value;
    if (env_name != nullptr) {
      if (auto e = env_(env_name)) return parse_text<T>(*e, env_name);
    }
    const json* node = &file_;
    if (!section.empty()) {
      if (!file_.contains(section)) return fallback;
      node = &file_.at(section);
    }
    if (!node->contains(key)) return fallback;
    const std::string where = section.empty() ? key : section + "." + key;
    try {
      return node->at(key).get<T>();
    } catch (const json::exception&) {
      throw InputError("config value '" + where + "' has the wrong type");
    }
  }

  std::optional<std::string> env(const char* name) const { return env_(name); }

 private:
  json file_;
  const EnvLookup& env_;
};

// Installs a logger writing to `err` for the duration of one dispatch.
class LogScope {
 public:
  explicit LogScope(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("promptlab", sink);
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  ~LogScope() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

void set_log_level(const std::string& name) {
  static const std::set<std::string> kLevels = {
      "trace", "debug", "info", "warn", "warning", "error", "critical", "off"};
  if (!kLevels.count(name)) throw InputError("unknown log level '" + name + "'");
  spdlog::set_level(spdlog::level::from_str(name == "warning" ? "warn" : name));
}

// Runs `fn` against the named file, or `fallback` when the path is empty
// or "-".
template <typename F>
void with_output(const std::string& path, std::ostream& fallback, F&& fn) {
  if (path.empty() || path == "-") {
    fn(fallback);
    fallback.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open output file '" + path + "'");
  fn(f);
  f.flush();
  if (!f) throw Error("failed writing '" + path + "'");
}

template <typename F>
auto with_input(const std::string& path, F&& fn) {
  if (path.empty() || path == "-") return fn(std::cin);
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open input file '" + path + "'");
  return fn(f);
}

// --- forge ------------------------------------------------------------------

struct ForgeArgs {
  std::string input = "-";
  std::string out;
  std::string tasks;
  std::string lengths;
  std::size_t samples_per_record = 1;
  double p_drop = 0.3;
  double p_end = 0.3;
  CLI::Option* tasks_opt = nullptr;
  CLI::Option* lengths_opt = nullptr;
  CLI::Option* spr_opt = nullptr;
  CLI::Option* p_drop_opt = nullptr;
  CLI::Option* p_end_opt = nullptr;
};

int run_forge(const ForgeArgs& a, const Resolver& r, std::uint64_t seed,
              std::ostream& out) {
  corpus::ForgeConfig config;
  const std::string tasks =
      r.get<std::string>(a.tasks_opt, a.tasks, nullptr, "forge", "tasks", "all");
  config.tasks = corpus::ForgeConfig::parse_task_list(tasks);
  if (config.tasks.empty()) throw InputError("no tasks enabled");
  const std::string lengths = r.get<std::string>(a.lengths_opt, a.lengths,
                                                 nullptr, "forge", "lengths", "");
  if (!lengths.empty()) {
    config.length_weights = corpus::ForgeConfig::parse_length_weights(lengths);
  }
  config.samples_per_record = r.get<std::size_t>(
      a.spr_opt, a.samples_per_record, nullptr, "forge", "samples_per_record", 1);
  config.augment.p_drop =
      r.get<double>(a.p_drop_opt, a.p_drop, nullptr, "forge", "p_drop", 0.3);
  config.augment.p_end =
      r.get<double>(a.p_end_opt, a.p_end, nullptr, "forge", "p_end", 0.3);
  for (double p : {config.augment.p_drop, config.augment.p_end}) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("probabilities must lie in [0, 1]");
  }
  if (config.samples_per_record == 0) {
    throw InputError("samples_per_record must be >= 1");
  }

  corpus::ForgeStats stats;
  with_output(a.out, out, [&](std::ostream& o) {
    stats = with_input(a.input, [&](std::istream& in) {
      return corpus::forge_corpus(in, o, config, seed);
    });
  });
  spdlog::info("forged {} samples from {} records, {} skipped", stats.samples,
               stats.records, stats.skipped);
  return kExitOk;
}

// --- presample --------------------------------------------------------------

struct PresampleArgs {
  std::string input = "-";
  std::string out;
  std::string backend;
  std::string endpoint;
  std::string length;
  std::string mode;
  std::size_t jobs = 1;
  double temperature = 0.8;
  int max_new_units = 512;
  int timeout_ms = 30000;
  int max_attempts = 3;
  bool timings = false;
  CLI::Option* backend_opt = nullptr;
  CLI::Option* endpoint_opt = nullptr;
  CLI::Option* length_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;
  CLI::Option* temperature_opt = nullptr;
  CLI::Option* max_new_units_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;
  CLI::Option* attempts_opt = nullptr;
};

struct PromptInput {
  std::string id;
  prompt::StructuredPrompt prompt;
};

// JSON lines carry {"id", "prompt"} or {"id", "tags", "nl"}; any other line
// is a single-line prompt.
std::vector<PromptInput> read_prompt_inputs(std::istream& in) {
  std::vector<PromptInput> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = trim(line);
    if (t.empty()) continue;
    PromptInput p;
    p.id = std::to_string(out.size());
    try {
      if (t.front() == '{') {
        json j = json::parse(t);
        if (j.contains("id")) {
          p.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
        }
        if (j.contains("prompt")) {
          p.prompt = prompt::parse_prompt(j.at("prompt").get<std::string>());
        } else {
          if (j.contains("tags")) {
            const auto& tags = j["tags"];
            if (tags.is_array()) {
              std::vector<std::string> parts = tags.get<std::vector<std::string>>();
              p.prompt.tags = prompt::parse_tags(join(parts, ","));
            } else {
              p.prompt.tags = prompt::parse_tags(tags.get<std::string>());
            }
          }
          if (j.contains("nl")) {
            p.prompt.nl = prompt::split_sentences(j["nl"].get<std::string>());
          }
        }
      } else {
        p.prompt = prompt::parse_prompt(t);
      }
    } catch (const json::exception& e) {
      throw InputError("prompts line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("prompts line " + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

int run_presample(const PresampleArgs& a, const Resolver& r, std::uint64_t seed,
                  std::ostream& out) {
  const std::string backend_name = r.get<std::string>(
      a.backend_opt, a.backend, "PROMPTLAB_BACKEND", "presample", "backend", "mock");
  const std::string length_name = r.get<std::string>(
      a.length_opt, a.length, "PROMPTLAB_LENGTH", "presample", "length", "long");
  const std::string mode_name = r.get<std::string>(a.mode_opt, a.mode, nullptr,
                                                   "presample", "mode", "two_step");
  const std::size_t jobs = r.get<std::size_t>(a.jobs_opt, a.jobs, "PROMPTLAB_JOBS",
                                              "presample", "jobs", 1);
  auto kind = prompt::parse_length_kind(length_name);
  if (!kind) throw InputError("unknown length class '" + length_name + "'");
  const prompt::LengthClass& length = prompt::LengthClass::of(*kind);
  presample::CycleOptions cycle;
  if (mode_name == "two_step") {
    cycle.mode = presample::CycleMode::kTwoStep;
  } else if (mode_name == "three_step") {
    cycle.mode = presample::CycleMode::kThreeStep;
  } else {
    throw InputError("mode must be two_step or three_step, got '" + mode_name + "'");
  }
  cycle.sampling.temperature = r.get<double>(a.temperature_opt, a.temperature,
                                             nullptr, "presample", "temperature", 0.8);
  cycle.sampling.max_new_units = r.get<int>(a.max_new_units_opt, a.max_new_units,
                                            nullptr, "presample", "max_new_units", 512);
  if (jobs < 1) throw InputError("jobs must be >= 1");

  std::unique_ptr<presample::GenerationBackend> backend;
  if (backend_name == "mock") {
    backend = std::make_unique<presample::MockBackend>();
  } else if (backend_name == "http") {
    HttpOptions o;
    o.endpoint = r.get<std::string>(a.endpoint_opt, a.endpoint, "PROMPTLAB_ENDPOINT",
                                    "presample", "endpoint", "");
    if (o.endpoint.empty()) throw UsageError("--endpoint is required with --backend http");
    o.auth_token = r.env("PROMPTLAB_API_TOKEN").value_or("");
    o.timeout = std::chrono::milliseconds(r.get<int>(
        a.timeout_opt, a.timeout_ms, nullptr, "presample", "timeout_ms", 30000));
    o.max_attempts = r.get<int>(a.attempts_opt, a.max_attempts, nullptr,
                                "presample", "max_attempts", 3);
    o.max_in_flight = jobs;
    backend = std::make_unique<presample::HttpBackend>(o);
  } else {
    throw InputError("backend must be mock or http, got '" + backend_name + "'");
  }

  const std::vector<PromptInput> inputs = with_input(a.input, read_prompt_inputs);
  std::vector<std::string> lines(inputs.size());
  std::vector<int> codes(inputs.size(), kExitOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      const PromptInput& in = inputs[i];
      nlohmann::ordered_json line;
      line["id"] = in.id;
      try {
        auto res = presample::run_cycle(*backend, in.prompt, length,
                                        derive_seed(seed, in.id), cycle);
        auto body = nlohmann::ordered_json::parse(
            presample::cycle_to_json(in.prompt, res, a.timings));
        for (auto& [k, v] : body.items()) line[k] = v;
      } catch (const InputError& e) {
        line["error"] = e.what();
        codes[i] = kExitInput;
      } catch (const presample::CycleError& e) {
        line["error"] = e.what();
        codes[i] = kExitRuntime;
      } catch (const std::exception& e) {
        line["error"] = e.what();
        codes[i] = kExitRuntime;
      }
      if (line.contains("error")) {
        spdlog::error("prompt '{}': {}", in.id, line["error"].get<std::string>());
      }
      lines[i] = line.dump();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(jobs, inputs.size()); ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& th : pool) th.join();

  with_output(a.out, out, [&](std::ostream& o) {
    for (const auto& l : lines) o << l << '\n';
  });
  int code = kExitOk;
  for (int c : codes) code = std::max(code, c);
  spdlog::info("presampled {} prompts", inputs.size());
  return code;
}

// --- eval -------------------------------------------------------------------

void write_matrix_csv(std::ostream& o, const Eigen::MatrixXd& k,
                      const std::vector<std::string>& labels) {
  char buf[40];
  if (!labels.empty()) {
    o << "id";
    for (const auto& l : labels) o << ',' << l;
    o << '\n';
  }
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    if (!labels.empty()) o << labels[static_cast<std::size_t>(i)] << ',';
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", k(i, j));
      o << (j ? "," : "") << buf;
    }
    o << '\n';
  }
}

nlohmann::ordered_json summary_json(const metrics::ScoreSummary& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  j["histogram"] = {{"edges", s.histogram.edges}, {"counts", s.histogram.counts}};
  return j;
}

std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view t = trim(line);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// --- serve ------------------------------------------------------------------

struct ServeArgs {
  std::string host;
  int port = 8080;
  std::string pairs, votes, state, images, ui;
  CLI::Option *host_opt = nullptr, *port_opt = nullptr, *pairs_opt = nullptr,
              *votes_opt = nullptr, *state_opt = nullptr, *images_opt = nullptr,
              *ui_opt = nullptr;
};

int run_serve(const ServeArgs& a, const Resolver& r, std::uint64_t seed,
              std::ostream& out) {
  const std::string host =
      r.get<std::string>(a.host_opt, a.host, nullptr, "serve", "host", "127.0.0.1");
  const int port = r.get<int>(a.port_opt, a.port, nullptr, "serve", "port", 8080);
  const std::string pairs =
      r.get<std::string>(a.pairs_opt, a.pairs, nullptr, "serve", "pairs", "");
  const std::string votes =
      r.get<std::string>(a.votes_opt, a.votes, nullptr, "serve", "votes", "");
  if (pairs.empty()) throw UsageError("serve needs --pairs");
  if (votes.empty()) throw UsageError("serve needs --votes");
  survey::StoreOptions so;
  so.vote_log_path = votes;
  so.state_path =
      r.get<std::string>(a.state_opt, a.state, nullptr, "serve", "state", votes + ".state.json");
  so.seed = seed;
  survey::ServerOptions sv;
  sv.images_dir = r.get<std::string>(a.images_opt, a.images, nullptr, "serve", "images", "");
  sv.ui_dir = r.get<std::string>(a.ui_opt, a.ui, nullptr, "serve", "ui", "");
  if (port < 0 || port > 65535) throw InputError("port out of range");

  survey::SurveyStore store(survey::read_pairs_file(pairs), so);
  survey::SurveyServer server(store, sv);

  // Signals are taken synchronously by a waiter thread so stop() never runs
  // inside a handler.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigset_t old;
  pthread_sigmask(SIG_BLOCK, &set, &old);
  const int bound = server.bind(host, port);
  out << "serving " << store.pool_size() << " pairs on http://" << host << ":"
      << bound << std::endl;
  std::atomic<bool> done{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    if (!done) spdlog::info("received signal {}, shutting down", sig);
    server.stop();
  });
  const bool ok = server.listen();
  done = true;
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  std::string s = buf;
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::vector<std::string> decile_filter(std::span<const metrics::ScoredItem> items,
                                       Select which, double fraction) {
  if (items.empty()) throw InputError("decile filter needs at least one score");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InputError("fraction must lie in (0, 1]");
  }
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return which == Select::kTop ? items[x].score > items[y].score
                                 : items[x].score < items[y].score;
  });
  // The small slack keeps products like 0.3 * 10 from rounding up to 4.
  const double exact = fraction * static_cast<double>(items.size());
  auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  k = std::clamp<std::size_t>(k, 1, items.size());
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(items[order[i]].id);
  return out;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Prompt pre-sampling workbench", "promptlab"};
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_path;
  std::string log_level;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "Base random seed");
  CLI::Option* log_opt =
      app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  // forge
  auto* forge = app.add_subcommand("forge", "Build training corpora");
  forge->require_subcommand(1);
  auto* forge_build =
      forge->add_subcommand("build", "Turn caption records into training samples");
  ForgeArgs fa;
  forge_build->add_option("--input", fa.input, "Caption records, JSONL ('-' for stdin)");
  forge_build->add_option("--out", fa.out, "Output JSONL (default stdout)");
  fa.tasks_opt = forge_build->add_option("--tasks", fa.tasks,
                                         "Task list with optional weights, e.g. all or short_to_tag:2,tag_to_long");
  fa.lengths_opt = forge_build->add_option("--lengths", fa.lengths,
                                           "Length class weights, e.g. short:1,long:2");
  fa.spr_opt = forge_build->add_option("--samples-per-record", fa.samples_per_record);
  fa.p_drop_opt = forge_build->add_option("--p-drop", fa.p_drop, "Per-entry metadata drop probability");
  fa.p_end_opt = forge_build->add_option("--p-end", fa.p_end, "Probability of moving metadata to the end");

  // presample
  auto* presample = app.add_subcommand("presample", "Refine prompts with a text model");
  presample->require_subcommand(1);
  auto* presample_run = presample->add_subcommand("run", "Run the refinement cycle per prompt");
  PresampleArgs pa;
  presample_run->add_option("--input", pa.input, "Prompts, one per line or JSONL ('-' for stdin)");
  presample_run->add_option("--out", pa.out, "Output JSONL (default stdout)");
  pa.backend_opt = presample_run->add_option("--backend", pa.backend, "mock or http");
  pa.endpoint_opt = presample_run->add_option("--endpoint", pa.endpoint, "HTTP completion endpoint");
  pa.length_opt = presample_run->add_option("--length", pa.length,
                                            "very_short, short, long or very_long");
  pa.mode_opt = presample_run->add_option("--mode", pa.mode, "two_step or three_step");
  pa.jobs_opt = presample_run->add_option("--jobs", pa.jobs, "Prompts processed in parallel");
  pa.temperature_opt = presample_run->add_option("--temperature", pa.temperature);
  pa.max_new_units_opt = presample_run->add_option("--max-new-units", pa.max_new_units);
  pa.timeout_opt = presample_run->add_option("--timeout-ms", pa.timeout_ms);
  pa.attempts_opt = presample_run->add_option("--max-attempts", pa.max_attempts);
  presample_run->add_flag("--timings", pa.timings, "Include per-step wall times");

  // eval
  auto* eval = app.add_subcommand("eval", "Embedding and score metrics");
  eval->require_subcommand(1);
  std::string embeddings, emb_a, emb_b, scores, eval_out, select = "top", images, scorer_endpoint;
  double fraction = 0.1;
  std::size_t bins = 10, batch_size = 16;
  auto* vendi = eval->add_subcommand("vendi", "Vendi diversity score");
  vendi->add_option("--embeddings", embeddings, "CSV or JSONL embeddings")->required();
  auto* frechet = eval->add_subcommand("frechet", "Frechet distance between two embedding sets");
  frechet->add_option("--a", emb_a)->required();
  frechet->add_option("--b", emb_b)->required();
  auto* simmatrix = eval->add_subcommand("simmatrix", "Cosine similarity matrix as CSV");
  simmatrix->add_option("--embeddings", embeddings)->required();
  simmatrix->add_option("--out", eval_out);
  auto* summary = eval->add_subcommand("summary", "Descriptive statistics of scores");
  summary->add_option("--scores", scores)->required();
  summary->add_option("--out", eval_out);
  CLI::Option* bins_opt = summary->add_option("--bins", bins);
  auto* decile = eval->add_subcommand("decile", "Ids of the top or bottom fraction of scores");
  decile->add_option("--scores", scores)->required();
  decile->add_option("--select", select)->check(CLI::IsMember({"top", "bottom"}));
  decile->add_option("--fraction", fraction);
  decile->add_option("--out", eval_out);
  auto* score = eval->add_subcommand("score", "Score images with an external scorer");
  score->add_option("--images", images, "Image references, one per line")->required();
  CLI::Option* scorer_opt = score->add_option("--endpoint", scorer_endpoint);
  CLI::Option* batch_opt = score->add_option("--batch-size", batch_size);
  score->add_option("--out", eval_out);

  // pref
  auto* pref_cmd = app.add_subcommand("pref", "Pairwise preference analytics");
  pref_cmd->require_subcommand(1);
  std::string votes_path, pref_out, metric_name, method_a, method_b;
  double base = pref::kDefaultBase;
  auto* elo = pref_cmd->add_subcommand("elo", "Tallies, win-rate matrices and ELO ratings");
  elo->add_option("--votes", votes_path)->required();
  CLI::Option* metric_opt =
      elo->add_option("--metric", metric_name, "adherence, quality, aesthetic, overall or all");
  CLI::Option* base_opt = elo->add_option("--base", base);
  elo->add_option("--out", pref_out);
  auto* ptest = pref_cmd->add_subcommand("test", "Significance of one method pair");
  ptest->add_option("--votes", votes_path)->required();
  ptest->add_option("--method-a", method_a)->required();
  ptest->add_option("--method-b", method_b)->required();
  CLI::Option* test_metric_opt = ptest->add_option("--metric", metric_name);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the survey HTTP service");
  ServeArgs sa;
  sa.host_opt = serve->add_option("--host", sa.host);
  sa.port_opt = serve->add_option("--port", sa.port);
  sa.pairs_opt = serve->add_option("--pairs", sa.pairs, "Pair pool, JSONL");
  sa.votes_opt = serve->add_option("--votes", sa.votes, "Append-only vote log");
  sa.state_opt = serve->add_option("--state", sa.state, "Serving-state snapshot");
  sa.images_opt = serve->add_option("--images", sa.images, "Directory served at /images");
  sa.ui_opt = serve->add_option("--ui", sa.ui, "Directory served at /");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  LogScope log_scope(err);
  try {
    const Resolver r(load_config(config_path), env);
    set_log_level(r.get<std::string>(log_opt, log_level, "PROMPTLAB_LOG_LEVEL", "",
                                     "log_level", "info"));
    const std::uint64_t s =
        r.get<std::uint64_t>(seed_opt, seed, "PROMPTLAB_SEED", "", "seed", 0);

    if (forge_build->parsed()) return run_forge(fa, r, s, out);
    if (presample_run->parsed()) return run_presample(pa, r, s, out);

    if (vendi->parsed()) {
      out << format_number(metrics::vendi_score(metrics::read_embeddings_file(embeddings)))
          << '\n';
      return kExitOk;
    }
    if (frechet->parsed()) {
      out << format_number(metrics::frechet_distance(metrics::read_embeddings_file(emb_a),
                                                     metrics::read_embeddings_file(emb_b)))
          << '\n';
      return kExitOk;
    }
    if (simmatrix->parsed()) {
      auto e = metrics::read_embeddings_file(embeddings);
      auto k = metrics::cosine_similarity_matrix(e);
      with_output(eval_out, out,
                  [&](std::ostream& o) { write_matrix_csv(o, k, e.labels()); });
      return kExitOk;
    }
    if (summary->parsed()) {
      auto items = metrics::read_scores_file(scores);
      std::vector<double> values;
      for (const auto& it : items) values.push_back(it.score);
      const auto n = r.get<std::size_t>(bins_opt, bins, nullptr, "eval", "bins", 10);
      auto sj = summary_json(metrics::summarize(values, n));
      with_output(eval_out, out, [&](std::ostream& o) { o << sj.dump(2) << '\n'; });
      return kExitOk;
    }
    if (decile->parsed()) {
      auto items = metrics::read_scores_file(scores);
      auto ids = decile_filter(items, select == "top" ? Select::kTop : Select::kBottom,
                               fraction);
      with_output(eval_out, out, [&](std::ostream& o) {
        for (const auto& id : ids) o << id << '\n';
      });
      return kExitOk;
    }
    if (score->parsed()) {
      HttpOptions o;
      o.endpoint = r.get<std::string>(scorer_opt, scorer_endpoint,
                                      "PROMPTLAB_SCORER_ENDPOINT", "eval", "endpoint", "");
      if (o.endpoint.empty()) throw UsageError("eval score needs --endpoint");
      o.auth_token = r.env("PROMPTLAB_API_TOKEN").value_or("");
      metrics::HttpScorerClient client(o);
      auto refs = with_input(images, read_lines);
      auto got = metrics::score_images(
          client, refs, r.get<std::size_t>(batch_opt, batch_size, nullptr, "eval", "batch_size", 16));
      std::size_t missing = 0;
      with_output(eval_out, out, [&](std::ostream& os) {
        for (std::size_t i = 0; i < refs.size(); ++i) {
          nlohmann::ordered_json j;
          j["id"] = refs[i];
          if (got[i].score) {
            j["score"] = *got[i].score;
          } else {
            ++missing;
            j["score"] = nullptr;
            j["reason"] = got[i].reason;
          }
          os << j.dump() << '\n';
        }
      });
      if (missing) spdlog::warn("{} of {} images have no score", missing, refs.size());
      return kExitOk;
    }

    if (elo->parsed()) {
      const std::string m =
          r.get<std::string>(metric_opt, metric_name, nullptr, "pref", "metric", "all");
      std::optional<pref::Metric> metric;
      if (m != "all") {
        metric = pref::parse_metric(m);
        if (!metric) throw InputError("unknown metric '" + m + "'");
      }
      const double b = r.get<double>(base_opt, base, nullptr, "pref", "base", pref::kDefaultBase);
      const auto votes = pref::read_votes_file(votes_path);
      with_output(pref_out, out,
                  [&](std::ostream& o) { o << pref::results_text(votes, metric, b); });
      return kExitOk;
    }
    if (ptest->parsed()) {
      const std::string m = r.get<std::string>(test_metric_opt, metric_name, nullptr,
                                               "pref", "metric", "overall");
      std::optional<pref::Metric> metric;
      if (m != "all") {
        metric = pref::parse_metric(m);
        if (!metric) throw InputError("unknown metric '" + m + "'");
      }
      if (method_a == method_b) throw InputError("--method-a and --method-b must differ");
      const auto tallies = pref::tabulate(pref::read_votes_file(votes_path), metric);
      const bool forward = method_a < method_b;
      auto it = tallies.find(forward ? pref::MethodPair{method_a, method_b}
                                     : pref::MethodPair{method_b, method_a});
      if (it == tallies.end()) {
        throw InputError("no votes compare '" + method_a + "' and '" + method_b + "'");
      }
      const pref::PairTally t = forward ? it->second : it->second.swapped();
      nlohmann::ordered_json j;
      j["method_a"] = method_a;
      j["method_b"] = method_b;
      j["metric"] = m;
      j["wins"] = t.wins_a;
      j["ties"] = t.ties;
      j["losses"] = t.wins_b;
      j["adjusted_win_rate"] = pref::adjusted_win_rate(t);
      if (t.wins_a + t.wins_b > 0) {
        const auto mc = pref::mcnemar_test(t.wins_a, t.wins_b);
        j["binomial_p"] = pref::binomial_test(t.wins_a, t.wins_b);
        j["mcnemar_chi2"] = mc.chi2;
        j["mcnemar_p"] = mc.p;
      } else {
        j["binomial_p"] = nullptr;
        j["mcnemar_chi2"] = nullptr;
        j["mcnemar_p"] = nullptr;
      }
      out << j.dump(2) << '\n';
      return kExitOk;
    }
    if (serve->parsed()) return run_serve(sa, r, s, out);
    throw UsageError("no command given");
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for more information.\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace promptlab::cli
