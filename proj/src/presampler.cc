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

#include "promptlab/presampler.h"

#include <algorithm>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "promptlab/corpus.h"
#include "promptlab/random.h"
#include "promptlab/strings.h"

namespace promptlab::presample {
namespace {

using tasks::InputSlot;
using tasks::OutputKind;

bool produces(TaskKind task, OutputKind kind) {
  const auto& outs = tasks::layout(task).outputs;
  return std::find(outs.begin(), outs.end(), kind) != outs.end();
}

void append_sentences(std::vector<Sentence>& into,
                      const std::vector<Sentence>& extra) {
  std::unordered_set<std::string> seen;
  for (const auto& s : into) seen.insert(s.text);
  for (const auto& s : extra) {
    if (seen.insert(s.text).second) into.push_back({s.text, into.size() + 1});
  }
}

}  // namespace

GenerationParse parse_generation(std::string_view text, TaskKind task) {
  std::string clean(text);
  for (const auto& tok : tasks::find_token_like(text)) {
    if (!tasks::is_special_token(tok)) {
      throw ParseError("unknown special token '" + tok + "' in generation",
                       std::string(text));
    }
    for (std::size_t p; (p = clean.find(tok)) != std::string::npos;) {
      clean.erase(p, tok.size());
    }
  }

  GenerationParse out;
  const auto& outs = tasks::layout(task).outputs;
  std::vector<std::string_view> content;
  for (std::string_view line : split(clean, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (outs.front() == OutputKind::kMetadata) {
      for (auto& e : prompt::parse_metadata(line).entries) {
        out.meta.push_back(std::move(e));
      }
    } else if (auto entries = prompt::parse_metadata_line(line)) {
      for (auto& e : *entries) out.meta.push_back(std::move(e));
    } else {
      content.push_back(line);
    }
  }
  for (std::size_t i = 0; i < content.size(); ++i) {
    switch (outs[std::min(i, outs.size() - 1)]) {
      case OutputKind::kTags:
        prompt::merge_tags(out.tags, prompt::parse_tags(content[i]));
        break;
      case OutputKind::kSentences:
        append_sentences(out.sentences, prompt::split_sentences(content[i]));
        break;
      case OutputKind::kMetadata:
        break;
    }
  }
  return out;
}

std::string build_task_prompt(TaskKind task, const StructuredPrompt& input,
                              const LengthClass& length) {
  const auto& lay = tasks::layout(task);
  std::vector<tasks::ContextLine> context;
  if (lay.tag_context && !input.tags.empty()) {
    context.push_back({"tag", prompt::join_tags(input.tags)});
  }
  if (lay.long_context && !input.nl.empty()) {
    context.push_back({"long", prompt::join_sentences(input.nl)});
  }
  if (lay.short_context && !input.nl.empty()) {
    context.push_back({"short", prompt::join_sentences(input.nl)});
  }
  std::string in;
  if (lay.input == InputSlot::kTags) in = prompt::join_tags(input.tags);
  if (lay.input == InputSlot::kSentences) in = prompt::join_sentences(input.nl);
  return tasks::render_head(input.meta, context, length.kind, task, in);
}

TaskResult run_task(GenerationBackend& backend, TaskKind task,
                    const StructuredPrompt& input, const LengthClass& length,
                    std::uint64_t seed, const SamplingOptions& sampling) {
  if (!tasks::inference_supported(task, !input.tags.empty(),
                                  !input.nl.empty())) {
    throw UnsupportedTaskError("input lacks the fields task " +
                               std::string(tasks::task_name(task)) + " needs");
  }
  GenRequest req;
  req.prompt_text = build_task_prompt(task, input, length);
  req.max_new_units = sampling.max_new_units;
  req.stop_markers = sampling.stop_markers;
  req.temperature = sampling.temperature;
  req.seed = seed;

  TaskResult result;
  GenResponse resp = backend.generate(req);
  GenerationParse parsed = parse_generation(resp.text, task);
  result.step = {task, std::move(req), std::move(resp)};

  if (produces(task, OutputKind::kTags)) {
    auto& tags = result.delta.tags;
    tags = input.tags;
    result.overflow = tags.size() > length.max_tags;
    std::vector<Tag> fresh;
    std::unordered_set<std::string> seen;
    for (const auto& t : tags) seen.insert(t.text());
    for (const auto& t : parsed.tags) {
      if (!seen.insert(t.text()).second) continue;
      if (tags.size() < length.max_tags) {
        tags.push_back(t);
      } else {
        result.overflow = true;
      }
    }
  }
  if (produces(task, OutputKind::kSentences)) {
    auto& nl = result.delta.nl;
    append_sentences(nl, input.nl);
    if (nl.size() > length.max_sentences) result.overflow = true;
    std::unordered_set<std::string> seen;
    for (const auto& s : nl) seen.insert(s.text);
    for (const auto& s : parsed.sentences) {
      if (!seen.insert(s.text).second) continue;
      if (nl.size() < length.max_sentences) {
        nl.push_back({s.text, nl.size() + 1});
      } else {
        result.overflow = true;
      }
    }
  }
  result.delta.meta = std::move(parsed.meta);
  return result;
}

AggregateResult aggregate(const std::vector<Tag>& tags,
                          const std::vector<Sentence>& sentences,
                          const std::vector<MetadataEntry>& meta,
                          const AggregateOptions& options) {
  AggregateResult out;
  for (const auto& e : meta) {
    if (std::find(out.prompt.meta.begin(), out.prompt.meta.end(), e) ==
        out.prompt.meta.end()) {
      out.prompt.meta.push_back(e);
    }
  }
  prompt::merge_tags(out.prompt.tags, tags);
  const std::size_t keep =
      std::max(options.length.max_tags, options.protected_tags);
  if (out.prompt.tags.size() > options.length.max_tags) out.overflow = true;
  if (out.prompt.tags.size() > keep) {
    out.prompt.tags.erase(out.prompt.tags.begin() + static_cast<std::ptrdiff_t>(keep),
                          out.prompt.tags.end());
  }
  std::vector<Sentence> nl;
  append_sentences(nl, sentences);
  if (nl.size() > options.length.max_sentences) {
    out.overflow = true;
    nl = corpus::truncate_nl(nl, options.length, options.seed);
    for (std::size_t i = 0; i < nl.size(); ++i) nl[i].index = i + 1;
  }
  out.prompt.nl = std::move(nl);
  return out;
}

CycleResult run_cycle(GenerationBackend& backend,
                      const StructuredPrompt& user_input,
                      const LengthClass& length, std::uint64_t seed,
                      const CycleOptions& options) {
  const std::string serialized = prompt::serialize_prompt(user_input);
  if (!tasks::find_token_like(serialized).empty() ||
      serialized.find("|>") != std::string::npos) {
    throw InputError("user prompt contains special-token syntax");
  }
  const bool has_tags = !user_input.tags.empty();
  const bool has_nl = !user_input.nl.empty();
  if (!has_tags && !has_nl) {
    throw UnsupportedTaskError("user prompt has neither tags nor sentences");
  }

  CycleResult result;
  std::vector<MetadataEntry> meta = user_input.meta;
  auto step = [&](TaskKind task, const StructuredPrompt& in) {
    try {
      TaskResult r = run_task(backend, task, in, length,
                              derive_seed(seed, result.steps.size()),
                              options.sampling);
      result.steps.push_back(r.step);
      result.overflow = result.overflow || r.overflow;
      meta.insert(meta.end(), r.delta.meta.begin(), r.delta.meta.end());
      return r.delta;
    } catch (const Error& e) {
      throw CycleError(std::string(tasks::task_name(task)) + " failed: " + e.what(),
                       result.steps, std::current_exception());
    }
  };

  std::vector<Tag> t_d;
  std::vector<Sentence> s_d;
  if (has_tags) {
    t_d = step(TaskKind::kShortToTag, {user_input.meta, user_input.tags, {}}).tags;
    std::vector<Sentence> short_nl = user_input.nl;
    if (has_nl && options.mode == CycleMode::kThreeStep) {
      short_nl = step(TaskKind::kTagToLong, {user_input.meta, t_d, short_nl}).nl;
    }
    StructuredPrompt last =
        step(TaskKind::kShortToTagToLong, {user_input.meta, t_d, short_nl});
    t_d = std::move(last.tags);
    s_d = std::move(last.nl);
  } else {
    StructuredPrompt last =
        step(TaskKind::kShortToLongToTag, {user_input.meta, {}, user_input.nl});
    t_d = std::move(last.tags);
    s_d = std::move(last.nl);
  }

  AggregateOptions agg;
  agg.length = length;
  agg.protected_tags = user_input.tags.size();
  agg.seed = derive_seed(seed, "aggregate");
  AggregateResult final = aggregate(t_d, s_d, meta, agg);
  result.detailed_tags = std::move(t_d);
  result.detailed_nl = std::move(s_d);
  result.final = std::move(final.prompt);
  result.overflow = result.overflow || final.overflow;
  return result;
}

std::string cycle_to_json(const StructuredPrompt& input,
                          const CycleResult& result, bool include_timings) {
  nlohmann::ordered_json j;
  j["input"] = prompt::serialize_prompt(input);
  j["final_prompt"] = prompt::serialize_prompt(result.final);
  j["overflow"] = result.overflow;
  auto steps = nlohmann::ordered_json::array();
  for (const auto& s : result.steps) {
    nlohmann::ordered_json st;
    st["task"] = tasks::task_name(s.task);
    st["prompt"] = s.request.prompt_text;
    st["response"] = s.response.text;
    st["finished"] = s.response.finished;
    if (include_timings) {
      st["elapsed_ms"] =
          std::chrono::duration<double, std::milli>(s.response.elapsed).count();
    }
    steps.push_back(std::move(st));
  }
  j["steps"] = std::move(steps);
  return j.dump();
}

}  // namespace promptlab::presample
