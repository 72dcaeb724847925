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

#include "promptlab/corpus.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "promptlab/errors.h"
#include "promptlab/random.h"
#include "promptlab/strings.h"

namespace promptlab::corpus {
namespace {

using tasks::InputSlot;
using tasks::OutputKind;

void reject_token_syntax(std::string_view text, std::string_view what) {
  if (text.find("<|") != std::string_view::npos ||
      text.find("|>") != std::string_view::npos) {
    throw InputError(std::string(what) + " contains special-token syntax");
  }
}

std::string meta_line(std::span<const MetadataEntry> meta) {
  std::string out;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    if (i) out += ", ";
    out += meta[i].serialize();
  }
  return out;
}

}  // namespace

PromptPair build_tag_pair(std::span<const Tag> tags, std::size_t m,
                          std::uint64_t seed) {
  if (m < 1 || m > tags.size()) {
    throw PreconditionError("build_tag_pair: m must lie in [1, " +
                            std::to_string(tags.size()) + "]");
  }
  std::vector<Tag> shuffled(tags.begin(), tags.end());
  Rng(seed).shuffle(shuffled);
  PromptPair pair;
  pair.kind = PairKind::kTag;
  pair.simple = prompt::join_tags(std::span<const Tag>(shuffled).first(m));
  pair.complete = prompt::join_tags(shuffled);
  return pair;
}

PromptPair nl_pair_from_selection(std::span<const Sentence> sentences,
                                  std::span<const std::size_t> chosen) {
  if (chosen.empty() || chosen.front() != 0) {
    throw PreconditionError("NL selection must include the first sentence");
  }
  std::vector<Sentence> simple;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    if (chosen[i] >= sentences.size() || (i && chosen[i] <= chosen[i - 1])) {
      throw PreconditionError("NL selection must be increasing and in range");
    }
    simple.push_back(sentences[chosen[i]]);
  }
  PromptPair pair;
  pair.kind = PairKind::kNl;
  pair.simple = prompt::join_sentences(simple);
  pair.complete = pair.simple + " " + prompt::join_sentences(sentences);
  return pair;
}

PromptPair build_nl_pair(std::span<const Sentence> sentences, std::size_t m,
                         std::uint64_t seed) {
  const std::size_t n = sentences.size();
  if (m < 1 || m >= n) {
    throw PreconditionError("build_nl_pair: m must lie in [1, n) with n = " +
                            std::to_string(n));
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen{0};
  for (std::size_t i : rng.sample_sorted(n - 1, m - 1)) chosen.push_back(i + 1);
  return nl_pair_from_selection(sentences, chosen);
}

MetadataAugment augment_metadata(std::span<const MetadataEntry> meta,
                                 std::uint64_t seed,
                                 const AugmentProbs& probs) {
  Rng rng(seed);
  MetadataAugment out;
  for (const auto& e : meta) {
    if (rng.bernoulli(probs.p_drop)) {
      ++out.dropped;
    } else {
      out.entries.push_back(e);
    }
  }
  const bool to_end = rng.bernoulli(probs.p_end);
  if (out.entries.empty() && !meta.empty()) {
    out.placement = MetaPlacement::kDropped;
  } else {
    out.placement = to_end && !out.entries.empty() ? MetaPlacement::kEnd
                                                   : MetaPlacement::kFront;
  }
  return out;
}

std::vector<Tag> augment_content_tags(std::span<const Tag> tags,
                                      const LengthClass& length,
                                      std::uint64_t seed) {
  std::vector<Tag> out(tags.begin(), tags.end());
  Rng(seed).shuffle(out);
  if (out.size() > length.max_tags) {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(length.max_tags),
              out.end());
  }
  return out;
}

std::vector<Sentence> truncate_nl(std::span<const Sentence> sentences,
                                  const LengthClass& length,
                                  std::uint64_t seed) {
  const std::size_t n = sentences.size();
  const std::size_t cap = length.max_sentences;
  if (n <= cap) return {sentences.begin(), sentences.end()};
  std::vector<Sentence> out{sentences.front()};
  if (cap < 2) return out;
  Rng rng(seed);
  for (std::size_t i : rng.sample_sorted(n - 2, cap - 2)) {
    out.push_back(sentences[i + 1]);
  }
  out.push_back(sentences.back());
  return out;
}

TrainingSample make_training_sample(const CaptionRecord& record, TaskKind task,
                                    const LengthClass& length,
                                    std::uint64_t seed,
                                    const AugmentProbs& probs) {
  if (!tasks::training_supported(task, !record.tags.empty(),
                                 !record.sentences.empty(),
                                 !record.meta.empty())) {
    throw UnsupportedTaskError("record '" + record.id + "' cannot feed task " +
                               std::string(tasks::task_name(task)));
  }
  const tasks::TaskLayout& lay = tasks::layout(task);

  std::vector<Tag> tags =
      augment_content_tags(record.tags, length, derive_seed(seed, "tags"));
  std::vector<Sentence> sents =
      truncate_nl(record.sentences, length, derive_seed(seed, "nl"));

  Rng pick(derive_seed(seed, "m"));
  PromptPair tag_pair{"", "", PairKind::kTag};
  if (!tags.empty()) {
    std::size_t m = tags.size() >= 2 ? pick.between(1, tags.size() - 1) : 1;
    tag_pair = build_tag_pair(tags, m, derive_seed(seed, "tag_pair"));
  }
  PromptPair nl_pair{"", "", PairKind::kNl};
  if (sents.size() >= 2) {
    std::size_t m = pick.between(1, sents.size() - 1);
    nl_pair = build_nl_pair(sents, m, derive_seed(seed, "nl_pair"));
  } else if (sents.size() == 1) {
    nl_pair.simple = nl_pair.complete = sents.front().text;
  }

  std::vector<MetadataEntry> front;
  std::vector<MetadataEntry> tail;
  if (task != TaskKind::kGenMeta) {
    MetadataAugment aug =
        augment_metadata(record.meta, derive_seed(seed, "meta"), probs);
    (aug.placement == MetaPlacement::kEnd ? tail : front) =
        std::move(aug.entries);
  }

  std::vector<tasks::ContextLine> context;
  if (lay.tag_context && !tags.empty()) {
    context.push_back({"tag", tag_pair.complete});
  }
  if (lay.long_context && !sents.empty()) {
    context.push_back({"long", prompt::join_sentences(sents)});
  }
  if (lay.short_context && !sents.empty()) {
    context.push_back({"short", nl_pair.simple});
  }

  std::string input;
  if (lay.input == InputSlot::kTags) input = tag_pair.simple;
  if (lay.input == InputSlot::kSentences) input = nl_pair.simple;

  std::vector<std::string> targets;
  // Two sentence outputs mean "short, then long".
  const bool short_then_long =
      std::count(lay.outputs.begin(), lay.outputs.end(),
                 OutputKind::kSentences) == 2;
  bool sentence_seen = false;
  for (OutputKind k : lay.outputs) {
    switch (k) {
      case OutputKind::kTags:
        targets.push_back(tag_pair.complete);
        break;
      case OutputKind::kSentences:
        targets.push_back(short_then_long && !sentence_seen ? nl_pair.simple
                                                            : nl_pair.complete);
        sentence_seen = true;
        break;
      case OutputKind::kMetadata:
        targets.push_back(meta_line(record.meta));
        break;
    }
  }

  TrainingSample sample;
  sample.task = task;
  sample.length = length.kind;
  sample.source_id = record.id;
  sample.text = tasks::render_head(front, context, length.kind, task, input);
  sample.text += join(targets, "\n");
  for (const auto& e : tail) {
    sample.text += '\n';
    sample.text += e.serialize();
  }
  return sample;
}

CaptionRecord parse_record(std::string_view json_line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("record is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InputError("record is not an object");
  CaptionRecord r;
  if (!j.contains("id") || !j["id"].is_string() ||
      j["id"].get<std::string>().empty()) {
    throw InputError("record lacks a non-empty string id");
  }
  r.id = j["id"].get<std::string>();
  if (j.contains("tags")) {
    if (!j["tags"].is_array()) throw InputError("tags must be an array");
    std::vector<Tag> raw;
    for (const auto& t : j["tags"]) {
      if (!t.is_string()) throw InputError("tag must be a string");
      const auto& s = t.get_ref<const std::string&>();
      reject_token_syntax(s, "tag");
      auto tag = Tag::try_make(s);
      if (!tag) throw InputError("invalid tag '" + s + "'");
      raw.push_back(std::move(*tag));
    }
    prompt::merge_tags(r.tags, raw);
  }
  if (j.contains("sentences")) {
    if (!j["sentences"].is_array()) {
      throw InputError("sentences must be an array");
    }
    for (const auto& s : j["sentences"]) {
      if (!s.is_string()) throw InputError("sentence must be a string");
      const auto& text = s.get_ref<const std::string&>();
      reject_token_syntax(text, "sentence");
      for (auto& piece : prompt::split_sentences(text)) {
        piece.index = r.sentences.size() + 1;
        r.sentences.push_back(std::move(piece));
      }
    }
  }
  if (j.contains("meta")) {
    if (!j["meta"].is_object()) throw InputError("meta must be an object");
    for (const auto& [key, value] : j["meta"].items()) {
      std::vector<std::string> contents;
      if (value.is_string()) {
        contents.push_back(value.get<std::string>());
      } else if (value.is_array()) {
        for (const auto& v : value) {
          if (!v.is_string()) throw InputError("meta values must be strings");
          contents.push_back(v.get<std::string>());
        }
      } else if (value.is_number()) {
        contents.push_back(value.dump());
      } else {
        throw InputError("meta value for '" + key + "' is not a string");
      }
      for (const auto& c : contents) {
        reject_token_syntax(key, "meta key");
        reject_token_syntax(c, "meta value");
        if (c.find(',') != std::string::npos) {
          throw InputError("meta value for '" + key + "' contains a comma");
        }
        r.meta.push_back(MetadataEntry::make(key, c));
      }
    }
  }
  if (r.tags.empty() && r.sentences.empty()) {
    throw InputError("record '" + r.id + "' has neither tags nor sentences");
  }
  return r;
}

std::string sample_to_json(const TrainingSample& sample) {
  nlohmann::ordered_json j;
  j["id"] = sample.source_id;
  j["task"] = tasks::task_name(sample.task);
  j["length"] = prompt::LengthClass::of(sample.length).name();
  j["text"] = sample.text;
  return j.dump();
}

ForgeConfig ForgeConfig::all_tasks() {
  ForgeConfig c;
  for (TaskKind t : tasks::kAllTasks) c.tasks.emplace_back(t, 1.0);
  return c;
}

namespace {

std::pair<std::string_view, double> name_weight(std::string_view item) {
  item = trim(item);
  double w = 1.0;
  std::size_t colon = item.find(':');
  if (colon != std::string_view::npos) {
    std::string num(trim(item.substr(colon + 1)));
    try {
      std::size_t used = 0;
      w = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument(num);
    } catch (const std::exception&) {
      throw InputError("bad weight in '" + std::string(item) + "'");
    }
    if (!(w >= 0.0)) throw InputError("negative weight");
    item = trim(item.substr(0, colon));
  }
  return {item, w};
}

}  // namespace

std::vector<std::pair<TaskKind, double>> ForgeConfig::parse_task_list(
    std::string_view spec) {
  std::vector<std::pair<TaskKind, double>> out;
  for (std::string_view item : split(spec, ',')) {
    if (trim(item).empty()) continue;
    auto [name, w] = name_weight(item);
    if (name == "all") {
      for (TaskKind t : tasks::kAllTasks) out.emplace_back(t, w);
      continue;
    }
    auto t = tasks::parse_task(name);
    if (!t) throw InputError("unknown task '" + std::string(name) + "'");
    out.emplace_back(*t, w);
  }
  if (out.empty()) throw InputError("task list is empty");
  return out;
}

std::array<double, 4> ForgeConfig::parse_length_weights(std::string_view spec) {
  std::array<double, 4> out{};
  bool any = false;
  for (std::string_view item : split(spec, ',')) {
    if (trim(item).empty()) continue;
    auto [name, w] = name_weight(item);
    auto k = prompt::parse_length_kind(name);
    if (!k) throw InputError("unknown length class '" + std::string(name) + "'");
    out[static_cast<std::size_t>(*k)] = w;
    any = any || w > 0.0;
  }
  if (!any) throw InputError("length weights must have a positive entry");
  return out;
}

CorpusForge::CorpusForge(ForgeConfig config, std::uint64_t seed)
    : config_(std::move(config)), seed_(seed) {
  if (config_.tasks.empty()) throw InputError("no tasks enabled");
}

void CorpusForge::process(const CaptionRecord& record, const Sink& sink) {
  ++stats_.records;
  std::vector<TaskKind> eligible;
  std::vector<double> weights;
  for (const auto& [task, w] : config_.tasks) {
    if (w > 0.0 && tasks::training_supported(task, !record.tags.empty(),
                                             !record.sentences.empty(),
                                             !record.meta.empty())) {
      eligible.push_back(task);
      weights.push_back(w);
    }
  }
  if (eligible.empty()) {
    ++stats_.skipped;
    spdlog::warn("record '{}' supports none of the enabled tasks", record.id);
    return;
  }
  const std::uint64_t record_seed = derive_seed(seed_, record.id);
  for (std::size_t s = 0; s < config_.samples_per_record; ++s) {
    const std::uint64_t sample_seed = derive_seed(record_seed, s);
    Rng rng(sample_seed);
    TaskKind task = eligible[rng.weighted(weights)];
    auto kind = static_cast<LengthKind>(rng.weighted(config_.length_weights));
    sink(make_training_sample(record, task, LengthClass::of(kind),
                              derive_seed(sample_seed, "sample"),
                              config_.augment));
    ++stats_.samples;
  }
}

void CorpusForge::process_line(std::string_view line, const Sink& sink) {
  if (trim(line).empty()) return;
  CaptionRecord record;
  try {
    record = parse_record(line);
  } catch (const InputError& e) {
    ++stats_.records;
    ++stats_.skipped;
    spdlog::warn("skipping malformed record: {}", e.what());
    return;
  }
  process(record, sink);
}

ForgeStats forge_corpus(std::istream& in, std::ostream& out,
                        const ForgeConfig& config, std::uint64_t seed) {
  CorpusForge forge(config, seed);
  std::string line;
  auto sink = [&](const TrainingSample& s) { out << sample_to_json(s) << '\n'; };
  while (std::getline(in, line)) forge.process_line(line, sink);
  return forge.stats();
}

}  // namespace promptlab::corpus
