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

#include "promptlab/tasks.h"

#include <algorithm>

namespace promptlab::tasks {
namespace {

using OK = OutputKind;

const std::array<TaskLayout, 8>& layouts() {
  static const std::array<TaskLayout, 8> kLayouts = {{
      {TaskKind::kGenMeta, true, true, false, InputSlot::kNone, {OK::kMetadata}},
      {TaskKind::kTagToLong, true, false, false, InputSlot::kSentences,
       {OK::kSentences}},
      {TaskKind::kShortToTag, false, false, false, InputSlot::kTags,
       {OK::kTags}},
      {TaskKind::kLongToTag, false, true, false, InputSlot::kTags, {OK::kTags}},
      {TaskKind::kShortToLong, false, false, false, InputSlot::kSentences,
       {OK::kSentences}},
      {TaskKind::kShortToTagToLong, false, false, true, InputSlot::kTags,
       {OK::kTags, OK::kSentences}},
      {TaskKind::kShortToLongToTag, false, false, false, InputSlot::kSentences,
       {OK::kSentences, OK::kTags}},
      {TaskKind::kTagToShortToLong, true, false, false, InputSlot::kNone,
       {OK::kSentences, OK::kSentences}},
  }};
  return kLayouts;
}

}  // namespace

std::string_view task_name(TaskKind task) {
  switch (task) {
    case TaskKind::kGenMeta:
      return "gen_meta";
    case TaskKind::kTagToLong:
      return "tag_to_long";
    case TaskKind::kShortToTag:
      return "short_to_tag";
    case TaskKind::kLongToTag:
      return "long_to_tag";
    case TaskKind::kShortToLong:
      return "short_to_long";
    case TaskKind::kShortToTagToLong:
      return "short_to_tag_to_long";
    case TaskKind::kShortToLongToTag:
      return "short_to_long_to_tag";
    case TaskKind::kTagToShortToLong:
      return "tag_to_short_to_long";
  }
  return "";
}

std::optional<TaskKind> parse_task(std::string_view name) {
  for (TaskKind t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

std::string task_token(TaskKind task) {
  return "<|" + std::string(task_name(task)) + "|>";
}

std::string length_token(prompt::LengthKind kind) {
  return "<|" + std::string(prompt::LengthClass::of(kind).name()) + "|>";
}

const std::array<std::string, 13>& special_tokens() {
  static const std::array<std::string, 13> kTokens = [] {
    std::array<std::string, 13> t;
    std::size_t i = 0;
    t[i++] = std::string(kEmptyToken);
    for (TaskKind k : kAllTasks) t[i++] = task_token(k);
    for (const auto& c : prompt::kLengthClasses) t[i++] = length_token(c.kind);
    return t;
  }();
  return kTokens;
}

bool is_special_token(std::string_view s) {
  const auto& all = special_tokens();
  return std::find(all.begin(), all.end(), s) != all.end();
}

std::vector<std::string> find_token_like(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find("<|", pos)) != std::string_view::npos) {
    std::size_t end = text.find("|>", pos + 2);
    if (end == std::string_view::npos) {
      out.emplace_back(text.substr(pos));
      break;
    }
    out.emplace_back(text.substr(pos, end + 2 - pos));
    pos = end + 2;
  }
  return out;
}

const TaskLayout& layout(TaskKind task) {
  return layouts()[static_cast<std::size_t>(task)];
}

bool inference_supported(TaskKind task, bool has_tags, bool has_sentences) {
  switch (task) {
    case TaskKind::kGenMeta:
      return has_tags || has_sentences;
    case TaskKind::kTagToLong:
    case TaskKind::kShortToTag:
    case TaskKind::kShortToTagToLong:
    case TaskKind::kTagToShortToLong:
      return has_tags;
    case TaskKind::kLongToTag:
    case TaskKind::kShortToLong:
    case TaskKind::kShortToLongToTag:
      return has_sentences;
  }
  return false;
}

bool training_supported(TaskKind task, bool has_tags, bool has_sentences,
                        bool has_meta) {
  switch (task) {
    case TaskKind::kGenMeta:
      return has_meta && (has_tags || has_sentences);
    case TaskKind::kShortToTag:
      return has_tags;
    case TaskKind::kShortToLong:
      return has_sentences;
    case TaskKind::kTagToLong:
    case TaskKind::kLongToTag:
    case TaskKind::kShortToTagToLong:
    case TaskKind::kShortToLongToTag:
    case TaskKind::kTagToShortToLong:
      return has_tags && has_sentences;
  }
  return false;
}

std::string render_head(const std::vector<prompt::MetadataEntry>& meta,
                        const std::vector<ContextLine>& context,
                        prompt::LengthKind length, TaskKind task,
                        std::string_view input) {
  std::string out;
  if (meta.empty()) {
    out += kEmptyToken;
    out += '\n';
  }
  for (const auto& e : meta) {
    out += e.serialize();
    out += '\n';
  }
  for (const auto& c : context) {
    out += c.label;
    out += ": ";
    out += c.text;
    out += '\n';
  }
  out += length_token(length);
  out += task_token(task);
  out += input;
  out += '\n';
  return out;
}

}  // namespace promptlab::tasks
