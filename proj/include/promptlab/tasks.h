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

// Special tokens and the per-task text layout shared by corpus forging and
// inference-time prompting.
//
// Every sequence has the shape
//
//   <metadata lines, or <|empty|>>
//   <context lines: "tag: ...", "long: ...", "short: ...">   (task-dependent)
//   <|length|><|task|><input text>
//   <target lines>
//
// Inference prompts stop after the token line's trailing newline; the model
// continues with the target lines.

#ifndef PROMPTLAB_TASKS_H_
#define PROMPTLAB_TASKS_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptlab/prompt.h"

namespace promptlab::tasks {

enum class TaskKind {
  kGenMeta,
  kTagToLong,
  kShortToTag,
  kLongToTag,
  kShortToLong,
  kShortToTagToLong,
  kShortToLongToTag,
  kTagToShortToLong,
};

inline constexpr std::array<TaskKind, 8> kAllTasks = {
    TaskKind::kGenMeta,          TaskKind::kTagToLong,
    TaskKind::kShortToTag,       TaskKind::kLongToTag,
    TaskKind::kShortToLong,      TaskKind::kShortToTagToLong,
    TaskKind::kShortToLongToTag, TaskKind::kTagToShortToLong,
};

inline constexpr std::string_view kEmptyToken = "<|empty|>";

std::string_view task_name(TaskKind task);
std::optional<TaskKind> parse_task(std::string_view name);
std::string task_token(TaskKind task);
std::string length_token(prompt::LengthKind kind);

// The thirteen reserved tokens: placeholder, eight tasks, four lengths.
const std::array<std::string, 13>& special_tokens();
bool is_special_token(std::string_view s);

// Every "<|...|>" substring in order of appearance.
std::vector<std::string> find_token_like(std::string_view text);

enum class InputSlot { kNone, kTags, kSentences };
enum class OutputKind { kTags, kSentences, kMetadata };

struct TaskLayout {
  TaskKind task;
  bool tag_context = false;    // "tag: <all tags>" line
  bool long_context = false;   // "long: <all sentences>" line
  bool short_context = false;  // "short: <sentences>" line
  InputSlot input = InputSlot::kNone;
  std::vector<OutputKind> outputs;  // one target line per entry
};

const TaskLayout& layout(TaskKind task);

// True when a prompt with these parts can be fed to the task at inference.
bool inference_supported(TaskKind task, bool has_tags, bool has_sentences);

// True when a caption with these parts can produce a training target.
bool training_supported(TaskKind task, bool has_tags, bool has_sentences,
                        bool has_meta);

struct ContextLine {
  std::string_view label;  // "tag", "long" or "short"
  std::string text;
};

// Everything up to and including the newline after the token line.
std::string render_head(const std::vector<prompt::MetadataEntry>& meta,
                        const std::vector<ContextLine>& context,
                        prompt::LengthKind length, TaskKind task,
                        std::string_view input);

}  // namespace promptlab::tasks

#endif  // PROMPTLAB_TASKS_H_
