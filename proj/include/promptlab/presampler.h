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

// Inference-time prompt refinement: task prompts for a generation backend,
// continuation parsing, and the multi-step refinement cycle that turns a
// short user prompt into a detailed one.

#ifndef PROMPTLAB_PRESAMPLER_H_
#define PROMPTLAB_PRESAMPLER_H_

#include <cstdint>
#include <exception>
#include <string>
#include <vector>

#include "promptlab/backend.h"
#include "promptlab/errors.h"
#include "promptlab/prompt.h"
#include "promptlab/tasks.h"

namespace promptlab::presample {

using prompt::LengthClass;
using prompt::MetadataEntry;
using prompt::Sentence;
using prompt::StructuredPrompt;
using prompt::Tag;
using tasks::TaskKind;

struct GenerationParse {
  std::vector<Tag> tags;
  std::vector<Sentence> sentences;
  std::vector<MetadataEntry> meta;
};

// Strips the special tokens, then reads one line per task output (extra
// lines join the last output). Metadata lines in a non-metadata task are
// collected into `meta`. Unknown "<|...|>" tokens raise ParseError.
GenerationParse parse_generation(std::string_view text, TaskKind task);

struct StepLog {
  TaskKind task;
  GenRequest request;
  GenResponse response;
};

struct SamplingOptions {
  double temperature = 0.8;
  std::size_t max_new_units = 512;
  std::vector<std::string> stop_markers = default_stop_markers();
};

// The task prompt for `input`: the training layout cut after the token line.
std::string build_task_prompt(TaskKind task, const StructuredPrompt& input,
                              const LengthClass& length);

struct TaskResult {
  // Only the parts the task produces. Produced tags start with the input
  // tags; produced sentences start with the input sentences.
  StructuredPrompt delta;
  StepLog step;
  bool overflow = false;
};

TaskResult run_task(GenerationBackend& backend, TaskKind task,
                    const StructuredPrompt& input, const LengthClass& length,
                    std::uint64_t seed, const SamplingOptions& sampling = {});

struct AggregateOptions {
  LengthClass length = LengthClass::of(prompt::LengthKind::kVeryLong);
  // Leading tags that survive truncation regardless of the cap.
  std::size_t protected_tags = 0;
  std::uint64_t seed = 0;
};

struct AggregateResult {
  StructuredPrompt prompt;
  bool overflow = false;
};

// Metadata first, then de-duplicated tags in order, then de-duplicated
// sentences renumbered from 1. Caps are applied per the length class.
AggregateResult aggregate(const std::vector<Tag>& tags,
                          const std::vector<Sentence>& sentences,
                          const std::vector<MetadataEntry>& meta,
                          const AggregateOptions& options = {});

enum class CycleMode {
  kTwoStep,    // short_to_tag, then short_to_tag_to_long
  kThreeStep,  // short_to_tag, tag_to_long, short_to_tag_to_long
};

struct CycleOptions {
  CycleMode mode = CycleMode::kTwoStep;
  SamplingOptions sampling;
};

struct CycleResult {
  std::vector<Tag> detailed_tags;
  std::vector<Sentence> detailed_nl;
  StructuredPrompt final;
  bool overflow = false;
  std::vector<StepLog> steps;
};

// Any step failure aborts the cycle; the error carries the completed steps
// and the original exception.
class CycleError : public Error {
 public:
  CycleError(const std::string& what, std::vector<StepLog> steps,
             std::exception_ptr cause)
      : Error(what), steps_(std::move(steps)), cause_(std::move(cause)) {}
  const std::vector<StepLog>& steps() const { return steps_; }
  const std::exception_ptr& cause() const { return cause_; }

 private:
  std::vector<StepLog> steps_;
  std::exception_ptr cause_;
};

// Picks the task path from the available inputs:
//   tags and sentences  short_to_tag, [tag_to_long,] short_to_tag_to_long
//   tags only           short_to_tag, short_to_tag_to_long
//   sentences only      short_to_long_to_tag
// Throws UnsupportedTaskError when the input has neither tags nor sentences.
CycleResult run_cycle(GenerationBackend& backend,
                      const StructuredPrompt& user_input,
                      const LengthClass& length, std::uint64_t seed,
                      const CycleOptions& options = {});

// {"input", "final_prompt", "steps"} on one line. Step timings are included
// only when asked for, so seeded runs stay byte-reproducible.
std::string cycle_to_json(const StructuredPrompt& input,
                          const CycleResult& result,
                          bool include_timings = false);

}  // namespace promptlab::presample

#endif  // PROMPTLAB_PRESAMPLER_H_
