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

// Training corpus construction: simple/complete prompt pairs, augmentation
// and serialized language-model samples.

#ifndef PROMPTLAB_CORPUS_H_
#define PROMPTLAB_CORPUS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "promptlab/prompt.h"
#include "promptlab/tasks.h"

namespace promptlab::corpus {

using prompt::LengthClass;
using prompt::LengthKind;
using prompt::MetadataEntry;
using prompt::Sentence;
using prompt::Tag;
using tasks::TaskKind;

enum class PairKind { kTag, kNl };

// `simple` is always a byte prefix of `complete`.
struct PromptPair {
  std::string simple;
  std::string complete;
  PairKind kind = PairKind::kTag;
};

struct CaptionRecord {
  std::string id;
  std::vector<Tag> tags;
  std::vector<Sentence> sentences;
  std::vector<MetadataEntry> meta;
};

struct TrainingSample {
  std::string text;
  TaskKind task;
  LengthKind length;
  std::string source_id;
};

// Shuffles with `seed`, then simple = first m tags, complete = all tags.
// Requires 1 <= m <= tags.size().
PromptPair build_tag_pair(std::span<const Tag> tags, std::size_t m,
                          std::uint64_t seed);

// simple = the selected sentences, complete = simple followed by every
// sentence. `chosen` holds sorted 0-based positions and must start with 0.
PromptPair nl_pair_from_selection(std::span<const Sentence> sentences,
                                  std::span<const std::size_t> chosen);

// Keeps the first sentence plus m-1 others drawn in original order.
// Requires 1 <= m < sentences.size().
PromptPair build_nl_pair(std::span<const Sentence> sentences, std::size_t m,
                         std::uint64_t seed);

struct AugmentProbs {
  double p_drop = 0.3;  // per metadata entry
  double p_end = 0.3;   // surviving block moved after the content
};

// kDropped: nothing survived, so there is no block to place.
enum class MetaPlacement { kFront, kEnd, kDropped };

struct MetadataAugment {
  std::vector<MetadataEntry> entries;
  MetaPlacement placement = MetaPlacement::kFront;
  std::size_t dropped = 0;
};

MetadataAugment augment_metadata(std::span<const MetadataEntry> meta,
                                 std::uint64_t seed,
                                 const AugmentProbs& probs = {});

// Shuffle, then keep at most length.max_tags.
std::vector<Tag> augment_content_tags(std::span<const Tag> tags,
                                      const LengthClass& length,
                                      std::uint64_t seed);

// Removes randomly chosen middle sentences until the cap holds. The first
// sentence always survives and the last does whenever the cap is at least 2.
std::vector<Sentence> truncate_nl(std::span<const Sentence> sentences,
                                  const LengthClass& length,
                                  std::uint64_t seed);

// Throws UnsupportedTaskError when the record lacks the task's inputs.
TrainingSample make_training_sample(const CaptionRecord& record, TaskKind task,
                                    const LengthClass& length,
                                    std::uint64_t seed,
                                    const AugmentProbs& probs = {});

// Throws InputError on anything that is not a valid caption record,
// including content holding "<|...|>" token syntax.
CaptionRecord parse_record(std::string_view json_line);
std::string sample_to_json(const TrainingSample& sample);

struct ForgeConfig {
  std::vector<std::pair<TaskKind, double>> tasks;  // enabled tasks, weights
  std::array<double, 4> length_weights = {1.0, 1.0, 1.0, 1.0};
  std::size_t samples_per_record = 1;
  AugmentProbs augment;

  static ForgeConfig all_tasks();
  // "short_to_tag,tag_to_long:2"; a missing weight means 1.
  static std::vector<std::pair<TaskKind, double>> parse_task_list(
      std::string_view spec);
  // "very_short:1,short:2,long:1,very_long:0"; unnamed classes get 0.
  static std::array<double, 4> parse_length_weights(std::string_view spec);
};

struct ForgeStats {
  std::size_t records = 0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
};

// Streams samples for one record. Task choice is restricted to the tasks the
// record can support; a record supporting none is counted as skipped.
class CorpusForge {
 public:
  using Sink = std::function<void(const TrainingSample&)>;

  CorpusForge(ForgeConfig config, std::uint64_t seed);

  void process(const CaptionRecord& record, const Sink& sink);
  // Parses one line, skipping (and counting) malformed records.
  void process_line(std::string_view line, const Sink& sink);

  const ForgeStats& stats() const { return stats_; }

 private:
  ForgeConfig config_;
  std::uint64_t seed_;
  ForgeStats stats_;
};

// Line-delimited records in, line-delimited samples out.
ForgeStats forge_corpus(std::istream& in, std::ostream& out,
                        const ForgeConfig& config, std::uint64_t seed);

}  // namespace promptlab::corpus

#endif  // PROMPTLAB_CORPUS_H_
