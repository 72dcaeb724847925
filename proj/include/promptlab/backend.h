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

// Text generation backends. The presampler talks to any generator through
// GenerationBackend; MockBackend is a deterministic rule-based stand-in and
// HttpBackend speaks a plain text-completion protocol over HTTP.

#ifndef PROMPTLAB_BACKEND_H_
#define PROMPTLAB_BACKEND_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promptlab/errors.h"
#include "promptlab/http_client.h"

namespace promptlab::presample {

struct GenRequest {
  std::string prompt_text;
  std::size_t max_new_units = 512;
  std::vector<std::string> stop_markers;
  double temperature = 0.8;
  std::uint64_t seed = 0;
};

struct GenResponse {
  std::string text;
  bool finished = true;
  std::chrono::nanoseconds elapsed{0};
};

// The thirteen special tokens; the default stop markers.
std::vector<std::string> default_stop_markers();

// Cuts `text` before the earliest stop marker. Returns true if one was found.
bool apply_stop_markers(std::string& text,
                        std::span<const std::string> markers);


class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  // Must be callable from several threads at once.
  virtual GenResponse generate(const GenRequest& req) = 0;
};

// Deterministic expansion keyed on (prompt_text, seed). Reads the task and
// length tokens from the prompt, then emits one line per task output: tags
// or sentences drawn from fixed vocabularies, skipping anything the prompt
// already contains.
class MockBackend : public GenerationBackend {
 public:
  GenResponse generate(const GenRequest& req) override;

  static std::span<const std::string_view> tag_vocabulary();
  static std::span<const std::string_view> sentence_vocabulary();
  // Tags requested per output line for a length class: max_tags / 3.
  static std::size_t tags_per_line(std::size_t max_tags) {
    return max_tags / 3;
  }
  // Sentences per output line: max(1, max_sentences / 2).
  static std::size_t sentences_per_line(std::size_t max_sentences) {
    return max_sentences / 2 > 0 ? max_sentences / 2 : 1;
  }
};

// POSTs {"prompt", "max_tokens", "temperature", "seed", "stop"} as JSON.
// Accepts replies shaped {"text": ...}, {"content": ...} or
// {"choices": [{"text": ...}]}.
class HttpBackend : public GenerationBackend {
 public:
  explicit HttpBackend(HttpOptions options) : client_(std::move(options)) {}

  GenResponse generate(const GenRequest& req) override;

 private:
  JsonHttpClient client_;
};

}  // namespace promptlab::presample

#endif  // PROMPTLAB_BACKEND_H_
