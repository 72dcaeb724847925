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

#ifndef PROMPTLAB_SURVEY_H_
#define PROMPTLAB_SURVEY_H_

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "promptlab/preference.h"
#include "promptlab/random.h"

namespace promptlab::survey {

struct SurveyPair {
  std::string pair_id;
  std::string original_prompt;
  std::string method_a;
  std::string method_b;
  std::string image_a;
  std::string image_b;
  std::string prompt_a;  // withheld until the rater votes
  std::string prompt_b;
};

// Throws InputError on missing fields or method_a == method_b.
SurveyPair pair_from_json(const nlohmann::json& j);
// One object per line. Throws InputError on duplicate pair ids.
std::vector<SurveyPair> read_pairs(std::istream& in);
std::vector<SurveyPair> read_pairs_file(const std::string& path);

// What a rater sees before voting. Side A may show either underlying method.
struct BlindedPair {
  std::string pair_id;
  std::string original_prompt;
  std::string image_a;
  std::string image_b;
};
nlohmann::ordered_json to_json(const BlindedPair& p);
// {"status": "no_more_pairs"} when empty.
nlohmann::ordered_json to_json(const std::optional<BlindedPair>& p);

struct Reveal {
  std::string pair_id;
  std::string prompt_a;  // in the rater's displayed orientation
  std::string prompt_b;
};
nlohmann::ordered_json to_json(const Reveal& r);

// Choices as displayed to the rater; all four metrics are required.
using Choices = std::map<pref::Metric, pref::Choice>;
// Parses {"adherence": "A", ...}; throws InputError naming a missing metric.
Choices choices_from_json(const nlohmann::json& j);

struct StoreOptions {
  std::string vote_log_path;  // append-only JSONL of VoteRecords; optional
  std::string state_path;     // serving-state snapshot; optional
  std::uint64_t seed = 0;
  std::function<std::int64_t()> now_ms;  // defaults to the system clock
};

// Thread-safe survey state: which pairs each rater has seen, side
// assignments, and the vote log. With paths configured, existing files are
// replayed on construction and every mutation is persisted before it becomes
// visible.
class SurveyStore {
 public:
  SurveyStore(std::vector<SurveyPair> pairs, StoreOptions options = {});

  // Serves a pair this rater has never been served, or nullopt once the
  // pool is exhausted for them.
  std::optional<BlindedPair> next_pair(const std::string& rater_id);

  // Records one vote per metric. Throws NotFoundError for an unknown pair,
  // PreconditionError if it was never served to this rater, ConflictError if
  // it was already voted on or skipped, InputError on a missing metric.
  Reveal submit_vote(const std::string& rater_id, const std::string& pair_id,
                     const Choices& choices);

  // Skips a served, unvoted pair for this rater only and serves another.
  std::optional<BlindedPair> refresh_pair(const std::string& rater_id,
                                          const std::string& pair_id);

  std::string results_text(std::optional<pref::Metric> metric,
                           double base = pref::kDefaultBase) const;
  std::vector<pref::VoteRecord> votes() const;
  std::size_t pool_size() const { return pairs_.size(); }

  // A fresh opaque rater id, unpredictable across restarts.
  std::string issue_rater_id();

 private:
  enum class Status { kPending, kVoted, kSkipped };
  struct Serving {
    bool swapped = false;  // side A shows method_b
    Status status = Status::kPending;
  };
  using Key = std::pair<std::string, std::string>;  // rater, pair

  std::optional<BlindedPair> next_pair_locked(const std::string& rater_id);
  void load();
  void save_state_locked() const;
  std::int64_t now() const;

  std::vector<SurveyPair> pairs_;
  std::map<std::string, std::size_t> index_;
  StoreOptions options_;

  mutable std::mutex mu_;
  Rng id_rng_;
  std::map<Key, Serving> servings_;
  std::vector<std::size_t> times_served_;
  std::vector<pref::VoteRecord> votes_;
};

}  // namespace promptlab::survey

#endif  // PROMPTLAB_SURVEY_H_
