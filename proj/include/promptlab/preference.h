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

#ifndef PROMPTLAB_PREFERENCE_H_
#define PROMPTLAB_PREFERENCE_H_

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace promptlab::pref {

enum class Metric { kAdherence, kQuality, kAesthetic, kOverall };
inline constexpr std::array<Metric, 4> kAllMetrics = {
    Metric::kAdherence, Metric::kQuality, Metric::kAesthetic, Metric::kOverall};
std::string_view metric_name(Metric m);
std::optional<Metric> parse_metric(std::string_view s);

enum class Choice { kA, kTie, kB };
std::string_view choice_name(Choice c);  // "A", "tie", "B"
std::optional<Choice> parse_choice(std::string_view s);
Choice flip(Choice c);

struct VoteRecord {
  std::string pair_id;
  std::string method_a;
  std::string method_b;
  Metric metric = Metric::kOverall;
  Choice choice = Choice::kTie;
  std::string rater_id;
  std::int64_t timestamp_ms = 0;  // Unix epoch, UTC
};

// RFC 3339 UTC with millisecond precision, e.g. 2026-01-02T03:04:05.006Z.
std::string format_timestamp(std::int64_t ms);
// Accepts the format above (fraction optional) or a number of milliseconds.
std::int64_t parse_timestamp(const nlohmann::json& j);

nlohmann::ordered_json vote_to_json(const VoteRecord& v);
// Throws InputError on missing fields, unknown enums or method_a == method_b.
VoteRecord vote_from_json(const nlohmann::json& j);

// One JSON object per line; blank lines are skipped. Errors name the line.
std::vector<VoteRecord> read_votes(std::istream& in);
std::vector<VoteRecord> read_votes_file(const std::string& path);
void write_vote(std::ostream& out, const VoteRecord& v);

struct PairTally {
  long wins_a = 0;
  long ties = 0;
  long wins_b = 0;

  long total() const { return wins_a + ties + wins_b; }
  PairTally swapped() const { return {wins_b, ties, wins_a}; }
  friend bool operator==(const PairTally&, const PairTally&) = default;
};

// Unordered method pair stored with first < second.
using MethodPair = std::pair<std::string, std::string>;
using TallyMap = std::map<MethodPair, PairTally>;

// Counts votes on `metric` (all metrics when nullopt) per unordered pair,
// oriented so wins_a belongs to the lexicographically smaller method.
TallyMap tabulate(const std::vector<VoteRecord>& votes,
                  std::optional<Metric> metric);

// (wins_a + ties/2) / total. Throws InputError on an empty tally.
double adjusted_win_rate(const PairTally& t);

inline constexpr double kEloScale = 400.0;
inline constexpr double kEloClamp = 800.0;
// 400 log10(awr / (1 - awr)), clamped to -800 at awr <= 0.001 and +800 at
// awr >= 0.999. Throws InputError outside [0, 1].
double elo_difference(double awr);

inline constexpr double kDefaultBase = 1000.0;

struct EloReport {
  double base = kDefaultBase;
  std::map<std::string, double> ratings;
  // Keyed by (i, j) in both orientations: elo_difference of i against j.
  std::map<MethodPair, double> diffs;
};

// Each method's rating is base plus its mean pairwise difference, centred so
// the ratings average to base. Tallies may be stored in either orientation.
// Methods listed in `methods` but absent from every non-empty tally raise
// InputError; with no methods the report is empty.
EloReport compute_elo(const std::map<MethodPair, PairTally>& tallies,
                      double base = kDefaultBase,
                      const std::vector<std::string>& methods = {});

// Exact two-sided binomial test at p = 1/2. Throws InputError on zero trials.
double binomial_test(long wins, long losses);

struct McNemarResult {
  double chi2 = 0;
  double p = 1;
};
// Continuity-corrected McNemar on the discordant counts, df = 1.
McNemarResult mcnemar_test(long wins, long losses);

// Aggregate document shared by the CLI and the survey service. With a
// metric only that section is emitted; otherwise every metric plus a pooled
// section over all votes.
nlohmann::ordered_json results_json(const std::vector<VoteRecord>& votes,
                                    std::optional<Metric> metric,
                                    double base = kDefaultBase);
// Canonical text form, newline-terminated.
std::string results_text(const std::vector<VoteRecord>& votes,
                         std::optional<Metric> metric,
                         double base = kDefaultBase);

}  // namespace promptlab::pref

#endif  // PROMPTLAB_PREFERENCE_H_
