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

#include "promptlab/preference.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>

#include "promptlab/errors.h"
#include "promptlab/strings.h"

namespace promptlab::pref {
namespace {

std::string get_string(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw InputError(std::string("vote is missing string field \"") + key + "\"");
  }
  return j[key].get<std::string>();
}

nlohmann::ordered_json section_json(const std::vector<VoteRecord>& votes,
                                    std::optional<Metric> metric, double base) {
  const TallyMap tallies = tabulate(votes, metric);
  std::set<std::string> method_set;
  for (const auto& [pair, t] : tallies) {
    method_set.insert(pair.first);
    method_set.insert(pair.second);
  }
  const std::vector<std::string> methods(method_set.begin(), method_set.end());
  const EloReport elo = compute_elo(tallies, base);

  std::size_t count = 0;
  for (const auto& v : votes) count += !metric || v.metric == *metric;

  nlohmann::ordered_json out;
  out["votes"] = count;
  out["methods"] = methods;

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& [pair, t] : tallies) {
    nlohmann::ordered_json row;
    row["method_a"] = pair.first;
    row["method_b"] = pair.second;
    row["wins_a"] = t.wins_a;
    row["ties"] = t.ties;
    row["wins_b"] = t.wins_b;
    row["adjusted_win_rate"] = adjusted_win_rate(t);
    if (t.wins_a + t.wins_b > 0) {
      row["binomial_p"] = binomial_test(t.wins_a, t.wins_b);
      row["mcnemar_p"] = mcnemar_test(t.wins_a, t.wins_b).p;
    } else {
      row["binomial_p"] = nullptr;
      row["mcnemar_p"] = nullptr;
    }
    rows.push_back(std::move(row));
  }
  out["tallies"] = std::move(rows);

  // matrix[i][j]: adjusted win rate of methods[i] against methods[j].
  nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
  for (const auto& mi : methods) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (const auto& mj : methods) {
      if (mi == mj) {
        row.push_back(nullptr);
        continue;
      }
      const bool forward = mi < mj;
      auto it = tallies.find(forward ? MethodPair{mi, mj} : MethodPair{mj, mi});
      if (it == tallies.end()) {
        row.push_back(nullptr);
      } else {
        row.push_back(adjusted_win_rate(forward ? it->second
                                                : it->second.swapped()));
      }
    }
    matrix.push_back(std::move(row));
  }
  out["matrix"] = std::move(matrix);

  nlohmann::ordered_json e;
  e["base"] = elo.base;
  nlohmann::ordered_json ratings = nlohmann::ordered_json::object();
  for (const auto& [m, r] : elo.ratings) ratings[m] = r;
  e["ratings"] = std::move(ratings);
  std::vector<std::string> ranking = methods;
  std::stable_sort(ranking.begin(), ranking.end(),
                   [&](const std::string& x, const std::string& y) {
                     return elo.ratings.at(x) > elo.ratings.at(y);
                   });
  e["ranking"] = ranking;
  nlohmann::ordered_json diffs = nlohmann::ordered_json::array();
  for (const auto& [pair, d] : elo.diffs) {
    if (pair.first > pair.second) continue;
    diffs.push_back({{"method_a", pair.first},
                     {"method_b", pair.second},
                     {"elo_difference", d}});
  }
  e["diffs"] = std::move(diffs);
  out["elo"] = std::move(e);
  return out;
}

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kAdherence:
      return "adherence";
    case Metric::kQuality:
      return "quality";
    case Metric::kAesthetic:
      return "aesthetic";
    case Metric::kOverall:
      return "overall";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view s) {
  for (Metric m : kAllMetrics) {
    if (metric_name(m) == s) return m;
  }
  return std::nullopt;
}

std::string_view choice_name(Choice c) {
  switch (c) {
    case Choice::kA:
      return "A";
    case Choice::kTie:
      return "tie";
    case Choice::kB:
      return "B";
  }
  return "unknown";
}

std::optional<Choice> parse_choice(std::string_view s) {
  if (s == "A") return Choice::kA;
  if (s == "tie") return Choice::kTie;
  if (s == "B") return Choice::kB;
  return std::nullopt;
}

Choice flip(Choice c) {
  if (c == Choice::kA) return Choice::kB;
  if (c == Choice::kB) return Choice::kA;
  return c;
}

std::string format_timestamp(std::int64_t ms) {
  std::int64_t secs = ms / 1000;
  std::int64_t frac = ms % 1000;
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  const std::time_t t = static_cast<std::time_t>(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(frac));
  return buf;
}

std::int64_t parse_timestamp(const nlohmann::json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (!j.is_string()) throw InputError("timestamp must be a string or integer");
  const std::string s = j.get<std::string>();
  std::tm tm{};
  int ms = 0;
  char tail[8] = {0};
  int n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%7s", &tm.tm_year,
                      &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min,
                      &tm.tm_sec, &ms, tail);
  bool ok = n == 8 && std::string_view(tail) == "Z";
  if (!ok) {
    ms = 0;
    n = std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%7s", &tm.tm_year,
                    &tm.tm_mon, &tm.tm_mday, &tm.tm_hour, &tm.tm_min,
                    &tm.tm_sec, tail);
    ok = n == 7 && std::string_view(tail) == "Z";
  }
  if (!ok) throw InputError("malformed timestamp '" + s + "'");
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return static_cast<std::int64_t>(timegm(&tm)) * 1000 + ms;
}

nlohmann::ordered_json vote_to_json(const VoteRecord& v) {
  nlohmann::ordered_json j;
  j["pair_id"] = v.pair_id;
  j["method_a"] = v.method_a;
  j["method_b"] = v.method_b;
  j["metric"] = metric_name(v.metric);
  j["choice"] = choice_name(v.choice);
  j["rater_id"] = v.rater_id;
  j["timestamp"] = format_timestamp(v.timestamp_ms);
  return j;
}

VoteRecord vote_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("vote must be a JSON object");
  VoteRecord v;
  v.pair_id = get_string(j, "pair_id");
  v.method_a = get_string(j, "method_a");
  v.method_b = get_string(j, "method_b");
  if (v.method_a.empty() || v.method_b.empty()) {
    throw InputError("vote has an empty method name");
  }
  if (v.method_a == v.method_b) {
    throw InputError("vote compares method '" + v.method_a + "' with itself");
  }
  const std::string metric = get_string(j, "metric");
  auto m = parse_metric(metric);
  if (!m) throw InputError("unknown metric '" + metric + "'");
  v.metric = *m;
  const std::string choice = get_string(j, "choice");
  auto c = parse_choice(choice);
  if (!c) throw InputError("unknown choice '" + choice + "'");
  v.choice = *c;
  if (j.contains("rater_id") && j["rater_id"].is_string()) {
    v.rater_id = j["rater_id"].get<std::string>();
  }
  if (j.contains("timestamp")) v.timestamp_ms = parse_timestamp(j["timestamp"]);
  return v;
}

std::vector<VoteRecord> read_votes(std::istream& in) {
  std::vector<VoteRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(vote_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("votes line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("votes line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<VoteRecord> read_votes_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open votes file '" + path + "'");
  return read_votes(f);
}

void write_vote(std::ostream& out, const VoteRecord& v) {
  out << vote_to_json(v).dump() << '\n';
}

TallyMap tabulate(const std::vector<VoteRecord>& votes,
                  std::optional<Metric> metric) {
  TallyMap out;
  for (const auto& v : votes) {
    if (metric && v.metric != *metric) continue;
    const bool forward = v.method_a < v.method_b;
    const Choice c = forward ? v.choice : flip(v.choice);
    PairTally& t = out[forward ? MethodPair{v.method_a, v.method_b}
                               : MethodPair{v.method_b, v.method_a}];
    switch (c) {
      case Choice::kA:
        ++t.wins_a;
        break;
      case Choice::kTie:
        ++t.ties;
        break;
      case Choice::kB:
        ++t.wins_b;
        break;
    }
  }
  return out;
}

double adjusted_win_rate(const PairTally& t) {
  if (t.wins_a < 0 || t.ties < 0 || t.wins_b < 0) {
    throw InputError("tally counts must be non-negative");
  }
  if (t.total() == 0) throw InputError("adjusted win rate of an empty tally");
  return (static_cast<double>(t.wins_a) + static_cast<double>(t.ties) / 2.0) /
         static_cast<double>(t.total());
}

double elo_difference(double awr) {
  if (!(awr >= 0.0 && awr <= 1.0)) {
    throw InputError("adjusted win rate must lie in [0, 1]");
  }
  if (awr <= 0.001) return -kEloClamp;
  if (awr >= 0.999) return kEloClamp;
  return kEloScale * std::log10(awr / (1.0 - awr));
}

EloReport compute_elo(const std::map<MethodPair, PairTally>& tallies,
                      double base, const std::vector<std::string>& methods) {
  EloReport report;
  report.base = base;
  // Per method: opponent -> merged tally from this method's side.
  std::map<std::string, std::map<std::string, PairTally>> by_method;
  for (const auto& [pair, t] : tallies) {
    if (t.total() == 0) continue;
    if (pair.first == pair.second) {
      throw InputError("tally compares '" + pair.first + "' with itself");
    }
    PairTally& fwd = by_method[pair.first][pair.second];
    fwd.wins_a += t.wins_a;
    fwd.ties += t.ties;
    fwd.wins_b += t.wins_b;
    PairTally& rev = by_method[pair.second][pair.first];
    rev.wins_a += t.wins_b;
    rev.ties += t.ties;
    rev.wins_b += t.wins_a;
  }
  for (const auto& m : methods) {
    if (!by_method.count(m)) {
      throw InputError("method '" + m + "' has no comparisons");
    }
  }
  if (by_method.empty()) return report;

  std::map<std::string, double> avg;
  double grand = 0.0;
  for (const auto& [m, opponents] : by_method) {
    double sum = 0.0;
    for (const auto& [o, t] : opponents) {
      const double d = elo_difference(adjusted_win_rate(t));
      report.diffs[{m, o}] = d;
      sum += d;
    }
    avg[m] = sum / static_cast<double>(opponents.size());
    grand += avg[m];
  }
  grand /= static_cast<double>(avg.size());
  for (const auto& [m, a] : avg) report.ratings[m] = base + (a - grand);
  return report;
}

double binomial_test(long wins, long losses) {
  if (wins < 0 || losses < 0) throw InputError("counts must be non-negative");
  const long n = wins + losses;
  if (n == 0) throw InputError("binomial test needs at least one trial");
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  const double ln2n = static_cast<double>(n) * std::log(2.0);
  auto log_pmf = [&](long k) {
    return lgn - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0) - ln2n;
  };
  // Relative slack so outcomes tied with the observed one are not lost to
  // rounding in lgamma.
  const double cutoff = log_pmf(wins) + std::log1p(1e-7);
  double p = 0.0;
  for (long k = 0; k <= n; ++k) {
    const double lp = log_pmf(k);
    if (lp <= cutoff) p += std::exp(lp);
  }
  return std::min(p, 1.0);
}

McNemarResult mcnemar_test(long wins, long losses) {
  if (wins < 0 || losses < 0) throw InputError("counts must be non-negative");
  const long n = wins + losses;
  if (n == 0) throw InputError("McNemar test needs at least one discordant pair");
  const double diff =
      std::max(std::abs(static_cast<double>(wins - losses)) - 1.0, 0.0);
  McNemarResult r;
  r.chi2 = diff * diff / static_cast<double>(n);
  // Upper tail of chi-square with one degree of freedom.
  r.p = std::erfc(std::sqrt(r.chi2 / 2.0));
  return r;
}

nlohmann::ordered_json results_json(const std::vector<VoteRecord>& votes,
                                    std::optional<Metric> metric,
                                    double base) {
  nlohmann::ordered_json out;
  out["base"] = base;
  if (metric) {
    out["metric"] = metric_name(*metric);
    nlohmann::ordered_json section = section_json(votes, metric, base);
    for (auto& [k, v] : section.items()) out[k] = v;
    return out;
  }
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (Metric m : kAllMetrics) {
    per[std::string(metric_name(m))] = section_json(votes, m, base);
  }
  out["metrics"] = std::move(per);
  out["pooled"] = section_json(votes, std::nullopt, base);
  return out;
}

std::string results_text(const std::vector<VoteRecord>& votes,
                         std::optional<Metric> metric, double base) {
  return results_json(votes, metric, base).dump(2) + "\n";
}

}  // namespace promptlab::pref
