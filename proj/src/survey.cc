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

#include "promptlab/survey.h"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "promptlab/errors.h"
#include "promptlab/strings.h"

namespace promptlab::survey {
namespace {

std::string required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_string() ||
      j[key].get<std::string>().empty()) {
    throw InputError(std::string("pair is missing field \"") + key + "\"");
  }
  return j[key].get<std::string>();
}

std::string optional_field(const nlohmann::json& j, const char* key) {
  if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
  return {};
}

std::string_view status_name(int s) {
  switch (s) {
    case 0:
      return "pending";
    case 1:
      return "voted";
    default:
      return "skipped";
  }
}

std::uint64_t entropy_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

SurveyPair pair_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("pair must be a JSON object");
  SurveyPair p;
  p.pair_id = required(j, "pair_id");
  p.original_prompt = optional_field(j, "original_prompt");
  p.method_a = required(j, "method_a");
  p.method_b = required(j, "method_b");
  p.image_a = required(j, "image_a");
  p.image_b = required(j, "image_b");
  p.prompt_a = optional_field(j, "prompt_a");
  p.prompt_b = optional_field(j, "prompt_b");
  if (p.method_a == p.method_b) {
    throw InputError("pair '" + p.pair_id + "' compares '" + p.method_a +
                     "' with itself");
  }
  return p;
}

std::vector<SurveyPair> read_pairs(std::istream& in) {
  std::vector<SurveyPair> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      SurveyPair p = pair_from_json(nlohmann::json::parse(line));
      if (!ids.insert(p.pair_id).second) {
        throw InputError("duplicate pair id '" + p.pair_id + "'");
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("pairs line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("pairs line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<SurveyPair> read_pairs_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open pairs file '" + path + "'");
  return read_pairs(f);
}

nlohmann::ordered_json to_json(const BlindedPair& p) {
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["pair_id"] = p.pair_id;
  j["original_prompt"] = p.original_prompt;
  j["image_a"] = p.image_a;
  j["image_b"] = p.image_b;
  return j;
}

nlohmann::ordered_json to_json(const std::optional<BlindedPair>& p) {
  if (p) return to_json(*p);
  return {{"status", "no_more_pairs"}};
}

nlohmann::ordered_json to_json(const Reveal& r) {
  nlohmann::ordered_json j;
  j["status"] = "ok";
  j["pair_id"] = r.pair_id;
  j["prompt_a"] = r.prompt_a;
  j["prompt_b"] = r.prompt_b;
  return j;
}

Choices choices_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("choices must be an object");
  Choices out;
  for (pref::Metric m : pref::kAllMetrics) {
    const std::string key(pref::metric_name(m));
    if (!j.contains(key)) throw InputError("missing choice for metric '" + key + "'");
    if (!j[key].is_string()) throw InputError("choice for '" + key + "' must be a string");
    auto c = pref::parse_choice(j[key].get<std::string>());
    if (!c) {
      throw InputError("choice for '" + key + "' must be A, tie or B");
    }
    out[m] = *c;
  }
  for (const auto& [k, v] : j.items()) {
    if (!pref::parse_metric(k)) throw InputError("unknown metric '" + k + "'");
  }
  return out;
}

SurveyStore::SurveyStore(std::vector<SurveyPair> pairs, StoreOptions options)
    : pairs_(std::move(pairs)),
      options_(std::move(options)),
      id_rng_(entropy_seed()),
      times_served_(pairs_.size(), 0) {
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (pairs_[i].method_a == pairs_[i].method_b) {
      throw InputError("pair '" + pairs_[i].pair_id +
                       "' compares a method with itself");
    }
    if (!index_.emplace(pairs_[i].pair_id, i).second) {
      throw InputError("duplicate pair id '" + pairs_[i].pair_id + "'");
    }
  }
  load();
}

std::int64_t SurveyStore::now() const {
  if (options_.now_ms) return options_.now_ms();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string SurveyStore::issue_rater_id() {
  std::lock_guard lock(mu_);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(id_rng_.next()),
                static_cast<unsigned long long>(id_rng_.next()));
  return buf;
}

std::optional<BlindedPair> SurveyStore::next_pair(const std::string& rater_id) {
  std::lock_guard lock(mu_);
  return next_pair_locked(rater_id);
}

std::optional<BlindedPair> SurveyStore::next_pair_locked(
    const std::string& rater_id) {
  if (rater_id.empty()) throw InputError("rater id must not be empty");
  // Least-served pairs first keeps coverage even across raters.
  std::vector<std::size_t> candidates;
  std::size_t best = SIZE_MAX;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (servings_.count({rater_id, pairs_[i].pair_id})) {
      ++seen;
      continue;
    }
    if (times_served_[i] < best) {
      best = times_served_[i];
      candidates.clear();
    }
    if (times_served_[i] == best) candidates.push_back(i);
  }
  if (candidates.empty()) return std::nullopt;

  // Choice and side depend only on (seed, rater, history length), so a
  // replayed store makes the same decisions.
  Rng pick(derive_seed(options_.seed, rater_id + "\x1f" + std::to_string(seen)));
  const std::size_t i = candidates[pick.below(candidates.size())];
  const SurveyPair& p = pairs_[i];
  Serving s;
  s.swapped =
      Rng(derive_seed(options_.seed, "side\x1f" + rater_id + "\x1f" + p.pair_id))
          .bernoulli(0.5);
  servings_[{rater_id, p.pair_id}] = s;
  ++times_served_[i];
  save_state_locked();

  BlindedPair out;
  out.pair_id = p.pair_id;
  out.original_prompt = p.original_prompt;
  out.image_a = s.swapped ? p.image_b : p.image_a;
  out.image_b = s.swapped ? p.image_a : p.image_b;
  return out;
}

Reveal SurveyStore::submit_vote(const std::string& rater_id,
                                const std::string& pair_id,
                                const Choices& choices) {
  for (pref::Metric m : pref::kAllMetrics) {
    if (!choices.count(m)) {
      throw InputError("missing choice for metric '" +
                       std::string(pref::metric_name(m)) + "'");
    }
  }
  std::lock_guard lock(mu_);
  auto pit = index_.find(pair_id);
  if (pit == index_.end()) throw NotFoundError("unknown pair '" + pair_id + "'");
  auto sit = servings_.find({rater_id, pair_id});
  if (sit == servings_.end()) {
    throw PreconditionError("pair '" + pair_id + "' was not served to this rater");
  }
  Serving& s = sit->second;
  if (s.status == Status::kVoted) {
    throw ConflictError("pair '" + pair_id + "' already has a vote from this rater");
  }
  if (s.status == Status::kSkipped) {
    throw ConflictError("pair '" + pair_id + "' was skipped by this rater");
  }
  const SurveyPair& p = pairs_[pit->second];

  std::vector<pref::VoteRecord> records;
  const std::int64_t ts = now();
  for (pref::Metric m : pref::kAllMetrics) {
    pref::VoteRecord v;
    v.pair_id = pair_id;
    v.method_a = p.method_a;
    v.method_b = p.method_b;
    v.metric = m;
    v.choice = s.swapped ? pref::flip(choices.at(m)) : choices.at(m);
    v.rater_id = rater_id;
    v.timestamp_ms = ts;
    records.push_back(std::move(v));
  }

  // The log is written before in-memory state changes, so a failed append
  // leaves the store as it was.
  if (!options_.vote_log_path.empty()) {
    std::ostringstream buf;
    for (const auto& v : records) pref::write_vote(buf, v);
    std::ofstream f(options_.vote_log_path, std::ios::app | std::ios::binary);
    f << buf.str();
    f.flush();
    if (!f) {
      throw Error("cannot append to vote log '" + options_.vote_log_path + "'");
    }
  }
  votes_.insert(votes_.end(), records.begin(), records.end());
  s.status = Status::kVoted;
  save_state_locked();

  Reveal r;
  r.pair_id = pair_id;
  r.prompt_a = s.swapped ? p.prompt_b : p.prompt_a;
  r.prompt_b = s.swapped ? p.prompt_a : p.prompt_b;
  return r;
}

std::optional<BlindedPair> SurveyStore::refresh_pair(const std::string& rater_id,
                                                     const std::string& pair_id) {
  std::lock_guard lock(mu_);
  if (!index_.count(pair_id)) throw NotFoundError("unknown pair '" + pair_id + "'");
  auto sit = servings_.find({rater_id, pair_id});
  if (sit == servings_.end()) {
    throw PreconditionError("pair '" + pair_id + "' was not served to this rater");
  }
  if (sit->second.status == Status::kVoted) {
    throw ConflictError("pair '" + pair_id + "' was already voted on");
  }
  sit->second.status = Status::kSkipped;
  return next_pair_locked(rater_id);
}

std::string SurveyStore::results_text(std::optional<pref::Metric> metric,
                                      double base) const {
  std::lock_guard lock(mu_);
  return pref::results_text(votes_, metric, base);
}

std::vector<pref::VoteRecord> SurveyStore::votes() const {
  std::lock_guard lock(mu_);
  return votes_;
}

void SurveyStore::save_state_locked() const {
  if (options_.state_path.empty()) return;
  nlohmann::ordered_json servings = nlohmann::ordered_json::array();
  for (const auto& [key, s] : servings_) {
    servings.push_back({{"rater_id", key.first},
                        {"pair_id", key.second},
                        {"swapped", s.swapped},
                        {"status", status_name(static_cast<int>(s.status))}});
  }
  nlohmann::ordered_json doc = {{"version", 1}, {"servings", servings}};
  const std::string tmp = options_.state_path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::trunc | std::ios::binary);
    f << doc.dump() << '\n';
    f.flush();
    if (!f) throw Error("cannot write state snapshot '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, options_.state_path, ec);
  if (ec) {
    throw Error("cannot replace state snapshot '" + options_.state_path +
                "': " + ec.message());
  }
}

void SurveyStore::load() {
  namespace fs = std::filesystem;
  if (!options_.state_path.empty() && fs::exists(options_.state_path)) {
    std::ifstream f(options_.state_path);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw InputError("state snapshot '" + options_.state_path +
                       "' is unreadable: " + e.what());
    }
    for (const auto& s : doc.value("servings", nlohmann::json::array())) {
      const std::string pair_id = s.value("pair_id", "");
      auto it = index_.find(pair_id);
      if (it == index_.end()) {
        spdlog::warn("state snapshot mentions unknown pair '{}'", pair_id);
        continue;
      }
      Serving v;
      v.swapped = s.value("swapped", false);
      const std::string st = s.value("status", "pending");
      v.status = st == "voted"     ? Status::kVoted
                 : st == "skipped" ? Status::kSkipped
                                   : Status::kPending;
      servings_[{s.value("rater_id", ""), pair_id}] = v;
      ++times_served_[it->second];
    }
  }
  if (!options_.vote_log_path.empty() && fs::exists(options_.vote_log_path)) {
    std::ifstream f(options_.vote_log_path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
    // A crash mid-append can leave a partial last line; it never made it
    // into memory, so it is dropped here too.
    if (!content.empty() && content.back() != '\n') {
      const auto cut = content.find_last_of('\n');
      spdlog::warn("dropping incomplete final line of vote log '{}'",
                   options_.vote_log_path);
      content.resize(cut == std::string::npos ? 0 : cut + 1);
      std::filesystem::resize_file(options_.vote_log_path, content.size());
    }
    std::istringstream in(content);
    votes_ = pref::read_votes(in);
    for (const auto& v : votes_) {
      auto it = index_.find(v.pair_id);
      auto [sit, inserted] = servings_.try_emplace({v.rater_id, v.pair_id});
      if (inserted && it != index_.end()) ++times_served_[it->second];
      sit->second.status = Status::kVoted;
    }
  }
}

}  // namespace promptlab::survey
