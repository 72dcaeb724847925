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

#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "doctest.h"
#include "promptlab/errors.h"
#include "promptlab/survey_server.h"
#include "support/temp_dir.h"

namespace promptlab::survey {
namespace {

using pref::Choice;
using pref::Metric;
using testing::TempDir;

SurveyPair make_pair(int i, std::string a = "tipo", std::string b = "raw") {
  SurveyPair p;
  p.pair_id = "p" + std::to_string(i);
  p.original_prompt = "a cat " + std::to_string(i);
  p.method_a = std::move(a);
  p.method_b = std::move(b);
  p.image_a = "img/" + p.pair_id + "_a.png";
  p.image_b = "img/" + p.pair_id + "_b.png";
  p.prompt_a = "expanded prompt " + std::to_string(i);
  p.prompt_b = "plain prompt " + std::to_string(i);
  return p;
}

std::vector<SurveyPair> pool(int n) {
  std::vector<SurveyPair> out;
  for (int i = 0; i < n; ++i) out.push_back(make_pair(i));
  return out;
}

Choices all(Choice c) {
  Choices out;
  for (Metric m : pref::kAllMetrics) out[m] = c;
  return out;
}

bool is_swapped(const SurveyPair& p, const BlindedPair& b) {
  return b.image_a == p.image_b;
}

TEST_CASE("pair pool parsing") {
  std::istringstream in(
      R"({"pair_id":"x","original_prompt":"cat","method_a":"m1","method_b":"m2","image_a":"a.png","image_b":"b.png","prompt_a":"pa","prompt_b":"pb"})"
      "\n\n");
  auto pairs = read_pairs(in);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].prompt_b == "pb");

  std::istringstream dup(
      R"({"pair_id":"x","method_a":"m1","method_b":"m2","image_a":"a","image_b":"b"})"
      "\n"
      R"({"pair_id":"x","method_a":"m1","method_b":"m3","image_a":"a","image_b":"b"})");
  CHECK_THROWS_AS(read_pairs(dup), InputError);
  std::istringstream self(
      R"({"pair_id":"x","method_a":"m1","method_b":"m1","image_a":"a","image_b":"b"})");
  CHECK_THROWS_AS(read_pairs(self), InputError);
}

TEST_CASE("next_pair blinding and exhaustion") {
  SurveyStore empty({});
  CHECK_FALSE(empty.next_pair("r").has_value());
  CHECK(to_json(empty.next_pair("r"))["status"] == "no_more_pairs");

  SurveyStore store(pool(5));
  std::set<std::string> seen;
  for (int i = 0; i < 5; ++i) {
    auto p = store.next_pair("r1");
    REQUIRE(p.has_value());
    auto j = to_json(*p);
    CHECK_FALSE(j.contains("prompt_a"));
    CHECK_FALSE(j.contains("prompt_b"));
    CHECK(j.dump().find("expanded prompt") == std::string::npos);
    CHECK(j.dump().find("tipo") == std::string::npos);
    CHECK(seen.insert(p->pair_id).second);
  }
  CHECK_FALSE(store.next_pair("r1").has_value());
  CHECK(store.next_pair("r2").has_value());
}

TEST_CASE("submit_vote") {
  SurveyStore store(pool(3));
  auto p = store.next_pair("r");
  REQUIRE(p);
  Choices missing = all(Choice::kA);
  missing.erase(Metric::kAesthetic);
  CHECK_THROWS_AS(store.submit_vote("r", p->pair_id, missing), InputError);
  CHECK_THROWS_AS(store.submit_vote("r", "nope", all(Choice::kA)), NotFoundError);
  CHECK_THROWS_AS(store.submit_vote("other", p->pair_id, all(Choice::kA)),
                  PreconditionError);
  CHECK(store.votes().empty());

  Reveal r = store.submit_vote("r", p->pair_id, all(Choice::kTie));
  CHECK(store.votes().size() == 4);
  CHECK_FALSE(r.prompt_a.empty());
  CHECK_THROWS_AS(store.submit_vote("r", p->pair_id, all(Choice::kA)),
                  ConflictError);
  CHECK(store.votes().size() == 4);
  std::set<Metric> metrics;
  for (const auto& v : store.votes()) metrics.insert(v.metric);
  CHECK(metrics.size() == 4);
}

TEST_CASE("side map replay") {
  // Enough raters that both orientations occur.
  std::vector<SurveyPair> pairs = pool(1);
  SurveyStore store(pairs);
  int swapped = 0, straight = 0;
  for (int i = 0; i < 40; ++i) {
    const std::string rater = "r" + std::to_string(i);
    auto b = store.next_pair(rater);
    REQUIRE(b);
    const bool sw = is_swapped(pairs[0], *b);
    (sw ? swapped : straight)++;
    Reveal rv = store.submit_vote(rater, b->pair_id, all(Choice::kB));
    // "B is better" credits whichever method was displayed on side B.
    const std::string expected = sw ? "tipo" : "raw";
    const auto& v = store.votes().back();
    const std::string winner = v.choice == Choice::kA ? v.method_a : v.method_b;
    CHECK(winner == expected);
    CHECK(rv.prompt_b == (sw ? pairs[0].prompt_a : pairs[0].prompt_b));
  }
  CHECK(swapped > 0);
  CHECK(straight > 0);
}

TEST_CASE("side randomization is neutral") {
  const int n = 4000;
  std::vector<SurveyPair> pairs = pool(40);
  SurveyStore store(pairs, {.seed = 77});
  int on_a = 0;
  for (int i = 0; i < n / 40; ++i) {
    for (int k = 0; k < 40; ++k) {
      auto b = store.next_pair("rater" + std::to_string(i));
      REQUIRE(b);
      on_a += b->image_a.ends_with("_a.png");
    }
  }
  const double sigma = std::sqrt(0.25 / n);
  CHECK(std::abs(static_cast<double>(on_a) / n - 0.5) <= 3 * sigma);
}

TEST_CASE("refresh") {
  SurveyStore store(pool(2));
  auto first = store.next_pair("r1");
  REQUIRE(first);
  auto second = store.refresh_pair("r1", first->pair_id);
  REQUIRE(second);
  CHECK(second->pair_id != first->pair_id);
  CHECK(store.votes().empty());
  CHECK_THROWS_AS(store.submit_vote("r1", first->pair_id, all(Choice::kA)),
                  ConflictError);
  CHECK_FALSE(store.refresh_pair("r1", second->pair_id).has_value());

  // The skip is per rater.
  std::set<std::string> other;
  for (int i = 0; i < 2; ++i) other.insert(store.next_pair("r2")->pair_id);
  CHECK(other.count(first->pair_id));

  auto p = store.next_pair("r3");
  store.submit_vote("r3", p->pair_id, all(Choice::kA));
  CHECK_THROWS_AS(store.refresh_pair("r3", p->pair_id), ConflictError);
  CHECK_THROWS_AS(store.refresh_pair("r3", "missing"), NotFoundError);
}

TEST_CASE("results") {
  SurveyStore store(pool(2));
  auto empty = nlohmann::json::parse(store.results_text(std::nullopt));
  CHECK(empty["pooled"]["tallies"].empty());
  CHECK(empty["metrics"]["overall"]["matrix"].empty());

  auto b = store.next_pair("r");
  Choices c = all(Choice::kTie);
  // Pick the displayed side that holds "raw" so the underlying A ("tipo")
  // loses; lexicographic order puts "raw" first.
  const bool sw = b->image_a.ends_with("_b.png");
  c[Metric::kOverall] = sw ? Choice::kA : Choice::kB;
  store.submit_vote("r", b->pair_id, c);
  auto doc = nlohmann::json::parse(store.results_text(Metric::kOverall));
  REQUIRE(doc["tallies"].size() == 1);
  CHECK(doc["tallies"][0]["method_a"] == "raw");
  CHECK(doc["tallies"][0]["wins_a"] == 1);
  CHECK(doc["tallies"][0]["ties"] == 0);
  CHECK(doc["tallies"][0]["wins_b"] == 0);
  CHECK(store.results_text(std::nullopt) ==
        pref::results_text(store.votes(), std::nullopt));
}

TEST_CASE("persistence replays to identical state") {
  TempDir dir;
  StoreOptions opts;
  opts.vote_log_path = dir.file("votes.jsonl");
  opts.state_path = dir.file("state.json");
  opts.seed = 5;
  std::int64_t clock = 1'700'000'000'000;
  opts.now_ms = [&] { return clock++; };

  std::string before;
  std::set<std::string> served_r1;
  {
    SurveyStore store(pool(6), opts);
    for (int i = 0; i < 3; ++i) {
      auto b = store.next_pair("r1");
      served_r1.insert(b->pair_id);
      if (i < 2) store.submit_vote("r1", b->pair_id, all(i ? Choice::kA : Choice::kB));
    }
    auto b = store.next_pair("r2");
    store.submit_vote("r2", b->pair_id, all(Choice::kTie));
    before = store.results_text(std::nullopt);
  }
  CHECK(testing::slurp(opts.vote_log_path).size() > 0);
  SurveyStore reloaded(pool(6), opts);
  CHECK(reloaded.results_text(std::nullopt) == before);
  CHECK(reloaded.votes().size() == 12);
  // r1 still cannot be re-served anything it saw, voted or pending.
  for (int i = 0; i < 3; ++i) {
    auto b = reloaded.next_pair("r1");
    REQUIRE(b);
    CHECK_FALSE(served_r1.count(b->pair_id));
  }
  CHECK_FALSE(reloaded.next_pair("r1").has_value());

  // The log alone is the source of truth for aggregates.
  auto from_log = pref::read_votes_file(opts.vote_log_path);
  CHECK(pref::results_text(from_log, std::nullopt) == before);

  // A torn final line from a crash is dropped on load.
  { std::ofstream(opts.vote_log_path, std::ios::app) << R"({"pair_id":"p1","met)"; }
  SurveyStore torn(pool(6), opts);
  CHECK(torn.results_text(std::nullopt) == before);
}

TEST_CASE("concurrent raters") {
  SurveyStore store(pool(30));
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&store, t] {
      const std::string rater = "t" + std::to_string(t);
      while (auto b = store.next_pair(rater)) {
        store.submit_vote(rater, b->pair_id, all(Choice::kA));
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(store.votes().size() == 8 * 30 * 4);
}

class LiveServer {
 public:
  LiveServer(SurveyStore& store, ServerOptions opts = {})
      : server_(store, std::move(opts)) {
    port_ = server_.bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_.listen(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  SurveyServer server_;
  int port_ = 0;
  std::thread thread_;
};

nlohmann::json vote_body(const std::string& pair_id, const std::string& c) {
  return {{"pair_id", pair_id},
          {"choices",
           {{"adherence", c}, {"quality", c}, {"aesthetic", c}, {"overall", c}}}};
}

TEST_CASE("http endpoints") {
  TempDir dir;
  std::filesystem::create_directories(dir.path() / "ui");
  std::filesystem::create_directories(dir.path() / "images");
  dir.write("ui/index.html", "<html>survey</html>");
  dir.write("images/x.png", "PNG");
  StoreOptions opts;
  opts.vote_log_path = dir.file("votes.jsonl");
  SurveyStore store(pool(3), opts);
  LiveServer live(store, {dir.file("ui"), dir.file("images")});
  auto cli = live.client();
  httplib::Headers h{{kRaterHeader, "alice"}};

  auto res = cli.Get("/api/pair", h);
  REQUIRE(res);
  CHECK(res->status == 200);
  auto pair = nlohmann::json::parse(res->body);
  CHECK(pair["status"] == "ok");
  CHECK_FALSE(pair.contains("prompt_a"));
  CHECK(res->body.find("expanded prompt") == std::string::npos);
  const std::string id = pair["pair_id"];

  auto bad = cli.Post("/api/vote", h, R"({"pair_id":")" + id + R"(","choices":{"overall":"A"}})",
                      "application/json");
  CHECK(bad->status == 400);
  CHECK(cli.Post("/api/vote", h, "not json", "application/json")->status == 400);
  CHECK(cli.Post("/api/vote", h, vote_body("ghost", "A").dump(), "application/json")
            ->status == 404);
  CHECK(cli.Post("/api/vote", {{kRaterHeader, "bob"}}, vote_body(id, "A").dump(),
                 "application/json")
            ->status == 409);

  res = cli.Post("/api/vote", h, vote_body(id, "A").dump(), "application/json");
  REQUIRE(res->status == 200);
  auto reveal = nlohmann::json::parse(res->body);
  CHECK(reveal["prompt_a"].get<std::string>().find("prompt") != std::string::npos);
  CHECK(cli.Post("/api/vote", h, vote_body(id, "A").dump(), "application/json")
            ->status == 409);
  CHECK(store.votes().size() == 4);

  auto next = nlohmann::json::parse(cli.Get("/api/pair", h)->body);
  res = cli.Post("/api/refresh", h, nlohmann::json{{"pair_id", next["pair_id"]}}.dump(),
                 "application/json");
  REQUIRE(res->status == 200);
  auto refreshed = nlohmann::json::parse(res->body);
  CHECK(refreshed["pair_id"] != next["pair_id"]);
  CHECK(store.votes().size() == 4);
  res = cli.Post("/api/refresh", h,
                 nlohmann::json{{"pair_id", refreshed["pair_id"]}}.dump(),
                 "application/json");
  CHECK(nlohmann::json::parse(res->body)["status"] == "no_more_pairs");

  // Cookie issued when no header is sent.
  res = cli.Get("/api/pair");
  REQUIRE(res->status == 200);
  const std::string cookie = res->get_header_value("Set-Cookie");
  CHECK(cookie.starts_with(std::string(kRaterCookie) + "="));
  const std::string token = cookie.substr(0, cookie.find(';'));
  auto again = cli.Get("/api/pair", {{"Cookie", token}});
  CHECK(again->get_header_value("Set-Cookie").empty());
  CHECK(nlohmann::json::parse(again->body)["pair_id"] !=
        nlohmann::json::parse(res->body)["pair_id"]);

  const std::string from_log =
      pref::results_text(pref::read_votes_file(opts.vote_log_path), std::nullopt);
  res = cli.Get("/api/results");
  CHECK(res->status == 200);
  CHECK(res->body == from_log);
  res = cli.Get("/api/results?metric=overall&base=1500");
  CHECK(res->body ==
        pref::results_text(pref::read_votes_file(opts.vote_log_path),
                           Metric::kOverall, 1500));
  CHECK(cli.Get("/api/results?metric=vibes")->status == 400);

  res = cli.Get("/");
  REQUIRE(res);
  CHECK(res->body == "<html>survey</html>");
  CHECK(cli.Get("/images/x.png")->body == "PNG");
}

}  // namespace
}  // namespace promptlab::survey
