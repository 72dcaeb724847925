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

#include "promptlab/presampler.h"

#include <atomic>
#include <set>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support/fake_server.h"
#include "promptlab/random.h"
#include "promptlab/strings.h"

namespace promptlab::presample {
namespace {

using testing::FakeServer;

using prompt::LengthKind;

const LengthClass& len(LengthKind k) { return LengthClass::of(k); }

StructuredPrompt tags_prompt(std::string_view tags) {
  StructuredPrompt p;
  p.tags = prompt::parse_tags(tags);
  return p;
}

StructuredPrompt both_prompt() {
  StructuredPrompt p;
  p.tags = prompt::parse_tags("outdoors, scenery, water, wind, landscape");
  p.nl = prompt::split_sentences("A young girl with long hair stands by a lake.");
  return p;
}

// Backend that replays canned replies and counts calls.
class ScriptedBackend : public GenerationBackend {
 public:
  explicit ScriptedBackend(std::vector<std::string> replies)
      : replies_(std::move(replies)) {}
  GenResponse generate(const GenRequest& req) override {
    last_prompt = req.prompt_text;
    GenResponse r;
    r.text = replies_.at(calls++ % replies_.size());
    apply_stop_markers(r.text, req.stop_markers);
    return r;
  }
  int calls = 0;
  std::string last_prompt;

 private:
  std::vector<std::string> replies_;
};

class FailingBackend : public GenerationBackend {
 public:
  explicit FailingBackend(int fail_on) : fail_on_(fail_on) {}
  GenResponse generate(const GenRequest& req) override {
    if (++calls == fail_on_) {
      throw BackendError(BackendError::Kind::kTransport, "connection refused");
    }
    return mock_.generate(req);
  }
  int calls = 0;

 private:
  int fail_on_;
  MockBackend mock_;
};

TEST_CASE("stop markers truncate generated text") {
  std::string text = "a, b<|empty|>c";
  CHECK(apply_stop_markers(text, default_stop_markers()));
  CHECK(text == "a, b");
  std::string plain = "a, b";
  CHECK_FALSE(apply_stop_markers(plain, default_stop_markers()));
  CHECK(default_stop_markers().size() == 13);
}

TEST_CASE("mock backend contract") {
  MockBackend mock;
  GenRequest req;
  req.prompt_text = build_task_prompt(TaskKind::kShortToTag,
                                      tags_prompt("water, sky"),
                                      len(LengthKind::kLong));
  req.seed = 1;
  auto a = mock.generate(req);
  auto b = mock.generate(req);
  CHECK(a.text == b.text);
  auto tags = prompt::parse_tags(a.text);
  CHECK(tags.size() == MockBackend::tags_per_line(48));
  for (const auto& t : tags) {
    CHECK(t.text() != "water");
    CHECK(t.text() != "sky");
  }
  req.seed = 2;
  CHECK(mock.generate(req).text != a.text);

  // Vocabulary exhaustion: the prompt holds all but three tags.
  std::string nearly_all;
  auto vocab = MockBackend::tag_vocabulary();
  for (std::size_t i = 3; i < vocab.size(); ++i) {
    if (i > 3) nearly_all += ", ";
    nearly_all += vocab[i];
  }
  req.prompt_text = build_task_prompt(TaskKind::kShortToTag,
                                      tags_prompt(nearly_all),
                                      len(LengthKind::kVeryLong));
  auto rest = prompt::parse_tags(mock.generate(req).text);
  CHECK(rest.size() == std::min<std::size_t>(MockBackend::tags_per_line(72), 3));

  req.max_new_units = 5;
  auto cut = mock.generate(req);
  CHECK(cut.text.size() <= 5);
  CHECK_FALSE(cut.finished);
}

TEST_CASE("parse_generation") {
  auto dedup = parse_generation("a, b, a", TaskKind::kShortToTag);
  REQUIRE(dedup.tags.size() == 2);
  CHECK(dedup.tags[1].text() == "b");

  auto empty = parse_generation("<|empty|>", TaskKind::kShortToTag);
  CHECK(empty.tags.empty());
  CHECK(empty.sentences.empty());

  auto mixed = parse_generation("<|long|>red hair, smile", TaskKind::kShortToTag);
  CHECK(mixed.tags.size() == 2);

  auto composite = parse_generation("sky, cloud\nIt rains. Birds fly.",
                                    TaskKind::kShortToTagToLong);
  CHECK(composite.tags.size() == 2);
  CHECK(composite.sentences.size() == 2);

  auto meta = parse_generation("quality: masterpiece, year: 2020",
                               TaskKind::kGenMeta);
  CHECK(meta.meta.size() == 2);

  auto stray = parse_generation("cat, dog\nartist: someone", TaskKind::kShortToTag);
  CHECK(stray.tags.size() == 2);
  CHECK(stray.meta.size() == 1);

  try {
    parse_generation("a, <|bogus|>", TaskKind::kShortToTag);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw() == "a, <|bogus|>");
  }
}

TEST_CASE("run_task") {
  MockBackend mock;
  auto in = tags_prompt("1girl, solo");
  auto r = run_task(mock, TaskKind::kShortToTag, in, len(LengthKind::kShort), 9);
  CHECK(r.delta.tags.size() > in.tags.size());
  CHECK(r.delta.tags[0] == in.tags[0]);
  CHECK(r.delta.tags[1] == in.tags[1]);
  CHECK(r.delta.nl.empty());
  CHECK(r.step.task == TaskKind::kShortToTag);
  CHECK(prompt::parse_tags(r.step.response.text).size() + 2 == r.delta.tags.size());

  auto long_r = run_task(mock, TaskKind::kTagToLong, in, len(LengthKind::kLong), 9);
  CHECK_FALSE(long_r.delta.nl.empty());
  CHECK(long_r.delta.tags.empty());

  CHECK_THROWS_AS(run_task(mock, TaskKind::kShortToTag, StructuredPrompt{},
                           len(LengthKind::kLong), 1),
                  UnsupportedTaskError);
  CHECK_THROWS_AS(run_task(mock, TaskKind::kShortToLong, in,
                           len(LengthKind::kLong), 1),
                  UnsupportedTaskError);

  ScriptedBackend bad({"x, <|weird|>"});
  CHECK_THROWS_AS(run_task(bad, TaskKind::kShortToTag, in,
                           len(LengthKind::kLong), 1),
                  ParseError);

  // Caps: the generator offers far more tags than very_short allows.
  std::string many;
  for (int i = 0; i < 40; ++i) many += "t" + std::to_string(i) + ", ";
  ScriptedBackend flood({many});
  auto capped = run_task(flood, TaskKind::kShortToTag, in,
                         len(LengthKind::kVeryShort), 1);
  CHECK(capped.delta.tags.size() == 18);
  CHECK(capped.overflow);
}

TEST_CASE("task prompt mirrors the training layout") {
  StructuredPrompt in = both_prompt();
  in.meta = {prompt::MetadataEntry::make("quality", "masterpiece")};
  std::string p = build_task_prompt(TaskKind::kShortToTagToLong, in,
                                    len(LengthKind::kLong));
  auto lines = split(p, '\n');
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "quality: masterpiece");
  CHECK(lines[1] == "short: A young girl with long hair stands by a lake.");
  CHECK(lines[2] ==
        "<|long|><|short_to_tag_to_long|>outdoors, scenery, water, wind, landscape");
  CHECK(lines[3].empty());
}

TEST_CASE("aggregate") {
  auto empty = aggregate({}, {}, {});
  CHECK(empty.prompt.empty());
  CHECK_FALSE(empty.overflow);

  auto dup = aggregate(prompt::parse_tags("a, b"), {}, {});
  auto dup2 = aggregate({Tag("a"), Tag("b"), Tag("A")}, {}, {});
  CHECK(dup2.prompt.tags == dup.prompt.tags);

  std::vector<Tag> many;
  for (int i = 0; i < 30; ++i) many.emplace_back("t" + std::to_string(i));
  std::vector<Sentence> sents;
  for (std::size_t i = 1; i <= 5; ++i) sents.push_back({"S" + std::to_string(i) + ".", i});
  AggregateOptions opt;
  opt.length = len(LengthKind::kVeryShort);
  auto capped = aggregate(many, sents, {}, opt);
  CHECK(capped.overflow);
  CHECK(capped.prompt.tags.size() == 18);
  REQUIRE(capped.prompt.nl.size() == 2);
  CHECK(capped.prompt.nl[0].text == "S1.");
  CHECK(capped.prompt.nl[1].text == "S5.");

  opt.protected_tags = 25;
  CHECK(aggregate(many, {}, {}, opt).prompt.tags.size() == 25);

  auto ordered = aggregate(prompt::parse_tags("x, y"), {},
                           {prompt::MetadataEntry::make("year", "2020")});
  CHECK(prompt::serialize_prompt(ordered.prompt) == "year: 2020\nx, y");
}

TEST_CASE("run_cycle paths") {
  MockBackend mock;
  auto both = run_cycle(mock, both_prompt(), len(LengthKind::kLong), 5);
  REQUIRE(both.steps.size() == 2);
  CHECK(both.steps[0].task == TaskKind::kShortToTag);
  CHECK(both.steps[1].task == TaskKind::kShortToTagToLong);

  CycleOptions three;
  three.mode = CycleMode::kThreeStep;
  auto full = run_cycle(mock, both_prompt(), len(LengthKind::kLong), 5, three);
  REQUIRE(full.steps.size() == 3);
  CHECK(full.steps[0].task == TaskKind::kShortToTag);
  CHECK(full.steps[1].task == TaskKind::kTagToLong);
  CHECK(full.steps[2].task == TaskKind::kShortToTagToLong);

  auto tag_only = run_cycle(mock, tags_prompt("cat, night"),
                            len(LengthKind::kShort), 5, three);
  CHECK(tag_only.steps.size() == 2);
  for (const auto& s : tag_only.steps) {
    CHECK(s.task != TaskKind::kShortToLong);
    CHECK(s.task != TaskKind::kTagToLong);
  }
  CHECK_FALSE(tag_only.final.nl.empty());

  StructuredPrompt nl_only;
  nl_only.nl = prompt::split_sentences("A cat sleeps. The room is dark.");
  auto nl = run_cycle(mock, nl_only, len(LengthKind::kLong), 5);
  REQUIRE(nl.steps.size() == 1);
  CHECK(nl.steps[0].task == TaskKind::kShortToLongToTag);
  CHECK_FALSE(nl.final.tags.empty());
  CHECK(nl.final.nl[0].text == "A cat sleeps.");

  CHECK_THROWS_AS(run_cycle(mock, StructuredPrompt{}, len(LengthKind::kLong), 1),
                  UnsupportedTaskError);
  StructuredPrompt tainted = tags_prompt("a");
  tainted.tags.emplace_back("<|long|>");
  CHECK_THROWS_AS(run_cycle(mock, tainted, len(LengthKind::kLong), 1), InputError);
}

TEST_CASE("cycle invariants over random inputs") {
  MockBackend mock;
  Rng rng(31);
  auto vocab = MockBackend::tag_vocabulary();
  for (int i = 0; i < 200; ++i) {
    StructuredPrompt in;
    for (std::size_t k = rng.below(6); k > 0; --k) {
      prompt::merge_tags(in.tags, std::vector<Tag>{Tag(vocab[rng.below(vocab.size())])});
    }
    if (in.tags.empty() || rng.bernoulli(0.5)) {
      in.nl = prompt::split_sentences("A lone figure walks home. It is late.");
    }
    const auto& length = prompt::kLengthClasses[rng.below(4)];
    const std::uint64_t seed = rng.next();
    auto r = run_cycle(mock, in, length, seed);
    auto again = run_cycle(mock, in, length, seed);
    CHECK(cycle_to_json(in, r) == cycle_to_json(in, again));

    std::set<Tag> final_tags(r.final.tags.begin(), r.final.tags.end());
    for (const auto& t : in.tags) CHECK(final_tags.contains(t));
    if (!in.nl.empty()) CHECK(r.final.nl.front().text == in.nl.front().text);
    CHECK(tasks::find_token_like(prompt::serialize_prompt(r.final)).empty());
    // Every generated tag traces back to some logged response.
    std::string responses;
    for (const auto& s : r.steps) responses += s.response.text + "\n";
    for (const auto& t : r.final.tags) {
      if (std::find(in.tags.begin(), in.tags.end(), t) != in.tags.end()) continue;
      CHECK(responses.find(t.text()) != std::string::npos);
    }
  }
}

TEST_CASE("cycle errors carry the partial step log") {
  FailingBackend second(2);
  try {
    run_cycle(second, both_prompt(), len(LengthKind::kLong), 1);
    FAIL("expected CycleError");
  } catch (const CycleError& e) {
    CHECK(e.steps().size() == 1);
    CHECK(e.steps()[0].task == TaskKind::kShortToTag);
    CHECK_THROWS_AS(std::rethrow_exception(e.cause()), BackendError);
  }
}

TEST_CASE("cycles can share one backend across threads") {
  MockBackend mock;
  std::vector<std::string> serial(16), parallel(16);
  auto input = [](int i) {
    return tags_prompt("cat, tag" + std::to_string(i));
  };
  for (int i = 0; i < 16; ++i) {
    serial[i] = cycle_to_json(input(i), run_cycle(mock, input(i), len(LengthKind::kLong), i));
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < 16; ++i) {
    pool.emplace_back([&, i] {
      parallel[i] = cycle_to_json(input(i), run_cycle(mock, input(i), len(LengthKind::kLong), i));
    });
  }
  for (auto& t : pool) t.join();
  CHECK(serial == parallel);
}

// Local completion server for the HTTP client.
HttpOptions fast_options(std::string endpoint) {
  HttpOptions o;
  o.endpoint = std::move(endpoint);
  o.timeout = std::chrono::milliseconds(300);
  o.initial_backoff = std::chrono::milliseconds(1);
  return o;
}

TEST_CASE("http backend") {
  FakeServer fake;
  std::atomic<int> flaky_calls{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  fake.server().Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(R"({"text":"a, b<|empty|>tail"})", "application/json");
  });
  fake.server().Post("/choices", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[{"text":"x","finish_reason":"length"}]})",
                    "application/json");
  });
  fake.server().Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
    if (++flaky_calls < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"text":"done"})", "application/json");
  });
  fake.server().Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++flaky_calls;
    res.status = 500;
  });
  fake.server().Post("/garbage", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "text/plain");
  });
  fake.server().Post("/bad", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
  });
  fake.server().Post("/slow", [&](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(700));
    res.set_content(R"({"text":"late"})", "application/json");
  });

  GenRequest req;
  req.prompt_text = "<|empty|>\n<|long|><|short_to_tag|>cat\n";
  req.stop_markers = default_stop_markers();
  req.seed = 3;

  {
    auto opts = fast_options(fake.url("/ok"));
    opts.auth_token = "secret";
    HttpBackend b(opts);
    auto r = b.generate(req);
    CHECK(r.text == "a, b");
    CHECK(seen_auth == "Bearer secret");
    CHECK(seen_body["prompt"] == req.prompt_text);
    CHECK(seen_body["seed"] == 3);
    CHECK(seen_body["stop"].size() == 13);
  }
  {
    HttpBackend b(fast_options(fake.url("/choices")));
    auto r = b.generate(req);
    CHECK(r.text == "x");
    CHECK_FALSE(r.finished);
  }
  {
    HttpBackend b(fast_options(fake.url("/flaky")));
    CHECK(b.generate(req).text == "done");
    CHECK(flaky_calls == 3);
  }
  {
    flaky_calls = 0;
    HttpBackend b(fast_options(fake.url("/down")));
    try {
      b.generate(req);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == BackendError::Kind::kTransport);
      CHECK(e.attempts() == 3);
      CHECK(e.retryable());
    }
    CHECK(flaky_calls == 3);
  }
  {
    HttpBackend b(fast_options(fake.url("/garbage")));
    try {
      b.generate(req);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == BackendError::Kind::kMalformedReply);
      CHECK(e.attempts() == 1);
    }
  }
  {
    HttpBackend b(fast_options(fake.url("/bad")));
    try {
      b.generate(req);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == BackendError::Kind::kRejected);
    }
  }
  {
    auto opts = fast_options(fake.url("/slow"));
    opts.max_attempts = 1;
    HttpBackend b(opts);
    try {
      b.generate(req);
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == BackendError::Kind::kTimeout);
    }
  }
  CHECK_THROWS_AS(HttpBackend(fast_options("ftp://nowhere")), InputError);
}

TEST_CASE("http backend reports unreachable hosts as transport errors") {
  // Nothing listens on port 1.
  HttpBackend b(fast_options("http://127.0.0.1:1/v1"));
  GenRequest req;
  req.prompt_text = "x";
  try {
    b.generate(req);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::kTransport);
    CHECK(e.attempts() == 3);
  }
}

}  // namespace
}  // namespace promptlab::presample
