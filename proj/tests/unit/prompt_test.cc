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

#include "promptlab/prompt.h"

#include <string>
#include <vector>

#include "doctest.h"
#include "promptlab/errors.h"
#include "promptlab/random.h"
#include "promptlab/strings.h"

namespace promptlab::prompt {
namespace {

std::vector<std::string> texts(const std::vector<Tag>& tags) {
  std::vector<std::string> out;
  for (const auto& t : tags) out.push_back(t.text());
  return out;
}

TEST_CASE("parse_tags splits, trims and deduplicates") {
  CHECK(texts(parse_tags("outdoors, scenery, water")) ==
        std::vector<std::string>{"outdoors", "scenery", "water"});
  CHECK(parse_tags("").empty());
  CHECK(texts(parse_tags("a,, a ,b")) == std::vector<std::string>{"a", "b"});
  CHECK(texts(parse_tags("Long  Hair, long hair,\nsmile")) ==
        std::vector<std::string>{"long hair", "smile"});
}

TEST_CASE("tag normalization is idempotent and defines equality") {
  Rng rng(7);
  const std::string alphabet = "aB c\t,D";
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (std::size_t k = rng.below(12); k > 0; --k) {
      s.push_back(alphabet[rng.below(alphabet.size())]);
    }
    std::string once = normalize_tag(s);
    CHECK(normalize_tag(once) == once);
  }
  CHECK(Tag("Blue  Sky") == Tag("blue sky"));
  CHECK_THROWS_AS(Tag(" , "), InputError);
  CHECK_THROWS_AS(Tag("   "), InputError);
}

TEST_CASE("parse_metadata maps categories and keeps residue") {
  auto m = parse_metadata("quality: masterpiece, artist: Picasso");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].category == MetaCategory::kQuality);
  CHECK(m.entries[0].content == "masterpiece");
  CHECK(m.entries[1].category == MetaCategory::kArtist);
  CHECK(m.entries[1].content == "Picasso");
  CHECK(m.residue.empty());

  CHECK(parse_metadata("").entries.empty());

  auto other = parse_metadata("mood: calm");
  REQUIRE(other.entries.size() == 1);
  CHECK(other.entries[0].category == MetaCategory::kOther);
  CHECK(other.entries[0].label == "mood");
  CHECK(other.entries[0].serialize() == "mood: calm");

  auto mixed = parse_metadata("aspect ratio: 1.0, 1girl, solo");
  REQUIRE(mixed.entries.size() == 1);
  CHECK(mixed.entries[0].category == MetaCategory::kAspectRatio);
  CHECK(mixed.entries[0].serialize() == "aspect_ratio: 1.0");
  CHECK(mixed.residue == "1girl, solo");
}

TEST_CASE("split_sentences") {
  auto two = split_sentences("A girl. She smiles.");
  REQUIRE(two.size() == 2);
  CHECK(two[0] == Sentence{"A girl.", 1});
  CHECK(two[1] == Sentence{"She smiles.", 2});

  auto one = split_sentences("Hi");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == Sentence{"Hi", 1});

  auto abbrev = split_sentences("Dr. Lee waves. Sun sets.");
  REQUIRE(abbrev.size() == 2);
  CHECK(abbrev[0].text == "Dr. Lee waves.");

  auto punct = split_sentences("Wow!? It works.\n\"Really.\" Yes");
  REQUIRE(punct.size() == 4);
  CHECK(punct[0].text == "Wow!?");
  CHECK(punct[2].text == "\"Really.\"");
  CHECK(split_sentences("version 3.5 is out.").size() == 1);
  CHECK(split_sentences("  \n ").empty());
}

TEST_CASE("split_sentences keeps every non-space character in order") {
  Rng rng(11);
  const std::string alphabet = "ab .!?\n\"D";
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    for (std::size_t k = rng.below(40); k > 0; --k) {
      s.push_back(alphabet[rng.below(alphabet.size())]);
    }
    auto parts = split_sentences(s);
    std::string joined;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      CHECK(parts[k].index == k + 1);
      if (k) joined += ' ';
      joined += parts[k].text;
    }
    std::string a, b;
    for (char c : s) if (!is_space(c)) a += c;
    for (char c : joined) if (!is_space(c)) b += c;
    CHECK(a == b);
  }
}

TEST_CASE("serialize_prompt layout") {
  StructuredPrompt p;
  p.tags = {Tag("a"), Tag("b")};
  CHECK(serialize_prompt(p) == "a, b");

  StructuredPrompt q;
  q.meta = {MetadataEntry::make("quality", "best")};
  q.nl = {{"Hi.", 1}};
  CHECK(serialize_prompt(q) == "quality: best\nHi.");
  CHECK(parse_prompt("quality: best\nHi.") == q);
}

TEST_CASE("canonical prompts round-trip byte-equal") {
  const std::string full =
      "quality: masterpiece\nartist: picasso\nyear: 2023\n"
      "1girl, outdoors, scenery, water\n"
      "A young girl with long hair stands by a lake. Wind moves the reeds.";
  StructuredPrompt p = parse_prompt(full);
  CHECK(p.meta.size() == 3);
  CHECK(p.tags.size() == 4);
  CHECK(p.nl.size() == 2);
  CHECK(serialize_prompt(p) == full);

  Rng rng(3);
  const std::vector<std::string> words = {"sky", "red hair", "smile", "cat",
                                          "night", "1girl", "city"};
  for (int i = 0; i < 300; ++i) {
    StructuredPrompt g;
    if (rng.bernoulli(0.5)) g.meta.push_back(MetadataEntry::make("year", "2020"));
    for (std::size_t k = rng.below(5); k > 0; --k) {
      merge_tags(g.tags, std::vector<Tag>{Tag(words[rng.below(words.size())])});
    }
    for (std::size_t k = rng.below(4); k > 0; --k) {
      g.nl.push_back({"Sentence number " + std::to_string(g.nl.size()) + ".",
                      g.nl.size() + 1});
    }
    std::string s = serialize_prompt(g);
    CHECK(serialize_prompt(parse_prompt(s)) == s);
    CHECK(parse_prompt(s) == g);
    // parse_tags inverts serialization of duplicate-free tag lists.
    CHECK(parse_tags(join_tags(g.tags)) == g.tags);
  }
}

TEST_CASE("classify_length") {
  auto f = classify_length(18, 2);
  CHECK(f.length.kind == LengthKind::kVeryShort);
  CHECK_FALSE(f.overflow);
  CHECK(classify_length(19, 2).length.kind == LengthKind::kShort);
  auto over = classify_length(80, 20);
  CHECK(over.length.kind == LengthKind::kVeryLong);
  CHECK(over.overflow);

  for (const auto& c : kLengthClasses) {
    auto exact = classify_length(c.max_tags, c.max_sentences);
    CHECK(exact.length == c);
    CHECK_FALSE(exact.overflow);
  }
  CHECK(LengthClass::of(LengthKind::kLong).max_tags == 48);
  CHECK(LengthClass::of(LengthKind::kVeryLong).max_sentences == 18);
}

TEST_CASE("classify_length is monotone in both counts") {
  for (std::size_t t = 0; t < 80; ++t) {
    for (std::size_t s = 0; s < 22; ++s) {
      auto base = classify_length(t, s).length.kind;
      CHECK(classify_length(t + 1, s).length.kind >= base);
      CHECK(classify_length(t, s + 1).length.kind >= base);
    }
  }
}

}  // namespace
}  // namespace promptlab::prompt
