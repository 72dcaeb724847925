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

#include <algorithm>
#include <set>
#include <unordered_set>

#include "promptlab/errors.h"
#include "promptlab/strings.h"

namespace promptlab::prompt {
namespace {

struct CategoryName {
  MetaCategory category;
  std::string_view key;
};

constexpr std::array<CategoryName, 6> kCategoryNames = {{
    {MetaCategory::kArtist, "artist"},
    {MetaCategory::kCopyright, "copyright"},
    {MetaCategory::kCharacter, "character"},
    {MetaCategory::kAspectRatio, "aspect_ratio"},
    {MetaCategory::kQuality, "quality"},
    {MetaCategory::kYear, "year"},
}};

// Abbreviations whose trailing period does not end a sentence.
const std::set<std::string, std::less<>>& abbreviations() {
  static const std::set<std::string, std::less<>> kAbbrev = {
      "dr", "mr", "mrs", "ms", "st", "jr", "sr", "prof", "vs", "e.g",
      "i.e", "no", "mt", "ft", "fig", "approx", "inc", "ltd", "co", "gen"};
  return kAbbrev;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) {
  return c == '"' || c == '\'' || c == ')' || c == ']' || c == '}';
}

// Word immediately before position `dot`, lowercased, leading quote or
// bracket stripped.
std::string word_before(std::string_view text, std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !is_space(text[b - 1])) --b;
  std::string_view w = text.substr(b, dot - b);
  while (!w.empty() && (w.front() == '"' || w.front() == '(' ||
                        w.front() == '\'' || w.front() == '[')) {
    w.remove_prefix(1);
  }
  return to_lower(w);
}

bool guarded_abbreviation(std::string_view text, std::size_t dot) {
  std::string w = word_before(text, dot);
  if (w.empty()) return false;
  if (w.size() == 1 && w[0] >= 'a' && w[0] <= 'z') return true;  // initials
  return abbreviations().contains(w);
}

// Accepts "key: value" where key is a known category (including the spaced
// form "aspect ratio") or a single [a-z0-9_] token.
std::optional<MetadataEntry> parse_entry(std::string_view segment) {
  segment = trim(segment);
  std::size_t sep = segment.find(": ");
  if (sep == std::string_view::npos) return std::nullopt;
  std::string key = to_lower(trim(segment.substr(0, sep)));
  std::string_view content = trim(segment.substr(sep + 2));
  if (key.empty() || content.empty()) return std::nullopt;
  if (key == "aspect ratio") key = "aspect_ratio";
  for (char c : key) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return std::nullopt;
  }
  return MetadataEntry::make(key, content);
}

std::string_view strip_closers(std::string_view s) {
  while (!s.empty() && is_closer(s.back())) s.remove_suffix(1);
  return s;
}

bool looks_like_sentences(std::string_view line) {
  std::string_view s = strip_closers(trim(line));
  return !s.empty() && is_terminator(s.back());
}

}  // namespace

std::optional<std::vector<MetadataEntry>> parse_metadata_line(
    std::string_view line) {
  std::vector<MetadataEntry> entries;
  for (std::string_view seg : split(line, ',')) {
    auto e = parse_entry(seg);
    if (!e || looks_like_sentences(e->content)) return std::nullopt;
    entries.push_back(std::move(*e));
  }
  return entries;
}

std::string normalize_tag(std::string_view text) {
  return to_lower(collapse_spaces(text));
}

Tag::Tag(std::string_view text) : text_(normalize_tag(text)) {
  if (text_.empty()) throw InputError("tag is empty");
  if (text_.find(',') != std::string::npos) {
    throw InputError("tag contains a comma: " + text_);
  }
}

std::optional<Tag> Tag::try_make(std::string_view text) {
  std::string n = normalize_tag(text);
  if (n.empty() || n.find(',') != std::string::npos) return std::nullopt;
  return Tag(Normalized{}, std::move(n));
}

MetadataEntry MetadataEntry::make(std::string_view key,
                                  std::string_view content) {
  std::string k = to_lower(trim(key));
  if (k == "aspect ratio") k = "aspect_ratio";
  MetadataEntry e;
  e.content = collapse_spaces(content);
  if (e.content.empty()) throw InputError("metadata content is empty");
  for (const auto& c : kCategoryNames) {
    if (c.key == k) {
      e.category = c.category;
      return e;
    }
  }
  if (k.empty()) throw InputError("metadata key is empty");
  e.category = MetaCategory::kOther;
  e.label = std::move(k);
  return e;
}

std::string MetadataEntry::key() const {
  for (const auto& c : kCategoryNames) {
    if (c.category == category) return std::string(c.key);
  }
  return label;
}

std::string MetadataEntry::serialize() const { return key() + ": " + content; }

const LengthClass& LengthClass::of(LengthKind kind) {
  return kLengthClasses[static_cast<std::size_t>(kind)];
}

std::string_view LengthClass::name() const {
  switch (kind) {
    case LengthKind::kVeryShort:
      return "very_short";
    case LengthKind::kShort:
      return "short";
    case LengthKind::kLong:
      return "long";
    case LengthKind::kVeryLong:
      return "very_long";
  }
  return "long";
}

std::optional<LengthKind> parse_length_kind(std::string_view name) {
  for (const auto& c : kLengthClasses) {
    if (c.name() == name) return c.kind;
  }
  return std::nullopt;
}

LengthFit classify_length(std::size_t tag_count, std::size_t sentence_count) {
  for (const auto& c : kLengthClasses) {
    if (c.max_tags >= tag_count && c.max_sentences >= sentence_count) {
      return {c, false};
    }
  }
  return {kLengthClasses.back(), true};
}

std::vector<Tag> parse_tags(std::string_view text) {
  std::vector<Tag> out;
  std::unordered_set<std::string> seen;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == ',' || text[i] == '\n') {
      if (auto t = Tag::try_make(text.substr(start, i - start))) {
        if (seen.insert(t->text()).second) out.push_back(std::move(*t));
      }
      start = i + 1;
    }
  }
  return out;
}

MetadataParse parse_metadata(std::string_view text) {
  MetadataParse out;
  std::vector<std::string> residue;
  for (std::string_view line : split(text, '\n')) {
    for (std::string_view seg : split(line, ',')) {
      if (trim(seg).empty()) continue;
      if (auto e = parse_entry(seg)) {
        out.entries.push_back(std::move(*e));
      } else {
        residue.emplace_back(trim(seg));
      }
    }
  }
  out.residue = join(residue, ", ");
  return out;
}

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> out;
  auto emit = [&](std::string_view piece) {
    std::string s = collapse_spaces(piece);
    if (!s.empty()) out.push_back({std::move(s), out.size() + 1});
  };
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_terminator(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && (is_terminator(text[j]) || is_closer(text[j]))) {
      ++j;
    }
    bool at_break = j == text.size() || is_space(text[j]);
    bool guarded = text[i] == '.' && j == i + 1 && guarded_abbreviation(text, i);
    if (at_break && !guarded) {
      emit(text.substr(start, j - start));
      start = j;
    }
    i = j;
  }
  emit(text.substr(start));
  return out;
}

std::string join_tags(std::span<const Tag> tags) {
  std::string out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (i) out += ", ";
    out += tags[i].text();
  }
  return out;
}

std::string join_sentences(std::span<const Sentence> sentences) {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += ' ';
    out += sentences[i].text;
  }
  return out;
}

void merge_tags(std::vector<Tag>& into, std::span<const Tag> extra) {
  std::unordered_set<std::string> seen;
  for (const auto& t : into) seen.insert(t.text());
  for (const auto& t : extra) {
    if (seen.insert(t.text()).second) into.push_back(t);
  }
}

std::string serialize_prompt(const StructuredPrompt& p) {
  std::vector<std::string> lines;
  for (const auto& e : p.meta) lines.push_back(e.serialize());
  if (!p.tags.empty()) lines.push_back(join_tags(p.tags));
  if (!p.nl.empty()) lines.push_back(join_sentences(p.nl));
  return join(lines, "\n");
}

StructuredPrompt parse_prompt(std::string_view text) {
  StructuredPrompt p;
  std::vector<std::string_view> content;
  for (std::string_view line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    if (auto entries = parse_metadata_line(line)) {
      for (auto& e : *entries) p.meta.push_back(std::move(e));
    } else {
      content.push_back(line);
    }
  }
  if (content.empty()) return p;
  if (content.size() == 1 && looks_like_sentences(content.front())) {
    p.nl = split_sentences(content.front());
    return p;
  }
  p.tags = parse_tags(content.front());
  std::string rest;
  for (std::size_t i = 1; i < content.size(); ++i) {
    if (i > 1) rest += ' ';
    rest += content[i];
  }
  p.nl = split_sentences(rest);
  return p;
}

}  // namespace promptlab::prompt
