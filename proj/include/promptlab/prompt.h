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

// Prompt domain types and their text forms.
//
// A prompt has three parts: metadata entries ("quality: masterpiece"),
// comma-separated content tags, and ordered natural-language sentences. The
// canonical text layout puts one metadata entry per line, then a single tag
// line, then a single line of space-joined sentences.

#ifndef PROMPTLAB_PROMPT_H_
#define PROMPTLAB_PROMPT_H_

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace promptlab::prompt {

// Lowercases ASCII, collapses whitespace runs to one space, trims.
std::string normalize_tag(std::string_view text);

class Tag {
 public:
  // Throws InputError if the normalized text is empty or holds a comma or
  // newline.
  explicit Tag(std::string_view text);

  static std::optional<Tag> try_make(std::string_view text);

  const std::string& text() const { return text_; }

  friend bool operator==(const Tag&, const Tag&) = default;
  friend auto operator<=>(const Tag&, const Tag&) = default;

 private:
  struct Normalized {};
  Tag(Normalized, std::string text) : text_(std::move(text)) {}
  std::string text_;
};

struct Sentence {
  std::string text;
  std::size_t index = 1;  // 1-based position in the source caption

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

enum class MetaCategory {
  kArtist,
  kCopyright,
  kCharacter,
  kAspectRatio,
  kQuality,
  kYear,
  kOther,
};

struct MetadataEntry {
  MetaCategory category = MetaCategory::kOther;
  std::string label;  // only meaningful for kOther
  std::string content;

  // Maps a key onto a known category, or kOther carrying the key as label.
  static MetadataEntry make(std::string_view key, std::string_view content);

  std::string key() const;
  // "<key>: <content>"
  std::string serialize() const;

  friend bool operator==(const MetadataEntry&, const MetadataEntry&) = default;
};

struct MetadataParse {
  std::vector<MetadataEntry> entries;
  // Comma-joined segments that were not "key: value".
  std::string residue;
};

enum class LengthKind { kVeryShort, kShort, kLong, kVeryLong };

struct LengthClass {
  LengthKind kind;
  std::size_t max_tags;
  std::size_t max_sentences;

  static const LengthClass& of(LengthKind kind);
  // "very_short", "short", "long", "very_long"
  std::string_view name() const;

  friend bool operator==(const LengthClass&, const LengthClass&) = default;
};

// Smallest to largest.
inline constexpr std::array<LengthClass, 4> kLengthClasses = {{
    {LengthKind::kVeryShort, 18, 2},
    {LengthKind::kShort, 36, 4},
    {LengthKind::kLong, 48, 8},
    {LengthKind::kVeryLong, 72, 18},
}};

std::optional<LengthKind> parse_length_kind(std::string_view name);

struct LengthFit {
  LengthClass length;
  bool overflow = false;
};

// Smallest class whose caps hold both counts; very_long with overflow set
// when nothing fits.
LengthFit classify_length(std::size_t tag_count, std::size_t sentence_count);

struct StructuredPrompt {
  std::vector<MetadataEntry> meta;
  std::vector<Tag> tags;
  std::vector<Sentence> nl;

  bool empty() const { return meta.empty() && tags.empty() && nl.empty(); }

  friend bool operator==(const StructuredPrompt&,
                         const StructuredPrompt&) = default;
};

// Splits on commas and newlines, trims, drops empties, removes duplicates
// under normalization keeping the first occurrence.
std::vector<Tag> parse_tags(std::string_view text);

MetadataParse parse_metadata(std::string_view text);

// A whole line of metadata: every comma segment is "key: value" and no
// content ends like a sentence. nullopt otherwise.
std::optional<std::vector<MetadataEntry>> parse_metadata_line(
    std::string_view line);

// Rule-based splitter on . ! ? followed by whitespace or end of text, with a
// guard list of common abbreviations and single-letter initials.
std::vector<Sentence> split_sentences(std::string_view text);

std::string join_tags(std::span<const Tag> tags);
std::string join_sentences(std::span<const Sentence> sentences);

// Appends tags not already present, preserving order.
void merge_tags(std::vector<Tag>& into, std::span<const Tag> extra);

std::string serialize_prompt(const StructuredPrompt& p);

// Inverse of serialize_prompt on canonical strings. A line whose every
// comma segment is "key: value" is metadata; of the remaining lines the
// first is tags and the rest are sentences, except that a lone content line
// ending in . ! or ? is read as sentences.
StructuredPrompt parse_prompt(std::string_view text);

}  // namespace promptlab::prompt

#endif  // PROMPTLAB_PROMPT_H_
