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

#include "promptlab/backend.h"

#include <algorithm>
#include <array>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "promptlab/prompt.h"
#include "promptlab/random.h"
#include "promptlab/strings.h"
#include "promptlab/tasks.h"

namespace promptlab::presample {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::array<std::string_view, 96> kTagVocabulary = {
    "1girl",          "1boy",           "solo",           "long hair",
    "short hair",     "smile",          "looking at viewer", "blush",
    "open mouth",     "blue eyes",      "brown hair",     "black hair",
    "blonde hair",    "red eyes",       "green eyes",     "dress",
    "skirt",          "shirt",          "jacket",         "hat",
    "ribbon",         "bow",            "gloves",         "holding",
    "standing",       "sitting",        "walking",        "upper body",
    "full body",      "cowboy shot",    "from side",      "from behind",
    "outdoors",       "indoors",        "sky",            "cloud",
    "blue sky",       "day",            "night",          "sunset",
    "sunlight",       "tree",           "grass",          "flower",
    "water",          "ocean",          "beach",          "river",
    "mountain",       "forest",         "city",           "building",
    "street",         "road",           "bridge",         "scenery",
    "landscape",      "wind",           "rain",           "snow",
    "reflection",     "shadow",         "light rays",     "depth of field",
    "blurry background", "bokeh",       "detailed background", "wide shot",
    "close-up",       "portrait",       "animal",         "cat",
    "dog",            "bird",           "horse",          "fish",
    "boat",           "car",            "lantern",        "window",
    "curtains",       "table",          "chair",          "book",
    "cup",            "umbrella",       "bag",            "scarf",
    "earrings",       "necklace",       "braid",          "ponytail",
    "twintails",      "hair ornament",  "floating hair",  "wavy hair",
};

constexpr std::array<std::string_view, 40> kSentenceVocabulary = {
    "The scene is bathed in soft morning light.",
    "A gentle breeze moves through the grass.",
    "Clouds drift slowly across a pale blue sky.",
    "Her expression is calm and thoughtful.",
    "The background fades into a soft blur.",
    "Warm sunlight filters through the leaves.",
    "Small ripples spread across the surface of the water.",
    "The colors are muted with hints of gold.",
    "Distant mountains rise beyond the horizon.",
    "A narrow path winds toward the trees.",
    "The composition draws the eye to the center.",
    "Long shadows stretch across the ground.",
    "Her hair flutters lightly in the wind.",
    "The air feels cool and clear.",
    "Reflections shimmer on the wet stones.",
    "A few birds circle high overhead.",
    "The lighting gives the image a cinematic mood.",
    "Fine details are visible in the fabric of her clothes.",
    "The foreground is framed by tall reeds.",
    "Soft pastel tones dominate the palette.",
    "A wooden bridge crosses the stream.",
    "The sky glows orange near the horizon.",
    "Her gaze is directed toward the distance.",
    "The overall atmosphere is peaceful.",
    "Gentle waves lap against the shore.",
    "Petals are scattered across the path.",
    "The perspective is slightly low, looking upward.",
    "Mist hangs over the surface of the lake.",
    "The image has a dreamy, painterly quality.",
    "A faint rainbow arcs across the sky.",
    "Sunlight catches the edges of her hair.",
    "The trees sway softly in the breeze.",
    "Her hands rest lightly at her sides.",
    "The scene balances open space with rich detail.",
    "Dew glistens on the blades of grass.",
    "The horizon line sits low in the frame.",
    "Light and shadow create a strong contrast.",
    "The water reflects the colors of the sky.",
    "A quiet stillness fills the landscape.",
    "The image is rendered with crisp, clean lines.",
};

constexpr std::array<std::string_view, 4> kQualities = {
    "masterpiece", "best quality", "high quality", "newest"};

template <typename T>
std::size_t last_token(std::string_view text, const T& candidates) {
  std::size_t best = candidates.size();
  std::size_t best_pos = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::size_t p = text.rfind(candidates[i]);
    if (p != std::string_view::npos && (best == candidates.size() || p > best_pos)) {
      best = i;
      best_pos = p;
    }
  }
  return best;
}

std::unordered_set<std::string> tags_in(std::string_view prompt_text) {
  std::unordered_set<std::string> out;
  for (std::string_view line : split(prompt_text, '\n')) {
    std::string clean(line);
    for (const auto& tok : tasks::find_token_like(line)) {
      std::size_t p = clean.find(tok);
      if (p != std::string::npos) clean.replace(p, tok.size(), ", ");
    }
    std::string_view view = clean;
    for (std::string_view label : {"tag: ", "long: ", "short: "}) {
      if (starts_with(view, label)) view.remove_prefix(label.size());
    }
    for (const auto& t : prompt::parse_tags(view)) out.insert(t.text());
  }
  return out;
}

}  // namespace

std::vector<std::string> default_stop_markers() {
  const auto& t = tasks::special_tokens();
  return {t.begin(), t.end()};
}

bool apply_stop_markers(std::string& text,
                        std::span<const std::string> markers) {
  std::size_t cut = std::string::npos;
  for (const auto& m : markers) {
    if (m.empty()) continue;
    cut = std::min(cut, text.find(m));
  }
  if (cut == std::string::npos) return false;
  text.erase(cut);
  return true;
}

std::span<const std::string_view> MockBackend::tag_vocabulary() {
  return kTagVocabulary;
}

std::span<const std::string_view> MockBackend::sentence_vocabulary() {
  return kSentenceVocabulary;
}

GenResponse MockBackend::generate(const GenRequest& req) {
  const auto start = Clock::now();
  Rng rng(derive_seed(req.seed, req.prompt_text));

  std::vector<std::string> task_tokens;
  for (auto t : tasks::kAllTasks) task_tokens.push_back(tasks::task_token(t));
  std::vector<std::string> length_tokens;
  for (const auto& c : prompt::kLengthClasses) {
    length_tokens.push_back(tasks::length_token(c.kind));
  }
  std::size_t ti = last_token(req.prompt_text, task_tokens);
  std::size_t li = last_token(req.prompt_text, length_tokens);
  const auto task =
      ti < task_tokens.size() ? tasks::kAllTasks[ti] : tasks::TaskKind::kShortToTag;
  const auto& length = li < length_tokens.size()
                           ? prompt::kLengthClasses[li]
                           : prompt::LengthClass::of(prompt::LengthKind::kLong);

  std::unordered_set<std::string> used = tags_in(req.prompt_text);
  std::vector<std::string> lines;
  for (auto kind : tasks::layout(task).outputs) {
    std::vector<std::string> picked;
    if (kind == tasks::OutputKind::kTags) {
      std::vector<std::string_view> pool;
      for (auto t : kTagVocabulary) {
        if (!used.contains(std::string(t))) pool.push_back(t);
      }
      rng.shuffle(pool);
      const std::size_t k = std::min(tags_per_line(length.max_tags), pool.size());
      for (std::size_t i = 0; i < k; ++i) {
        picked.emplace_back(pool[i]);
        used.emplace(pool[i]);
      }
      lines.push_back(join(picked, ", "));
    } else if (kind == tasks::OutputKind::kSentences) {
      std::vector<std::string_view> pool;
      for (auto s : kSentenceVocabulary) {
        if (req.prompt_text.find(s) == std::string::npos &&
            !used.contains(std::string(s))) {
          pool.push_back(s);
        }
      }
      rng.shuffle(pool);
      const std::size_t k =
          std::min(sentences_per_line(length.max_sentences), pool.size());
      for (std::size_t i = 0; i < k; ++i) {
        picked.emplace_back(pool[i]);
        used.emplace(pool[i]);
      }
      lines.push_back(join(picked, " "));
    } else {
      lines.push_back("quality: " +
                      std::string(kQualities[rng.below(kQualities.size())]) +
                      ", year: " + std::to_string(2015 + rng.below(10)));
    }
  }

  GenResponse resp;
  resp.text = join(lines, "\n");
  resp.finished = true;
  if (resp.text.size() > req.max_new_units) {
    resp.text.resize(req.max_new_units);
    resp.finished = false;
  }
  if (apply_stop_markers(resp.text, req.stop_markers)) resp.finished = true;
  resp.elapsed = Clock::now() - start;
  return resp;
}

GenResponse HttpBackend::generate(const GenRequest& req) {
  if (req.max_new_units < 1) throw PreconditionError("max_new_units must be >= 1");
  const auto start = Clock::now();
  nlohmann::json body = {
      {"prompt", req.prompt_text},      {"max_tokens", req.max_new_units},
      {"temperature", req.temperature}, {"seed", req.seed},
      {"stop", req.stop_markers},
  };
  nlohmann::json j = client_.post(body);

  GenResponse out;
  auto malformed = [] {
    return BackendError(BackendError::Kind::kMalformedReply,
                        "backend reply has no completion text");
  };
  if (!j.is_object()) throw malformed();
  if (j.contains("text") && j["text"].is_string()) {
    out.text = j["text"].get<std::string>();
    out.finished = !j.contains("finished") || j["finished"] != false;
  } else if (j.contains("content") && j["content"].is_string()) {
    out.text = j["content"].get<std::string>();
  } else if (j.contains("choices") && j["choices"].is_array() &&
             !j["choices"].empty() && j["choices"][0].is_object() &&
             j["choices"][0].contains("text") &&
             j["choices"][0]["text"].is_string()) {
    const auto& c = j["choices"][0];
    out.text = c["text"].get<std::string>();
    out.finished =
        !(c.contains("finish_reason") && c["finish_reason"] == "length");
  } else {
    throw malformed();
  }
  if (apply_stop_markers(out.text, req.stop_markers)) out.finished = true;
  out.elapsed = Clock::now() - start;
  return out;
}

}  // namespace promptlab::presample
