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

#ifndef PROMPTLAB_SURVEY_SERVER_H_
#define PROMPTLAB_SURVEY_SERVER_H_

#include <memory>
#include <string>

#include "promptlab/survey.h"

namespace promptlab::survey {

struct ServerOptions {
  std::string ui_dir;      // served at "/" when set
  std::string images_dir;  // served at "/images" when set
};

inline constexpr const char* kRaterHeader = "X-Rater-Id";
inline constexpr const char* kRaterCookie = "promptlab_rater";

// HTTP front end over a SurveyStore:
//   GET  /api/pair                 blinded pair or {"status":"no_more_pairs"}
//   POST /api/vote    {"pair_id", "choices": {metric: "A"|"tie"|"B"}}
//   POST /api/refresh {"pair_id"}
//   GET  /api/results[?metric=...&base=...]
// Raters are identified by the X-Rater-Id header, else a cookie that is
// issued on first contact.
class SurveyServer {
 public:
  SurveyServer(SurveyStore& store, ServerOptions options = {});
  ~SurveyServer();
  SurveyServer(const SurveyServer&) = delete;
  SurveyServer& operator=(const SurveyServer&) = delete;

  // Binds without serving yet; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptlab::survey

#endif  // PROMPTLAB_SURVEY_SERVER_H_
