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

#ifndef PROMPTLAB_HTTP_CLIENT_H_
#define PROMPTLAB_HTTP_CLIENT_H_

#include <chrono>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>

#include <nlohmann/json.hpp>

#include "promptlab/errors.h"

namespace promptlab {

struct HttpOptions {
  std::string endpoint;  // http://host:port/path
  std::string auth_token;  // sent as "Authorization: Bearer <token>"
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};  // doubles per retry
  std::size_t max_in_flight = 4;
};

// JSON-over-HTTP POST with bounded retries and a cap on concurrent requests.
// Thread-safe; each call opens its own connection.
class JsonHttpClient {
 public:
  // Throws InputError on a malformed endpoint or option.
  explicit JsonHttpClient(HttpOptions options);
  ~JsonHttpClient();

  // Throws BackendError once attempts are exhausted or on a non-retryable
  // failure; attempts() reports how many were made.
  nlohmann::json post(const nlohmann::json& body);

  const HttpOptions& options() const { return options_; }

 private:
  nlohmann::json attempt(const std::string& body);

  HttpOptions options_;
  std::string scheme_host_port_;
  std::string path_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

}  // namespace promptlab

#endif  // PROMPTLAB_HTTP_CLIENT_H_
