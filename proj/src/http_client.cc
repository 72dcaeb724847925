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

#include "promptlab/http_client.h"

#include <regex>
#include <thread>

#include <httplib.h>

namespace promptlab {
namespace {

using Clock = std::chrono::steady_clock;

}  // namespace

std::string_view to_string(BackendError::Kind kind) {
  switch (kind) {
    case BackendError::Kind::kTimeout:
      return "timeout";
    case BackendError::Kind::kTransport:
      return "transport";
    case BackendError::Kind::kMalformedReply:
      return "malformed_reply";
    case BackendError::Kind::kRejected:
      return "rejected";
  }
  return "unknown";
}

JsonHttpClient::JsonHttpClient(HttpOptions options)
    : options_(std::move(options)) {
  static const std::regex kUrl(R"(^(http://[^/\s]+)(/\S*)?$)");
  std::smatch m;
  if (!std::regex_match(options_.endpoint, m, kUrl)) {
    throw InputError("endpoint must look like http://host:port/path, got '" +
                     options_.endpoint + "'");
  }
  scheme_host_port_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
  if (options_.max_attempts < 1) throw InputError("max_attempts must be >= 1");
  if (options_.max_in_flight < 1) throw InputError("max_in_flight must be >= 1");
  in_flight_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(options_.max_in_flight));
}

JsonHttpClient::~JsonHttpClient() = default;

nlohmann::json JsonHttpClient::attempt(const std::string& body) {
  const auto start = Clock::now();
  httplib::Client cli(scheme_host_port_);
  const auto sec =
      std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(
      options_.timeout - sec);
  cli.set_connection_timeout(sec.count(), usec.count());
  cli.set_read_timeout(sec.count(), usec.count());
  cli.set_write_timeout(sec.count(), usec.count());

  httplib::Headers headers;
  if (!options_.auth_token.empty()) {
    headers.emplace("Authorization", "Bearer " + options_.auth_token);
  }
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out =
        err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && Clock::now() - start >= options_.timeout);
    throw BackendError(timed_out ? BackendError::Kind::kTimeout
                                 : BackendError::Kind::kTransport,
                       "request to " + options_.endpoint +
                           " failed: " + httplib::to_string(err));
  }
  if (res->status == 429 || res->status >= 500) {
    throw BackendError(BackendError::Kind::kTransport,
                       options_.endpoint + " returned HTTP " +
                           std::to_string(res->status));
  }
  if (res->status >= 400) {
    throw BackendError(BackendError::Kind::kRejected,
                       options_.endpoint + " rejected the request with HTTP " +
                           std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(BackendError::Kind::kMalformedReply,
                       std::string("reply is not valid JSON: ") + e.what());
  }
}

nlohmann::json JsonHttpClient::post(const nlohmann::json& body) {
  const std::string payload = body.dump();
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{in_flight_.get()};

  auto backoff = options_.initial_backoff;
  for (int i = 1;; ++i) {
    try {
      return attempt(payload);
    } catch (const BackendError& e) {
      if (!e.retryable() || i >= options_.max_attempts) {
        throw BackendError(e.kind(), e.what(), i);
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace promptlab
