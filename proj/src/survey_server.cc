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

#include "promptlab/survey_server.h"

#include <cstdlib>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "promptlab/errors.h"
#include "promptlab/strings.h"

namespace promptlab::survey {
namespace {

constexpr const char* kJson = "application/json";

void send_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", msg}}.dump(), kJson);
}

std::string cookie_value(const httplib::Request& req, std::string_view name) {
  const std::string header = req.get_header_value("Cookie");
  for (std::string_view part : split(header, ';')) {
    part = trim(part);
    auto eq = part.find('=');
    if (eq == std::string_view::npos) continue;
    if (trim(part.substr(0, eq)) == name) {
      return std::string(trim(part.substr(eq + 1)));
    }
  }
  return {};
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    nlohmann::json j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw InputError("request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::string pair_id_of(const nlohmann::json& j) {
  if (!j.contains("pair_id") || !j["pair_id"].is_string()) {
    throw InputError("request needs a string \"pair_id\"");
  }
  return j["pair_id"].get<std::string>();
}

}  // namespace

struct SurveyServer::Impl {
  SurveyStore& store;
  ServerOptions options;
  httplib::Server server;

  Impl(SurveyStore& s, ServerOptions o) : store(s), options(std::move(o)) {}

  std::string rater(const httplib::Request& req, httplib::Response& res) {
    std::string id = req.get_header_value(kRaterHeader);
    if (id.empty()) id = cookie_value(req, kRaterCookie);
    if (id.empty()) {
      id = store.issue_rater_id();
      res.set_header("Set-Cookie", std::string(kRaterCookie) + "=" + id +
                                       "; Path=/; SameSite=Lax");
    }
    return id;
  }

  template <typename F>
  void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
      send_error(res, 409, e.what());
    } catch (const PreconditionError& e) {
      send_error(res, 409, e.what());
    } catch (const InputError& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      send_error(res, 500, e.what());
    }
  }

  void routes() {
    server.Get("/api/pair", [this](const httplib::Request& req,
                                   httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = rater(req, res);
        res.set_content(to_json(store.next_pair(id)).dump(), kJson);
      });
    });
    server.Post("/api/vote", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = rater(req, res);
        nlohmann::json body = parse_body(req);
        const std::string pair_id = pair_id_of(body);
        if (!body.contains("choices")) throw InputError("request needs \"choices\"");
        Choices choices = choices_from_json(body["choices"]);
        res.set_content(to_json(store.submit_vote(id, pair_id, choices)).dump(),
                        kJson);
      });
    });
    server.Post("/api/refresh", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = rater(req, res);
        nlohmann::json body = parse_body(req);
        res.set_content(to_json(store.refresh_pair(id, pair_id_of(body))).dump(),
                        kJson);
      });
    });
    server.Get("/api/results", [this](const httplib::Request& req,
                                      httplib::Response& res) {
      guarded(res, [&] {
        std::optional<pref::Metric> metric;
        if (req.has_param("metric") && req.get_param_value("metric") != "all") {
          metric = pref::parse_metric(req.get_param_value("metric"));
          if (!metric) throw InputError("unknown metric '" +
                                        req.get_param_value("metric") + "'");
        }
        double base = pref::kDefaultBase;
        if (req.has_param("base")) {
          const std::string b = req.get_param_value("base");
          char* end = nullptr;
          base = std::strtod(b.c_str(), &end);
          if (b.empty() || *end != '\0') throw InputError("base must be a number");
        }
        res.set_content(store.results_text(metric, base), kJson);
      });
    });
    if (!options.images_dir.empty() &&
        !server.set_mount_point("/images", options.images_dir)) {
      throw InputError("images directory '" + options.images_dir +
                       "' does not exist");
    }
    if (!options.ui_dir.empty() && !server.set_mount_point("/", options.ui_dir)) {
      throw InputError("ui directory '" + options.ui_dir + "' does not exist");
    }
  }
};

SurveyServer::SurveyServer(SurveyStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

SurveyServer::~SurveyServer() { stop(); }

int SurveyServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

bool SurveyServer::listen() { return impl_->server.listen_after_bind(); }

void SurveyServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void SurveyServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace promptlab::survey
