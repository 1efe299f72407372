#pragma once

// Drives sessions through the HTTP API, answering with a Responder.

#include "aact/error.hpp"
#include "aact/service.hpp"
#include "aact/simulate.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

namespace aact::testing {

/// Store plus a server on a free local port, torn down on destruction.
struct LiveService {
  std::shared_ptr<SessionStore> store;
  std::unique_ptr<Service> service;
  std::thread thread;
  int port = 0;

  explicit LiveService(std::shared_ptr<SessionStore> s) : store(std::move(s)) {
    service = std::make_unique<Service>(store);
    port = service->bind("127.0.0.1", 0);
    thread = std::thread([this] { service->run(); });
    service->wait_until_ready();
  }
  ~LiveService() {
    service->stop();
    if (thread.joinable()) thread.join();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(120, 0);
    return c;
  }
};

inline nlohmann::json expect_json(const httplib::Result& res, int status) {
  if (!res) throw std::runtime_error("request failed: " + httplib::to_string(res.error()));
  if (res->status != status)
    throw std::runtime_error("status " + std::to_string(res->status) + " != " + std::to_string(status) + ": " + res->body);
  return nlohmann::json::parse(res->body);
}

inline nlohmann::json post(httplib::Client& c, const std::string& path, const nlohmann::json& body, int status = 200) {
  return expect_json(c.Post(path, body.dump(), "application/json"), status);
}

/// Runs one session end to end; returns its id.
inline std::string run_http_session(httplib::Client& c, const FeatureSchema& schema, const std::string& task_id,
                                    Mode mode, const HumanState& initial, Responder& responder) {
  const auto created = post(c, "/v1/sessions", {{"task_id", task_id}, {"mode", to_string(mode)}}, 201);
  const std::string id = created.at("session_id");
  const std::string base = "/v1/sessions/" + id;
  auto state = post(c, base + "/initial",
                    {{"decision", schema.classes.at(initial.decision)},
                     {"argument", initial.argument.names(schema)},
                     {"confidence", initial.confidence}});
  while (!state.at("finished").get<bool>()) {
    const auto message = expect_json(c.Get(base + "/prompt"), 200);
    const auto answer = responder.observe(message);
    if (message.at("expected_input") == "none") {
      state = message.at("state");
      continue;
    }
    if (!answer) throw std::runtime_error("no answer for " + message.at("template_id").get<std::string>());
    if (answer->kind == Answer::Kind::reflection) {
      state = post(c, base + "/reflection", {{"reported_confidence", answer->reported_confidence}});
    } else {
      state = post(c, base + "/update", update_json(schema, answer->update));
    }
  }
  return id;
}

inline std::vector<TranscriptEvent> http_transcript(httplib::Client& c, const std::string& id) {
  std::vector<TranscriptEvent> out;
  for (const auto& e : expect_json(c.Get("/v1/sessions/" + id + "/transcript"), 200)) out.push_back(event_from_json(e));
  return out;
}

}  // namespace aact::testing
