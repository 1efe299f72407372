#include "aact/service.hpp"

#include "aact/error.hpp"
#include "aact/serialize.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

namespace aact {

using nlohmann::json;

Deployment load_deployment(const std::filesystem::path& model_path, const std::filesystem::path& data_path) {
  Classifier model = load(model_path);
  const Dataset data = load_dataset(data_path, model.schema());
  const auto& meta = model.meta();
  Split parts = split(data, meta.split_ratio, meta.split_seed, meta.stratified);
  Deployment out;
  out.tasks = std::move(parts.test.rows);
  out.engine = std::make_shared<const Engine>(std::move(model), std::move(parts.train));
  return out;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  const auto resolve = [&](const char* key) -> std::filesystem::path {
    if (!doc.contains(key)) return {};
    std::filesystem::path p = doc.at(key).get<std::string>();
    return p.is_relative() ? base / p : p;
  };
  ServiceConfig config;
  try {
    config.model = resolve("model");
    config.data = resolve("data");
    config.static_dir = resolve("static_dir");
    config.transcript_dir = resolve("transcript_dir");
    config.host = doc.value("host", config.host);
    config.port = doc.value("port", config.port);
    if (doc.contains("params")) config.params = params_from_json(doc.at("params"));
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, path.string() + ": " + e.what());
  }
  return config;
}

void apply_env_overrides(ServiceConfig& config) {
  if (const char* port = std::getenv("AACT_PORT")) {
    try {
      config.port = std::stoi(port);
    } catch (const std::exception&) {
      fail(ErrorCode::invalid_argument, "AACT_PORT is not a number");
    }
  }
  if (const char* model = std::getenv("AACT_MODEL")) config.model = model;
  if (const char* data = std::getenv("AACT_DATA")) config.data = data;
}

SessionRequest session_request_from_json(const json& doc) {
  SessionRequest request;
  if (doc.is_null()) return request;
  if (!doc.is_object()) fail(ErrorCode::invalid_argument, "request body must be a JSON object");
  try {
    if (doc.contains("mode")) request.mode = mode_from_string(doc.at("mode").get<std::string>());
    if (doc.contains("task_id")) request.task_id = doc.at("task_id").get<std::string>();
    request.participant = doc.value("participant", std::string());
    request.stage_tag = doc.value("stage_tag", request.stage_tag);
    if (doc.contains("params")) request.params = doc.at("params");
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("session request: ") + e.what());
  }
  return request;
}

SessionStore::SessionStore(Deployment deployment, EngineParams params, std::filesystem::path transcript_dir)
    : deployment_(std::move(deployment)), params_(params), transcript_dir_(std::move(transcript_dir)) {
  if (!deployment_.engine) fail(ErrorCode::invalid_argument, "session store needs an engine");
  if (deployment_.tasks.empty()) fail(ErrorCode::invalid_argument, "session store needs at least one task");
  params_.validate();
  if (!transcript_dir_.empty()) std::filesystem::create_directories(transcript_dir_);
}

std::string SessionStore::create(const SessionRequest& request) {
  const EngineParams params = request.params ? params_from_json(*request.params, params_) : params_;
  const Instance* task = nullptr;
  std::string id;
  {
    std::unique_lock lock(mutex_);
    if (request.task_id) {
      for (const auto& t : deployment_.tasks) {
        if (t.id == *request.task_id) task = &t;
      }
      if (!task) fail(ErrorCode::not_found, "unknown task " + *request.task_id);
    } else {
      task = &deployment_.tasks[next_task_++ % deployment_.tasks.size()];
    }
    id = "s" + std::to_string(next_id_++);
  }
  SessionOptions options;
  options.participant = request.participant;
  options.stage_tag = request.stage_tag;
  auto entry = std::make_shared<Entry>(Session(id, deployment_.engine, *task, request.mode, params, options));
  std::unique_lock lock(mutex_);
  sessions_.emplace(id, std::move(entry));
  return id;
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) fail(ErrorCode::not_found, "unknown session " + id);
  return it->second;
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

void SessionStore::persist_if_final(Entry& entry) {
  if (entry.persisted || !entry.session.finished() || transcript_dir_.empty()) return;
  const auto path = transcript_dir_ / (entry.session.id() + ".jsonl");
  std::ofstream out(path);
  out << transcript_jsonl(entry.session.transcript());
  if (!out) {
    std::cerr << "failed to write " << path << '\n';
    return;
  }
  entry.persisted = true;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::unexpected_step: return 409;
    case ErrorCode::not_implemented: return 501;
    case ErrorCode::io_error:
    case ErrorCode::runtime_failure: return 500;
  }
  return 500;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), {{"code", to_string(code)}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nullptr;
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("malformed JSON body: ") + e.what());
  }
}

json state_json(const Session& s) {
  return {{"session_id", s.id()},
          {"stage", to_string(s.stage())},
          {"item", s.item()},
          {"step", to_string(s.step())},
          {"finished", s.finished()}};
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const json::exception& e) {
    send_error(res, ErrorCode::invalid_argument, e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorCode::runtime_failure, e.what());
  }
}

}  // namespace

struct Service::Impl {
  std::shared_ptr<SessionStore> store;
  httplib::Server server;
};

Service::Service(std::shared_ptr<SessionStore> store, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>()) {
  impl_->store = std::move(store);
  auto& server = impl_->server;
  const std::shared_ptr<SessionStore> st = impl_->store;
  const FeatureSchema& schema = st->deployment().engine->schema();
  const std::string sid = R"(/v1/sessions/([^/]+))";

  server.new_task_queue = [] {
    return new httplib::ThreadPool(std::max<std::size_t>(16, 2 * std::thread::hardware_concurrency()));
  };

  // httplib's default also sets SO_REUSEPORT, which lets a second server
  // share a port that is already taken
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });

  server.Get("/v1/health", [st](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"sessions", st->size()}, {"tasks", st->deployment().tasks.size()}});
  });

  server.Post("/v1/sessions", [st, &schema](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = st->create(session_request_from_json(parse_body(req)));
      st->with_session(id, [&](Session& s) {
        json body = state_json(s);
        body["mode"] = to_string(s.mode());
        body["task"] = task_json(schema, s.task());
        send_json(res, 201, body);
      });
    });
  });

  server.Get(sid + "/task", [st, &schema](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      st->with_session(req.matches[1], [&](Session& s) { send_json(res, 200, task_json(schema, s.task())); });
    });
  });

  server.Post(sid + "/initial", [st, &schema](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      if (!body.is_object()) fail(ErrorCode::invalid_argument, "initial needs decision, argument and confidence");
      std::size_t decision = 0;
      Argument argument;
      int confidence = 0;
      try {
        const auto label = body.at("decision").get<std::string>();
        const auto it = std::find(schema.classes.begin(), schema.classes.end(), label);
        if (it == schema.classes.end()) fail(ErrorCode::invalid_argument, "unknown decision '" + label + "'");
        decision = static_cast<std::size_t>(it - schema.classes.begin());
        const auto names = body.at("argument").get<std::vector<std::string>>();
        for (const auto& n : names) {
          if (!schema.find(n)) fail(ErrorCode::invalid_argument, "argument feature '" + n + "' is not in the task");
        }
        argument = Argument::from_names(schema, names);
        confidence = body.at("confidence").get<int>();
      } catch (const json::exception& e) {
        fail(ErrorCode::invalid_argument, std::string("initial: ") + e.what());
      }
      st->with_session(req.matches[1], [&](Session& s) {
        s.submit_initial(decision, argument, confidence);
        send_json(res, 200, state_json(s));
      });
    });
  });

  server.Get(sid + "/prompt", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      st->with_session(req.matches[1], [&](Session& s) {
        const auto message = s.next_prompt();
        json body = message_json(message);
        body["state"] = state_json(s);
        send_json(res, 200, body);
      });
    });
  });

  server.Post(sid + "/reflection", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      if (!body.is_object() || !body.contains("reported_confidence") || !body["reported_confidence"].is_number_integer())
        fail(ErrorCode::invalid_argument, "reflection needs an integer reported_confidence");
      const int reported = body["reported_confidence"].get<int>();
      st->with_session(req.matches[1], [&](Session& s) {
        s.submit_reflection(reported);
        send_json(res, 200, state_json(s));
      });
    });
  });

  server.Post(sid + "/update", [st, &schema](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      const HumanUpdate update = body.is_null() ? HumanUpdate{} : update_from_json(schema, body);
      st->with_session(req.matches[1], [&](Session& s) {
        s.submit_update(update);
        send_json(res, 200, state_json(s));
      });
    });
  });

  server.Post(sid + "/skip", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      st->with_session(req.matches[1], [&](Session& s) {
        s.skip();
        send_json(res, 200, state_json(s));
      });
    });
  });

  server.Get(sid + "/transcript", [st](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      st->with_session(req.matches[1], [&](Session& s) {
        json events = json::array();
        for (const auto& e : s.transcript()) events.push_back(event_json(e));
        send_json(res, 200, events);
      });
    });
  });

  if (!static_dir.empty()) {
    if (!server.set_mount_point("/", static_dir.string()))
      fail(ErrorCode::io_error, "static directory " + static_dir.string() + " does not exist");
  }
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) fail(ErrorCode::runtime_failure, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    fail(ErrorCode::runtime_failure, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace aact
