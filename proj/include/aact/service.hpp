#pragma once

#include "aact/error.hpp"
#include "aact/workflow.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace aact {

/// A trained model with its rebuilt train split as background and the
/// held-out rows as the task queue.
struct Deployment {
  std::shared_ptr<const Engine> engine;
  std::vector<Instance> tasks;
};

/// Loads the model, reads the data against the model's schema and
/// recreates the split recorded in the training metadata.
Deployment load_deployment(const std::filesystem::path& model_path, const std::filesystem::path& data_path);

struct ServiceConfig {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path static_dir;      // optional UI assets
  std::filesystem::path transcript_dir;  // optional; finished sessions land here
  std::string host = "127.0.0.1";
  int port = 8080;
  EngineParams params;
};

/// Reads the JSON config file; relative paths resolve against its folder.
ServiceConfig load_service_config(const std::filesystem::path& path);
/// AACT_PORT, AACT_MODEL and AACT_DATA take precedence over the file.
void apply_env_overrides(ServiceConfig& config);

struct SessionRequest {
  Mode mode = Mode::aact;
  std::optional<std::string> task_id;
  std::string participant;
  std::string stage_tag = "intervention";
  // overrides on top of the store defaults
  std::optional<nlohmann::json> params;
};

SessionRequest session_request_from_json(const nlohmann::json& doc);

/// Live sessions keyed by id. Each session has its own mutex, so calls on
/// different sessions run in parallel while calls on one are serialized.
class SessionStore {
 public:
  SessionStore(Deployment deployment, EngineParams params, std::filesystem::path transcript_dir = {});

  /// Returns the new session id. Tasks are handed out round robin unless
  /// the request names one.
  std::string create(const SessionRequest& request);

  /// Runs fn(Session&) under the session's lock, then persists the
  /// transcript once the session is final.
  template <class Fn>
  auto with_session(const std::string& id, Fn&& fn) {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    struct Persist {
      SessionStore* store;
      Entry* entry;
      ~Persist() { store->persist_if_final(*entry); }
    } guard{this, entry.get()};
    return fn(entry->session);
  }

  const Deployment& deployment() const noexcept { return deployment_; }
  std::size_t size() const;

 private:
  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    std::mutex mutex;
    Session session;
    bool persisted = false;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist_if_final(Entry& entry);

  Deployment deployment_;
  EngineParams params_;
  std::filesystem::path transcript_dir_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
  std::size_t next_task_ = 0;
};

int http_status(ErrorCode code);

/// HTTP front end over a SessionStore: /v1 JSON endpoints plus an optional
/// static route for the browser client.
class Service {
 public:
  Service(std::shared_ptr<SessionStore> store, std::filesystem::path static_dir = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the socket; port 0 picks a free one. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace aact
