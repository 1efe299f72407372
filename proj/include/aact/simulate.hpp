#pragma once

#include "aact/metrics.hpp"
#include "aact/workflow.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aact {

/// How a simulated participant reacts to correction suggestions.
struct Policy {
  enum class Kind { always_keep, always_adopt, threshold };
  Kind kind = Kind::always_keep;
  double threshold = 0.0;

  /// "always_keep", "always_adopt" or "threshold:<p>".
  static Policy parse(std::string_view text);
  /// Whether a suggestion of this magnitude is followed. Magnitudes are
  /// |delta| for feature suggestions and the margin over 1/C for conflicts
  /// and recommendations.
  bool adopts(double magnitude) const;
};

std::string to_string(const Policy& policy);

struct SimulatedHuman {
  double initial_accuracy = 0.6;
  std::size_t min_argument = 2;
  std::size_t max_argument = 4;
  int min_confidence = 50;
  int max_confidence = 90;
};

/// Random initial decision, argument and confidence for one task.
HumanState draw_initial(const FeatureSchema& schema, const Instance& task, const SimulatedHuman& human,
                        std::mt19937_64& rng);

/// Answers dialogue messages given as message JSON, so the same responder
/// drives in-process and HTTP sessions. Every message shown must be fed in
/// order; the ones expecting input yield an answer.
class Responder {
 public:
  Responder(const FeatureSchema& schema, Policy policy, std::uint64_t seed);

  std::optional<Answer> observe(const nlohmann::json& message);

 private:
  const FeatureSchema* schema_;
  Policy policy_;
  std::mt19937_64 rng_;
  std::optional<std::string> switch_to_;
  std::optional<std::vector<std::string>> replace_argument_;
  std::set<std::string> add_;
  std::set<std::string> remove_;
};

/// Submits the initial state and answers every prompt until final.
void run_session(Session& session, Responder& responder, const HumanState& initial);

/// Test tasks on which the model is right / wrong, shuffled under seed and
/// cut to the requested counts. Throws when the split has too few of either.
std::vector<std::size_t> task_pool(const Engine& engine, std::span<const Instance> tasks,
                                   std::size_t ai_correct, std::size_t ai_wrong, std::uint64_t seed);

struct SimulationConfig {
  Policy policy;
  Mode mode = Mode::aact;
  std::size_t participants = 1;
  std::uint64_t seed = 0;
  EngineParams params;
  SimulatedHuman human;
  std::size_t ai_correct_tasks = 16;
  std::size_t ai_wrong_tasks = 4;
  std::size_t pre_tasks = 5;
  std::size_t post_tasks = 5;
  std::function<std::string()> clock;
};

struct SimulatedSession {
  std::string participant;
  std::string task_id;
  StageTag stage = StageTag::intervention;
  std::vector<TranscriptEvent> transcript;
  std::vector<Answer> answers;
};

/// Each participant sees the whole pool in its own order: the first
/// pre_tasks unassisted, then the assisted block, then post_tasks
/// unassisted.
std::vector<SimulatedSession> simulate(std::shared_ptr<const Engine> engine,
                                       std::span<const Instance> tasks, const SimulationConfig& config);

/// Per-session seed for the responder.
std::uint64_t responder_seed(std::uint64_t seed, std::string_view participant, std::string_view task_id);

}  // namespace aact
