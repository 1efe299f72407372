#pragma once

#include "aact/counterfactual.hpp"
#include "aact/templates.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aact {

enum class Mode { aact, recommender, analyzer, human_only };

/// Dialogue stages. `assist` is the single assistance step of the
/// recommender and analyzer modes.
enum class Stage { await_initial, agreement, incompleteness, unreliability, conflict, assist, final };

enum class Step { inform, reflect, suggest, triangulate, update_prompt };

enum class ExpectedInput { none, confidence_slider, update_form };

struct HumanState {
  std::size_t decision = 0;
  Argument argument;
  int confidence = 0;  // percent, 0..100
};

/// Partial revision; unset fields keep their current value.
struct HumanUpdate {
  std::optional<std::size_t> decision;
  std::optional<Argument> argument;
  std::optional<int> confidence;

  bool empty() const noexcept { return !decision && !argument && !confidence; }
};

struct ReflectionAnswer {
  Stage stage = Stage::incompleteness;
  std::size_t item = 0;
  int reported_confidence = 0;
  // reported minus current confidence; for conflicts the absolute answer
  int derived_delta = 0;
  bool absolute = false;
};

struct DialogueMessage {
  std::string template_id;
  std::string text;
  ExpectedInput expected_input = ExpectedInput::none;
  nlohmann::json payload;
  Stage stage = Stage::final;
  std::size_t item = 0;
  Step step = Step::inform;
};

struct TranscriptEvent {
  std::size_t seq = 0;
  std::string kind;
  std::string time;  // wall clock; excluded from transcript comparison
  nlohmann::json payload;
};

/// Where the dialogue stood; for a skip, how far the human had read.
struct Cursor {
  Stage stage = Stage::await_initial;
  std::size_t item = 0;
  Step step = Step::inform;
  bool prompt_shown = false;

  friend bool operator==(const Cursor&, const Cursor&) = default;
};

/// One submission made by the human, in the order it was made.
struct Answer {
  enum class Kind { initial, reflection, update, skip };
  Kind kind = Kind::initial;
  HumanState initial;
  int reported_confidence = 0;
  HumanUpdate update;
  Cursor at;  // skip only
};

struct SessionOptions {
  std::string participant;
  std::string stage_tag = "intervention";
  // Returns the timestamp written into each event; defaults to UTC now.
  std::function<std::string()> clock;
  // Defaults to the built-in catalog.
  std::shared_ptr<const TemplateCatalog> templates;
};

/// The dialogue state machine for one task.
///
/// AACT sessions visit agreement, incompleteness, unreliability and conflict
/// in that order, skipping stages whose critique list is empty. Each flagged
/// item runs reflect -> suggest -> triangulate, and every visited stage ends
/// with one update prompt. An update recomputes the critique and the
/// machine continues with the stages not yet visited. Recommender and
/// analyzer sessions show one assistance message, then the update prompt.
///
/// next_prompt() returns the message at the cursor. Messages that expect no
/// input are consumed by the call; a message that expects input is returned
/// (and logged) until the matching submit_* call.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const Engine> engine, Instance task, Mode mode,
          EngineParams params, SessionOptions options = {});

  const std::string& id() const noexcept { return id_; }
  const Instance& task() const noexcept { return task_; }
  Mode mode() const noexcept { return mode_; }
  const EngineParams& params() const noexcept { return params_; }
  const std::string& participant() const noexcept { return options_.participant; }
  Stage stage() const noexcept { return stage_; }
  std::size_t item() const noexcept { return item_; }
  Step step() const noexcept { return step_; }
  bool finished() const noexcept { return stage_ == Stage::final; }
  Cursor cursor() const noexcept { return {stage_, item_, step_, input_prompt_logged_}; }
  std::size_t ai_prediction() const noexcept { return ai_prediction_; }
  const std::optional<Critique>& critique() const noexcept { return critique_; }
  const std::vector<HumanState>& human_history() const noexcept { return history_; }
  const std::vector<ReflectionAnswer>& reflections() const noexcept { return reflections_; }
  const std::vector<TranscriptEvent>& transcript() const noexcept { return transcript_; }
  const std::vector<Answer>& answers() const noexcept { return answers_; }
  const Engine& engine() const noexcept { return *engine_; }

  void submit_initial(std::size_t decision, const Argument& argument, int confidence);
  DialogueMessage next_prompt();
  void submit_reflection(int reported_confidence);
  void submit_update(const HumanUpdate& update);
  /// Manual skip of the remaining stages.
  void skip();

 private:
  const HumanState& current() const { return history_.back(); }
  std::size_t item_count(Stage stage) const;
  DialogueMessage build_message() const;
  DialogueMessage triangulation_message() const;
  void record(std::string kind, nlohmann::json payload);
  void record_message(const DialogueMessage& message);
  void deliver_pending_input();
  void analyze();
  void enter_next_stage(std::size_t from);
  void finish();
  void apply_human(const HumanState& state, std::string kind);

  std::string id_;
  std::shared_ptr<const Engine> engine_;
  Instance task_;
  Mode mode_;
  EngineParams params_;
  SessionOptions options_;
  std::size_t ai_prediction_ = 0;

  Stage stage_ = Stage::await_initial;
  std::size_t item_ = 0;
  Step step_ = Step::inform;
  bool input_prompt_logged_ = false;
  std::vector<bool> visited_;  // indexed by Stage
  std::optional<Critique> critique_;
  std::vector<HumanState> history_;
  std::vector<ReflectionAnswer> reflections_;
  std::vector<TranscriptEvent> transcript_;
  std::vector<Answer> answers_;
};

Session start_session(std::shared_ptr<const Engine> engine, Instance task, Mode mode,
                      EngineParams params, SessionOptions options = {});

/// Consumes prompts that need no input. Returns the pending input prompt,
/// or nullopt once the session is final.
std::optional<DialogueMessage> advance_to_input(Session& session);

/// Advances to the next input and applies the answer.
void apply_answer(Session& session, const Answer& answer);

/// Transcripts compared on everything except wall-clock time.
bool same_transcript(const std::vector<TranscriptEvent>& a, const std::vector<TranscriptEvent>& b);

nlohmann::json event_json(const TranscriptEvent& event);
TranscriptEvent event_from_json(const nlohmann::json& doc);
nlohmann::json message_json(const DialogueMessage& message);
/// Update bodies name the decision by class label and the argument by
/// feature names; absent keys are left unchanged.
nlohmann::json update_json(const FeatureSchema& schema, const HumanUpdate& update);
HumanUpdate update_from_json(const FeatureSchema& schema, const nlohmann::json& doc);
std::string transcript_jsonl(const std::vector<TranscriptEvent>& transcript);
std::vector<TranscriptEvent> parse_transcript_jsonl(std::string_view text);

std::string_view to_string(Mode mode);
std::string_view to_string(Stage stage);
std::string_view to_string(Step step);
std::string_view to_string(ExpectedInput input);
Mode mode_from_string(std::string_view text);

}  // namespace aact
