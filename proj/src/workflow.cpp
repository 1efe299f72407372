#include "aact/workflow.hpp"

#include "aact/assistance.hpp"
#include "aact/error.hpp"
#include "aact/serialize.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <sstream>

namespace aact {
namespace {

using nlohmann::json;

constexpr std::array kStageOrder = {Stage::agreement, Stage::incompleteness, Stage::unreliability,
                                    Stage::conflict};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()) % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buffer, static_cast<int>(ms.count()));
  return out;
}

std::size_t stage_index(Stage stage) { return static_cast<std::size_t>(stage); }

std::string points_text(long long points) {
  return (points > 0 ? "+" : "") + std::to_string(points) + " percentage points";
}

void check_confidence(int confidence) {
  if (confidence < 0 || confidence > 100)
    fail(ErrorCode::invalid_argument, "confidence must lie in [0, 100]");
}

void check_human(const Engine& engine, std::size_t decision, const Argument& argument) {
  if (decision >= engine.class_count()) fail(ErrorCode::invalid_argument, "unknown decision");
  for (const auto f : argument) {
    if (f >= engine.feature_count()) fail(ErrorCode::invalid_argument, "argument feature outside the task");
  }
}

}  // namespace

Session::Session(std::string id, std::shared_ptr<const Engine> engine, Instance task, Mode mode,
                 EngineParams params, SessionOptions options)
    : id_(std::move(id)),
      engine_(std::move(engine)),
      task_(std::move(task)),
      mode_(mode),
      params_(params),
      options_(std::move(options)),
      visited_(stage_index(Stage::final) + 1, false) {
  if (!engine_) fail(ErrorCode::invalid_argument, "session needs an engine");
  params_.validate();
  if (task_.values.size() != engine_->feature_count())
    fail(ErrorCode::invalid_argument, "task does not match the schema");
  if (!options_.clock) options_.clock = utc_now;
  if (!options_.templates) {
    options_.templates = std::shared_ptr<const TemplateCatalog>(&TemplateCatalog::builtin(),
                                                                [](const TemplateCatalog*) {});
  }
  ai_prediction_ = engine_->model().predict_proba(task_).prediction();
  const auto& classes = engine_->schema().classes;
  record("session_started",
         {{"task_id", task_.id},
          {"mode", to_string(mode_)},
          {"participant", options_.participant},
          {"stage_tag", options_.stage_tag},
          {"params", params_to_json(params_)},
          {"ai_prediction", classes[ai_prediction_]},
          {"ground_truth", task_.label ? json(classes.at(*task_.label)) : json(nullptr)}});
}

Session start_session(std::shared_ptr<const Engine> engine, Instance task, Mode mode,
                      EngineParams params, SessionOptions options) {
  return Session("local", std::move(engine), std::move(task), mode, params, std::move(options));
}

void Session::record(std::string kind, json payload) {
  transcript_.push_back({transcript_.size(), std::move(kind), options_.clock(), std::move(payload)});
}

void Session::record_message(const DialogueMessage& message) {
  record("message", message_json(message));
}

void Session::apply_human(const HumanState& state, std::string kind) {
  history_.push_back(state);
  const auto& schema = engine_->schema();
  record(std::move(kind), {{"decision", schema.classes[state.decision]},
                           {"argument", state.argument.names(schema)},
                           {"confidence", state.confidence}});
}

std::size_t Session::item_count(Stage stage) const {
  if (!critique_) return 0;
  switch (stage) {
    case Stage::agreement: return params_.include_agreement && !critique_->agreement.empty() ? 1 : 0;
    case Stage::incompleteness: return critique_->incompleteness.size();
    case Stage::unreliability: return critique_->unreliability.size();
    case Stage::conflict: return critique_->conflicts.size();
    case Stage::assist: return 1;
    default: return 0;
  }
}

void Session::analyze() {
  critique_ = identify_issues(*engine_, task_, current().decision, current().argument, params_);
  record("critique", critique_json(engine_->schema(), task_, *critique_));
}

// Returns after entering the first non-empty unvisited stage at or after
// position `from`; empty stages on the way are logged as skipped. Ends the
// session when none remains.
void Session::enter_next_stage(std::size_t from) {
  for (std::size_t i = from; i < kStageOrder.size(); ++i) {
    const Stage stage = kStageOrder[i];
    if (visited_[stage_index(stage)]) continue;
    visited_[stage_index(stage)] = true;
    const std::size_t count = item_count(stage);
    if (count == 0) {
      const bool disabled = stage == Stage::agreement && !params_.include_agreement;
      record("stage_skipped", {{"stage", to_string(stage)}, {"reason", disabled ? "disabled" : "empty"}});
      continue;
    }
    stage_ = stage;
    item_ = 0;
    step_ = stage == Stage::agreement ? Step::inform : Step::reflect;
    input_prompt_logged_ = false;
    record("stage_entered", {{"stage", to_string(stage)}, {"items", count}});
    return;
  }
  finish();
}

void Session::finish() {
  stage_ = Stage::final;
  item_ = 0;
  step_ = Step::inform;
  const auto& schema = engine_->schema();
  const auto& state = current();
  record("final", {{"decision", schema.classes[state.decision]},
                   {"argument", state.argument.names(schema)},
                   {"confidence", state.confidence}});
}

void Session::submit_initial(std::size_t decision, const Argument& argument, int confidence) {
  if (stage_ != Stage::await_initial) fail(ErrorCode::unexpected_step, "initial decision already submitted");
  check_human(*engine_, decision, argument);
  check_confidence(confidence);
  const HumanState state{decision, argument, confidence};
  answers_.push_back({Answer::Kind::initial, state, 0, {}, {}});
  apply_human(state, "initial");

  switch (mode_) {
    case Mode::human_only:
      finish();
      return;
    case Mode::recommender:
    case Mode::analyzer:
      stage_ = Stage::assist;
      item_ = 0;
      step_ = Step::inform;
      visited_[stage_index(Stage::assist)] = true;
      record("stage_entered", {{"stage", to_string(Stage::assist)}, {"items", 1}});
      return;
    case Mode::aact:
      break;
  }
  analyze();
  const bool any = std::any_of(kStageOrder.begin(), kStageOrder.end(),
                               [this](Stage s) { return item_count(s) > 0; });
  if (!any) {
    DialogueMessage notice;
    notice.template_id = "T-NO-ISSUES";
    notice.text = options_.templates->render(notice.template_id, {});
    notice.payload = json::object();
    notice.stage = Stage::final;
    record_message(notice);
    for (const Stage s : kStageOrder) visited_[stage_index(s)] = true;
    record("stage_skipped", {{"stage", "all"}, {"reason", "empty"}});
    finish();
    return;
  }
  enter_next_stage(0);
}

DialogueMessage Session::next_prompt() {
  if (stage_ == Stage::await_initial || stage_ == Stage::final)
    fail(ErrorCode::unexpected_step, "no prompt in stage " + std::string(to_string(stage_)));
  DialogueMessage message = build_message();
  if (message.expected_input != ExpectedInput::none) {
    if (!input_prompt_logged_) {
      record_message(message);
      input_prompt_logged_ = true;
    }
    return message;
  }
  record_message(message);
  switch (step_) {
    case Step::inform:
      step_ = Step::update_prompt;
      break;
    case Step::suggest:
      step_ = Step::triangulate;
      break;
    case Step::triangulate:
      if (item_ + 1 < item_count(stage_)) {
        ++item_;
        step_ = Step::reflect;
      } else {
        step_ = Step::update_prompt;
      }
      break;
    default:
      break;
  }
  input_prompt_logged_ = false;
  return message;
}

void Session::deliver_pending_input() {
  if (input_prompt_logged_) return;
  record_message(build_message());
  input_prompt_logged_ = true;
}

void Session::submit_reflection(int reported_confidence) {
  const bool reflective = stage_ == Stage::incompleteness || stage_ == Stage::unreliability ||
                          stage_ == Stage::conflict;
  if (!reflective || step_ != Step::reflect) fail(ErrorCode::unexpected_step, "reflection not expected");
  check_confidence(reported_confidence);
  deliver_pending_input();

  ReflectionAnswer answer;
  answer.stage = stage_;
  answer.item = item_;
  answer.reported_confidence = reported_confidence;
  answer.absolute = stage_ == Stage::conflict;
  answer.derived_delta = answer.absolute ? reported_confidence : reported_confidence - current().confidence;
  reflections_.push_back(answer);
  answers_.push_back({Answer::Kind::reflection, {}, reported_confidence, {}, {}});
  record("reflection", {{"stage", to_string(stage_)},
                        {"item", item_},
                        {"reported_confidence", reported_confidence},
                        {"derived_delta", answer.derived_delta},
                        {"absolute", answer.absolute}});
  step_ = Step::suggest;
  input_prompt_logged_ = false;
}

void Session::submit_update(const HumanUpdate& update) {
  if (stage_ == Stage::await_initial || stage_ == Stage::final || step_ != Step::update_prompt)
    fail(ErrorCode::unexpected_step, "update not expected");
  HumanState next = current();
  if (update.decision) next.decision = *update.decision;
  if (update.argument) next.argument = *update.argument;
  if (update.confidence) next.confidence = *update.confidence;
  check_human(*engine_, next.decision, next.argument);
  check_confidence(next.confidence);
  deliver_pending_input();

  answers_.push_back({Answer::Kind::update, {}, 0, update, {}});
  apply_human(next, "update");

  if (stage_ == Stage::assist) {
    finish();
    return;
  }
  const auto position = static_cast<std::size_t>(
      std::find(kStageOrder.begin(), kStageOrder.end(), stage_) - kStageOrder.begin());
  analyze();
  enter_next_stage(position + 1);
}

void Session::skip() {
  if (stage_ == Stage::await_initial || stage_ == Stage::final)
    fail(ErrorCode::unexpected_step, "nothing to skip in stage " + std::string(to_string(stage_)));
  answers_.push_back({Answer::Kind::skip, {}, 0, {}, cursor()});
  record("skip", {{"stage", to_string(stage_)}, {"item", item_}, {"step", to_string(step_)}});
  DialogueMessage notice;
  notice.template_id = "T-SKIP";
  notice.text = options_.templates->render(notice.template_id, {});
  notice.payload = json::object();
  notice.stage = stage_;
  notice.item = item_;
  record_message(notice);
  finish();
}

DialogueMessage Session::build_message() const {
  const auto& schema = engine_->schema();
  const auto& templates = *options_.templates;
  DialogueMessage m;
  m.stage = stage_;
  m.item = item_;
  m.step = step_;
  m.payload = json::object();

  if (step_ == Step::update_prompt) {
    m.template_id = "T-UPDATE";
    m.expected_input = ExpectedInput::update_form;
    m.payload = {{"decision", schema.classes[current().decision]},
                 {"argument", current().argument.names(schema)},
                 {"confidence", current().confidence},
                 {"options", {"change_prediction", "change_evidence", "change_confidence", "keep_everything"}}};
    m.text = templates.render(m.template_id, {});
    return m;
  }

  if (stage_ == Stage::assist) {
    if (mode_ == Mode::recommender) {
      const auto rec = recommender_payload(*engine_, task_, params_);
      m.template_id = "T-REC";
      m.payload = recommendation_json(schema, rec);
      m.payload["margin"] = rec.confidence - 1.0 / static_cast<double>(schema.class_count());
      m.text = templates.render(m.template_id, {{"prediction", schema.classes[rec.prediction]},
                                                {"confidence", std::to_string(percent(rec.confidence))}});
    } else {
      m.template_id = "T-ANALYZE";
      m.payload = evidence_json(schema, analyzer_payload(*engine_, task_, params_));
      m.text = templates.render(m.template_id, {});
    }
    return m;
  }

  if (stage_ == Stage::agreement) {
    Argument reliable;
    json features = json::array();
    std::vector<std::size_t> idx;
    for (const auto& flag : critique_->agreement) {
      idx.push_back(flag.feature);
      features.push_back({{"feature", schema.features[flag.feature].name},
                          {"label", schema.features[flag.feature].label},
                          {"delta", flag.delta}});
    }
    reliable = Argument(idx);
    m.template_id = "T-AGREE";
    m.payload = {{"features", std::move(features)}};
    m.text = templates.render(m.template_id, {{"features", reliable.describe(schema)}});
    return m;
  }

  if (step_ == Step::triangulate) return triangulation_message();

  if (stage_ == Stage::conflict) {
    const auto& c = critique_->conflicts.at(item_);
    const Slots slots{{"alt", schema.classes[c.alt_decision]}, {"features", c.argument.describe(schema)},
                      {"confidence", std::to_string(percent(c.confidence))}};
    m.payload = {{"alt_decision", schema.classes[c.alt_decision]},
                 {"argument", argument_json(schema, task_, c.argument)}};
    if (step_ == Step::reflect) {
      m.template_id = "T-CONF-REFLECT";
      m.expected_input = ExpectedInput::confidence_slider;
      m.payload["current_confidence"] = current().confidence;
    } else {
      m.template_id = "T-CONF-SUGGEST";
      m.payload["confidence"] = c.confidence;
      m.payload["confidence_pct"] = percent(c.confidence);
      // distance above random chance
      m.payload["margin"] = c.confidence - 1.0 / static_cast<double>(schema.class_count());
    }
    m.text = templates.render(m.template_id, slots);
    return m;
  }

  const bool adding = stage_ == Stage::incompleteness;
  const auto& flag = adding ? critique_->incompleteness.at(item_) : critique_->unreliability.at(item_);
  const auto& spec = schema.features[flag.feature];
  m.payload = {{"feature", spec.name},
               {"label", spec.label},
               {"value", schema.format_value(flag.feature, task_.values[flag.feature])}};
  if (step_ == Step::reflect) {
    m.template_id = adding ? "T-INC-REFLECT" : "T-UNR-REFLECT";
    m.expected_input = ExpectedInput::confidence_slider;
    m.payload["current_confidence"] = current().confidence;
    m.text = templates.render(m.template_id, {{"feature", spec.label}});
  } else {
    m.template_id = adding ? "T-INC-SUGGEST" : "T-UNR-SUGGEST";
    m.payload["kind"] = to_string(flag.kind);
    m.payload["delta"] = flag.delta;
    m.payload["delta_pp"] = percentage_points(flag.delta);
    m.text = templates.render(m.template_id, {{"feature", spec.label}, {"delta", shortest(flag.delta)}});
  }
  return m;
}

DialogueMessage Session::triangulation_message() const {
  const auto& schema = engine_->schema();
  const auto& templates = *options_.templates;
  const auto& train = engine_->train();
  const ReflectionAnswer& reflection = reflections_.back();

  DialogueMessage m;
  m.stage = stage_;
  m.item = item_;
  m.step = Step::triangulate;

  json rows = json::array();
  std::vector<std::string> lines;
  const auto add_row = [&](const char* source, const char* label, json value, std::string text,
                           json extra = json::object()) {
    json row{{"source", source}, {"value", std::move(value)}, {"text", text}};
    for (auto& [k, v] : extra.items()) row[k] = v;
    rows.push_back(std::move(row));
    lines.push_back(templates.render("T-TRI-ROW", {{"source", label}, {"value", std::move(text)}}));
  };

  if (stage_ == Stage::conflict) {
    const auto& c = critique_->conflicts.at(item_);
    const auto data = empirical_confidence(train, c.alt_decision, task_, c.argument, params_.min_support);
    m.template_id = "T-TRI-CONF";
    lines.push_back(templates.render(m.template_id, {{"alt", schema.classes[c.alt_decision]},
                                                     {"features", c.argument.describe(schema)}}));
    add_row("human", "You", reflection.reported_confidence,
            std::to_string(reflection.reported_confidence) + "%");
    add_row("ai", "AI", percent(c.confidence), std::to_string(percent(c.confidence)) + "%");
    if (data.available()) {
      add_row("data", "Data", percent(*data.probability), std::to_string(percent(*data.probability)) + "%",
              {{"support", data.support}});
    } else {
      add_row("data", "Data", nullptr, "not available", {{"support", data.support}});
    }
    m.payload = {{"unit", "percent"}, {"alt_decision", schema.classes[c.alt_decision]}, {"rows", rows}};
  } else {
    const bool adding = stage_ == Stage::incompleteness;
    const auto& flag = adding ? critique_->incompleteness.at(item_) : critique_->unreliability.at(item_);
    const Argument& before_arg = current().argument;
    const Argument after_arg = adding ? before_arg.with(flag.feature) : before_arg.without(flag.feature);
    const auto before = empirical_confidence(train, current().decision, task_, before_arg, params_.min_support);
    const auto after = empirical_confidence(train, current().decision, task_, after_arg, params_.min_support);
    m.template_id = adding ? "T-TRI-INC" : "T-TRI-UNR";
    lines.push_back(templates.render(m.template_id, {{"feature", schema.features[flag.feature].label}}));
    add_row("human", "You", reflection.derived_delta, points_text(reflection.derived_delta));
    add_row("ai", "AI", percentage_points(flag.delta), signed_points(flag.delta));
    const json support{{"support_before", before.support}, {"support_after", after.support}};
    if (before.available() && after.available()) {
      const double delta = *after.probability - *before.probability;
      add_row("data", "Data", percentage_points(delta), signed_points(delta), support);
    } else {
      add_row("data", "Data", nullptr, "not available", support);
    }
    m.payload = {{"unit", "percentage_points"}, {"feature", schema.features[flag.feature].name}, {"rows", rows}};
  }

  for (const auto& line : lines) {
    if (!m.text.empty()) m.text += '\n';
    m.text += line;
  }
  return m;
}

std::optional<DialogueMessage> advance_to_input(Session& session) {
  while (!session.finished() && session.stage() != Stage::await_initial) {
    auto message = session.next_prompt();
    if (message.expected_input != ExpectedInput::none) return message;
  }
  return std::nullopt;
}

void apply_answer(Session& session, const Answer& answer) {
  if (answer.kind == Answer::Kind::initial) {
    session.submit_initial(answer.initial.decision, answer.initial.argument, answer.initial.confidence);
    return;
  }
  if (answer.kind == Answer::Kind::skip) {
    // replay the prompts that were read before the skip
    auto target = answer.at;
    target.prompt_shown = false;
    while (!session.finished()) {
      auto now = session.cursor();
      now.prompt_shown = false;
      if (now == target) break;
      if (session.next_prompt().expected_input != ExpectedInput::none)
        fail(ErrorCode::invalid_argument, "recorded skip point is not reachable");
    }
    if (answer.at.prompt_shown && !session.cursor().prompt_shown) session.next_prompt();
    session.skip();
    return;
  }
  advance_to_input(session);
  if (answer.kind == Answer::Kind::reflection) {
    session.submit_reflection(answer.reported_confidence);
  } else {
    session.submit_update(answer.update);
  }
}

bool same_transcript(const std::vector<TranscriptEvent>& a, const std::vector<TranscriptEvent>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seq != b[i].seq || a[i].kind != b[i].kind || a[i].payload != b[i].payload) return false;
  }
  return true;
}

json message_json(const DialogueMessage& message) {
  return {{"template_id", message.template_id},
          {"text", message.text},
          {"expected_input", to_string(message.expected_input)},
          {"stage", to_string(message.stage)},
          {"item", message.item},
          {"step", to_string(message.step)},
          {"payload", message.payload}};
}

json event_json(const TranscriptEvent& event) {
  return {{"seq", event.seq}, {"kind", event.kind}, {"time", event.time}, {"payload", event.payload}};
}

TranscriptEvent event_from_json(const json& doc) {
  try {
    return {doc.at("seq").get<std::size_t>(), doc.at("kind").get<std::string>(),
            doc.value("time", std::string()), doc.at("payload")};
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("transcript event: ") + e.what());
  }
}

json update_json(const FeatureSchema& schema, const HumanUpdate& update) {
  json out = json::object();
  if (update.decision) out["decision"] = schema.classes.at(*update.decision);
  if (update.argument) out["argument"] = update.argument->names(schema);
  if (update.confidence) out["confidence"] = *update.confidence;
  return out;
}

HumanUpdate update_from_json(const FeatureSchema& schema, const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::invalid_argument, "update must be a JSON object");
  HumanUpdate update;
  try {
    if (doc.contains("decision") && !doc.at("decision").is_null()) {
      const auto label = doc.at("decision").get<std::string>();
      const auto it = std::find(schema.classes.begin(), schema.classes.end(), label);
      if (it == schema.classes.end()) fail(ErrorCode::invalid_argument, "unknown decision '" + label + "'");
      update.decision = static_cast<std::size_t>(it - schema.classes.begin());
    }
    if (doc.contains("argument") && !doc.at("argument").is_null()) {
      const auto names = doc.at("argument").get<std::vector<std::string>>();
      for (const auto& name : names) {
        if (!schema.find(name)) fail(ErrorCode::invalid_argument, "argument feature '" + name + "' is not in the task");
      }
      update.argument = Argument::from_names(schema, names);
    }
    if (doc.contains("confidence") && !doc.at("confidence").is_null())
      update.confidence = doc.at("confidence").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("update: ") + e.what());
  }
  return update;
}

std::string transcript_jsonl(const std::vector<TranscriptEvent>& transcript) {
  std::string out;
  for (const auto& event : transcript) {
    out += event_json(event).dump();
    out += '\n';
  }
  return out;
}

std::vector<TranscriptEvent> parse_transcript_jsonl(std::string_view text) {
  std::vector<TranscriptEvent> events;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorCode::parse_error, "transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::aact: return "aact";
    case Mode::recommender: return "recommender";
    case Mode::analyzer: return "analyzer";
    case Mode::human_only: return "human_only";
  }
  return "?";
}

Mode mode_from_string(std::string_view text) {
  if (text == "aact") return Mode::aact;
  if (text == "recommender") return Mode::recommender;
  if (text == "analyzer") return Mode::analyzer;
  if (text == "human_only") return Mode::human_only;
  fail(ErrorCode::invalid_argument, "unknown mode '" + std::string(text) + "'");
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::await_initial: return "await_initial";
    case Stage::agreement: return "agreement";
    case Stage::incompleteness: return "incompleteness";
    case Stage::unreliability: return "unreliability";
    case Stage::conflict: return "conflict";
    case Stage::assist: return "assist";
    case Stage::final: return "final";
  }
  return "?";
}

std::string_view to_string(Step step) {
  switch (step) {
    case Step::inform: return "inform";
    case Step::reflect: return "reflect";
    case Step::suggest: return "suggest";
    case Step::triangulate: return "triangulate";
    case Step::update_prompt: return "update_prompt";
  }
  return "?";
}

std::string_view to_string(ExpectedInput input) {
  switch (input) {
    case ExpectedInput::none: return "none";
    case ExpectedInput::confidence_slider: return "confidence_slider";
    case ExpectedInput::update_form: return "update_form";
  }
  return "?";
}

}  // namespace aact
