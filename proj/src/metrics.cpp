#include "aact/metrics.hpp"

#include "aact/error.hpp"

namespace aact {

RelianceReport reliance(std::span<const TaskOutcome> outcomes) {
  if (outcomes.empty()) fail(ErrorCode::invalid_argument, "reliance needs at least one task");
  RelianceReport r;
  for (const auto& o : outcomes) {
    const bool follows = o.human_final == o.ai_prediction;
    ++r.agreement.denominator;
    if (follows) ++r.agreement.numerator;
    if (o.human_initial != o.ai_prediction) {
      ++r.switch_to_ai.denominator;
      if (follows) ++r.switch_to_ai.numerator;
    }
    if (o.ai_correct()) {
      ++r.under_reliance.denominator;
      if (!follows) ++r.under_reliance.numerator;
    } else {
      ++r.over_reliance.denominator;
      if (follows) ++r.over_reliance.numerator;
    }
  }
  return r;
}

double normalized_change(double before, double after) {
  if (!(before >= 0.0 && before <= 1.0) || !(after >= 0.0 && after <= 1.0))
    fail(ErrorCode::invalid_argument, "accuracies must lie in [0, 1]");
  if (after > before) return (after - before) / (1.0 - before);
  if (after < before) return (after - before) / before;
  return 0.0;
}

LearningReport learning_report(std::span<const TaskOutcome> outcomes) {
  std::size_t correct[3] = {0, 0, 0};
  std::size_t total[3] = {0, 0, 0};
  for (const auto& o : outcomes) {
    const auto s = static_cast<std::size_t>(o.stage);
    ++total[s];
    // pre and post tasks are unassisted, so initial and final coincide
    if (o.human_initial == o.ground_truth) ++correct[s];
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (total[s] == 0) {
      fail(ErrorCode::invalid_argument,
           "no " + std::string(to_string(static_cast<StageTag>(s))) + " tasks");
    }
  }
  const auto acc = [&](StageTag t) {
    const auto s = static_cast<std::size_t>(t);
    return static_cast<double>(correct[s]) / static_cast<double>(total[s]);
  };
  LearningReport report;
  report.pre_accuracy = acc(StageTag::pre_test);
  report.intervention_accuracy = acc(StageTag::intervention);
  report.post_accuracy = acc(StageTag::post_test);
  report.during = normalized_change(report.pre_accuracy, report.intervention_accuracy);
  report.after = normalized_change(report.pre_accuracy, report.post_accuracy);
  return report;
}

TaskOutcome outcome_from_transcript(const std::vector<TranscriptEvent>& transcript) {
  TaskOutcome o;
  bool started = false, initial = false, final = false;
  try {
    for (const auto& e : transcript) {
      if (e.kind == "session_started") {
        const auto& p = e.payload;
        o.task_id = p.at("task_id").get<std::string>();
        o.participant = p.value("participant", std::string());
        o.mode = p.at("mode").get<std::string>();
        o.stage = stage_tag_from_string(p.value("stage_tag", std::string("intervention")));
        o.ai_prediction = p.at("ai_prediction").get<std::string>();
        if (p.at("ground_truth").is_null())
          fail(ErrorCode::invalid_argument, "task " + o.task_id + " has no ground truth");
        o.ground_truth = p.at("ground_truth").get<std::string>();
        started = true;
      } else if (e.kind == "initial") {
        o.human_initial = e.payload.at("decision").get<std::string>();
        initial = true;
      } else if (e.kind == "final") {
        o.human_final = e.payload.at("decision").get<std::string>();
        final = true;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("transcript: ") + e.what());
  }
  if (!started || !initial) fail(ErrorCode::invalid_argument, "transcript lacks a session start or initial decision");
  if (!final) fail(ErrorCode::invalid_argument, "session for task " + o.task_id + " is not finished");
  return o;
}

std::string_view to_string(StageTag tag) {
  switch (tag) {
    case StageTag::pre_test: return "pre_test";
    case StageTag::intervention: return "intervention";
    case StageTag::post_test: return "post_test";
  }
  return "?";
}

StageTag stage_tag_from_string(std::string_view text) {
  if (text == "pre_test") return StageTag::pre_test;
  if (text == "intervention") return StageTag::intervention;
  if (text == "post_test") return StageTag::post_test;
  fail(ErrorCode::invalid_argument, "unknown stage tag '" + std::string(text) + "'");
}

}  // namespace aact
