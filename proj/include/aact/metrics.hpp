#pragma once

#include "aact/workflow.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aact {

enum class StageTag { pre_test, intervention, post_test };

/// One finished task as seen by the metrics. Labels are class names.
struct TaskOutcome {
  std::string task_id;
  std::string participant;
  std::string mode;
  StageTag stage = StageTag::intervention;
  std::string ai_prediction;  // shown or withheld
  std::string human_initial;
  std::string human_final;
  std::string ground_truth;

  bool ai_correct() const { return ai_prediction == ground_truth; }
};

/// A count ratio that stays undefined rather than 0 when nothing qualifies.
struct Fraction {
  std::size_t numerator = 0;
  std::size_t denominator = 0;

  std::optional<double> value() const {
    if (denominator == 0) return std::nullopt;
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
};

struct RelianceReport {
  Fraction agreement;
  Fraction switch_to_ai;
  Fraction over_reliance;
  Fraction under_reliance;
};

/// Caller restricts the list to intervention tasks. Throws on an empty list.
RelianceReport reliance(std::span<const TaskOutcome> outcomes);

/// Gain-scaled accuracy change: (a-b)/(1-b) for gains, (a-b)/b for losses.
double normalized_change(double before, double after);

struct LearningReport {
  double pre_accuracy = 0.0;
  double intervention_accuracy = 0.0;  // of initial decisions
  double post_accuracy = 0.0;
  double during = 0.0;
  double after = 0.0;
};

/// Throws when one of the three stages has no tasks.
LearningReport learning_report(std::span<const TaskOutcome> outcomes);

/// Reads a finished session transcript. Throws invalid_argument when the
/// session never reached its final decision or has no ground truth.
TaskOutcome outcome_from_transcript(const std::vector<TranscriptEvent>& transcript);

std::string_view to_string(StageTag tag);
StageTag stage_tag_from_string(std::string_view text);

}  // namespace aact
