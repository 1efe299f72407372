#include "aact/error.hpp"
#include "aact/metrics.hpp"

#include <gtest/gtest.h>

namespace aact {
namespace {

using nlohmann::json;

// ai prediction, ground truth, initial, final
struct Row {
  const char* ai;
  const char* truth;
  const char* initial;
  const char* final;
};

constexpr Row kFixture[] = {
    {"A", "A", "A", "A"}, {"A", "A", "A", "A"}, {"A", "A", "A", "A"}, {"A", "A", "B", "A"},
    {"A", "A", "B", "B"}, {"B", "B", "A", "B"}, {"B", "B", "B", "B"}, {"A", "A", "A", "C"},
    {"B", "A", "B", "B"}, {"C", "A", "A", "A"},
};

std::vector<TranscriptEvent> transcript(const Row& r, std::size_t i, const std::string& stage = "intervention") {
  std::vector<TranscriptEvent> t;
  const auto add = [&](std::string kind, json payload) {
    t.push_back({t.size(), std::move(kind), "", std::move(payload)});
  };
  add("session_started", {{"task_id", "t" + std::to_string(i)},
                          {"mode", "aact"},
                          {"participant", "p001"},
                          {"stage_tag", stage},
                          {"ai_prediction", r.ai},
                          {"ground_truth", r.truth}});
  add("initial", {{"decision", r.initial}, {"argument", json::array()}, {"confidence", 50}});
  add("update", {{"decision", r.final}, {"argument", json::array()}, {"confidence", 50}});
  add("final", {{"decision", r.final}, {"argument", json::array()}, {"confidence", 50}});
  return t;
}

std::vector<TaskOutcome> fixture() {
  std::vector<TaskOutcome> out;
  for (std::size_t i = 0; i < std::size(kFixture); ++i) out.push_back(outcome_from_transcript(transcript(kFixture[i], i)));
  return out;
}

TEST(Reliance, HandEnumeratedFixture) {
  const auto r = reliance(fixture());
  EXPECT_EQ(r.agreement.numerator, 7u);
  EXPECT_EQ(r.agreement.denominator, 10u);
  EXPECT_DOUBLE_EQ(*r.agreement.value(), 0.7);
  EXPECT_EQ(r.switch_to_ai.denominator, 4u);
  EXPECT_DOUBLE_EQ(*r.switch_to_ai.value(), 0.5);
  EXPECT_EQ(r.over_reliance.denominator, 2u);
  EXPECT_DOUBLE_EQ(*r.over_reliance.value(), 0.5);
  EXPECT_EQ(r.under_reliance.numerator, 2u);
  EXPECT_EQ(r.under_reliance.denominator, 8u);
  EXPECT_EQ(r.over_reliance.denominator + r.under_reliance.denominator, 10u);
}

TEST(Reliance, AbsentDenominators) {
  auto all = fixture();
  std::vector<TaskOutcome> correct;
  for (auto o : all) {
    if (o.ai_correct()) correct.push_back(o);
  }
  const auto r = reliance(correct);
  EXPECT_EQ(r.over_reliance.denominator, 0u);
  EXPECT_FALSE(r.over_reliance.value());
  EXPECT_TRUE(r.under_reliance.value());
  EXPECT_THROW(reliance({}), Error);
}

TEST(Reliance, AllOrNothingAgreement) {
  auto all = fixture();
  for (auto& o : all) o.human_final = o.ai_prediction;
  EXPECT_EQ(*reliance(all).agreement.value(), 1.0);
  for (auto& o : all) o.human_final = "Z";
  EXPECT_EQ(*reliance(all).agreement.value(), 0.0);
}

TEST(NormalizedChange, ThreeBranches) {
  EXPECT_NEAR(normalized_change(0.6, 0.8), 0.5, 1e-12);
  EXPECT_NEAR(normalized_change(0.8, 0.6), -0.25, 1e-12);
  EXPECT_EQ(normalized_change(0.4, 0.4), 0.0);
  EXPECT_EQ(normalized_change(1.0, 1.0), 0.0);
  EXPECT_EQ(normalized_change(0.0, 0.0), 0.0);
  EXPECT_NEAR(normalized_change(0.0, 1.0), 1.0, 1e-12);
  EXPECT_NEAR(normalized_change(1.0, 0.0), -1.0, 1e-12);
  EXPECT_THROW(normalized_change(1.2, 0.5), Error);
  EXPECT_THROW(normalized_change(0.5, -0.1), Error);
}

std::vector<TaskOutcome> stages(std::size_t pre_right, std::size_t mid_right, std::size_t post_right) {
  std::vector<TaskOutcome> out;
  const auto block = [&](StageTag tag, std::size_t n, std::size_t right) {
    for (std::size_t i = 0; i < n; ++i) {
      TaskOutcome o;
      o.stage = tag;
      o.ground_truth = "A";
      o.ai_prediction = "A";
      o.human_initial = i < right ? "A" : "B";
      // finals are ignored by the learning measure
      o.human_final = "A";
      out.push_back(o);
    }
  };
  block(StageTag::pre_test, 5, pre_right);
  block(StageTag::intervention, 10, mid_right);
  block(StageTag::post_test, 5, post_right);
  return out;
}

TEST(Learning, Report) {
  const auto r = learning_report(stages(3, 6, 4));
  EXPECT_NEAR(r.pre_accuracy, 0.6, 1e-12);
  EXPECT_NEAR(r.post_accuracy, 0.8, 1e-12);
  EXPECT_NEAR(r.after, 0.5, 1e-12);
  EXPECT_NEAR(r.during, 0.0, 1e-12);
  EXPECT_EQ(learning_report(stages(3, 6, 3)).after, 0.0);
  EXPECT_EQ(learning_report(stages(4, 8, 2)).during, 0.0);
  EXPECT_NEAR(learning_report(stages(4, 8, 2)).after, -0.5, 1e-12);

  auto missing = stages(3, 6, 4);
  std::erase_if(missing, [](const TaskOutcome& o) { return o.stage == StageTag::post_test; });
  EXPECT_THROW(learning_report(missing), Error);
}

TEST(Outcome, FromTranscript) {
  const auto o = outcome_from_transcript(transcript(kFixture[9], 9, "post_test"));
  EXPECT_EQ(o.task_id, "t9");
  EXPECT_EQ(o.stage, StageTag::post_test);
  EXPECT_EQ(o.ai_prediction, "C");
  EXPECT_EQ(o.human_initial, "A");
  EXPECT_FALSE(o.ai_correct());

  auto unfinished = transcript(kFixture[0], 0);
  unfinished.pop_back();
  EXPECT_THROW(outcome_from_transcript(unfinished), Error);
  auto unlabeled = transcript(kFixture[0], 0);
  unlabeled[0].payload["ground_truth"] = nullptr;
  EXPECT_THROW(outcome_from_transcript(unlabeled), Error);
  EXPECT_THROW(stage_tag_from_string("warmup"), Error);
}

}  // namespace
}  // namespace aact
