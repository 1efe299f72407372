#include "aact/error.hpp"
#include "aact/simulate.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace aact {
namespace {

using testing::task_of;

std::shared_ptr<const Engine> symmetric_engine() {
  Eigen::MatrixXd w(2, 2);
  w << 0.0, std::log(9.0), std::log(9.0), 0.0;
  const auto train = testing::factorial(testing::binary_schema(2));
  return std::make_shared<const Engine>(Classifier::from_parameters(train.schema, w, Eigen::VectorXd::Zero(2)), train);
}

SimulationConfig config(std::string_view policy, Mode mode = Mode::aact) {
  SimulationConfig c;
  c.policy = Policy::parse(policy);
  c.mode = mode;
  c.clock = [] { return std::string("T"); };
  return c;
}

TEST(Policy, Parse) {
  EXPECT_EQ(Policy::parse("always_keep").kind, Policy::Kind::always_keep);
  EXPECT_EQ(Policy::parse("always_adopt").kind, Policy::Kind::always_adopt);
  const auto t = Policy::parse("threshold:0.1");
  EXPECT_EQ(t.kind, Policy::Kind::threshold);
  EXPECT_DOUBLE_EQ(t.threshold, 0.1);
  EXPECT_TRUE(t.adopts(0.1));
  EXPECT_FALSE(t.adopts(0.09));
  EXPECT_FALSE(Policy::parse("always_keep").adopts(1.0));
  EXPECT_TRUE(Policy::parse("always_adopt").adopts(0.0));
  for (const char* bad : {"sometimes", "threshold:", "threshold:2", "threshold:x", "threshold:0.1x"}) {
    EXPECT_THROW(Policy::parse(bad), Error) << bad;
  }
}

TEST(Responder, AdoptsConflict) {
  auto engine = symmetric_engine();
  EngineParams p;
  p.sampling = SamplingMode::exhaustive;
  p.epsilon = 1.0;
  Session s("s", engine, task_of("t", {1, 1}), Mode::aact, p);
  Responder r(engine->schema(), Policy::parse("always_adopt"), 3);
  run_session(s, r, {0, Argument({1}), 70});
  ASSERT_TRUE(s.finished());
  ASSERT_EQ(s.critique()->conflicts.size(), 1u);
  EXPECT_EQ(s.human_history().back().decision, 1u);
  EXPECT_EQ(s.human_history().back().argument, Argument({0}));
  EXPECT_TRUE(testing::transcript_violations(s.transcript(), 1).empty());
}

TEST(Responder, KeepsEverything) {
  auto engine = symmetric_engine();
  EngineParams p;
  p.sampling = SamplingMode::exhaustive;
  Session s("s", engine, task_of("t", {1, 1}), Mode::aact, p);
  Responder r(engine->schema(), Policy::parse("always_keep"), 3);
  run_session(s, r, {0, Argument(), 50});
  for (const auto& h : s.human_history()) {
    EXPECT_EQ(h.decision, 0u);
    EXPECT_EQ(h.argument, Argument());
  }
}

TEST(Responder, AdoptsFeatureSuggestions) {
  auto engine = symmetric_engine();
  EngineParams p;
  p.sampling = SamplingMode::exhaustive;
  Session s("s", engine, task_of("t", {1, 1}), Mode::aact, p);
  Responder r(engine->schema(), Policy::parse("threshold:0.1"), 3);
  run_session(s, r, {0, Argument(), 50});
  // both incompleteness flags have |delta| = 0.2, so both features are added
  const auto& history = s.human_history();
  ASSERT_GE(history.size(), 2u);
  EXPECT_EQ(history[1].argument, Argument({0, 1}));
}

TEST(Responder, RecommenderAdoptsPrediction) {
  const auto& f = testing::ames();
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& task = f.parts.test.rows[i];
    Session s("s", f.engine, task, Mode::recommender, EngineParams{});
    Responder r(f.engine->schema(), Policy::parse("always_adopt"), i);
    const std::size_t other = (s.ai_prediction() + 1) % 3;
    run_session(s, r, {other, Argument({0, 1}), 60});
    EXPECT_EQ(s.human_history().back().decision, s.ai_prediction());
  }
}

TEST(TaskPool, CountsAndDeterminism) {
  const auto& f = testing::ames();
  const auto pool = task_pool(*f.engine, f.parts.test.rows, 16, 4, 0);
  ASSERT_EQ(pool.size(), 20u);
  std::size_t right = 0;
  for (const auto i : pool) {
    const auto& row = f.parts.test.rows[i];
    right += f.model().predict_proba(row).prediction() == *row.label;
  }
  EXPECT_EQ(right, 16u);
  EXPECT_EQ(std::set<std::size_t>(pool.begin(), pool.end()).size(), 20u);
  EXPECT_EQ(pool, task_pool(*f.engine, f.parts.test.rows, 16, 4, 0));
  EXPECT_NE(pool, task_pool(*f.engine, f.parts.test.rows, 16, 4, 1));
  EXPECT_THROW(task_pool(*f.engine, f.parts.test.rows, 16, 400, 0), Error);
}

TEST(Simulate, StageLayoutAndInvariants) {
  const auto& f = testing::ames();
  auto c = config("threshold:0.05");
  c.participants = 2;
  const auto sessions = simulate(f.engine, f.parts.test.rows, c);
  ASSERT_EQ(sessions.size(), 40u);
  std::size_t pre = 0, mid = 0, post = 0;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const auto& s = sessions[i];
    EXPECT_EQ(s.participant, i < 20 ? "p001" : "p002");
    const std::string mode = s.transcript.front().payload.at("mode");
    switch (s.stage) {
      case StageTag::pre_test: ++pre; EXPECT_EQ(mode, "human_only"); break;
      case StageTag::intervention: ++mid; EXPECT_EQ(mode, "aact"); break;
      case StageTag::post_test: ++post; EXPECT_EQ(mode, "human_only"); break;
    }
    const auto bad = testing::transcript_violations(s.transcript, 1);
    EXPECT_TRUE(bad.empty()) << s.task_id << ": " << bad.front();
  }
  EXPECT_EQ(pre, 10u);
  EXPECT_EQ(mid, 20u);
  EXPECT_EQ(post, 10u);
  EXPECT_EQ(sessions[0].stage, StageTag::pre_test);
  EXPECT_EQ(sessions[19].stage, StageTag::post_test);
}

TEST(Simulate, AlwaysKeepNeverSwitches) {
  const auto& f = testing::ames();
  const auto sessions = simulate(f.engine, f.parts.test.rows, config("always_keep"));
  std::vector<TaskOutcome> outcomes;
  for (const auto& s : sessions) {
    const auto o = outcome_from_transcript(s.transcript);
    EXPECT_EQ(o.human_initial, o.human_final);
    if (o.stage == StageTag::intervention) outcomes.push_back(o);
  }
  const auto r = reliance(outcomes);
  EXPECT_EQ(r.switch_to_ai.numerator, 0u);
}

TEST(Simulate, DeterministicAndReplayable) {
  const auto& f = testing::ames();
  const auto c = config("always_adopt");
  const auto a = simulate(f.engine, f.parts.test.rows, c);
  const auto b = simulate(f.engine, f.parts.test.rows, c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(same_transcript(a[i].transcript, b[i].transcript));

  const auto& s = a[7];
  const auto& started = s.transcript.front().payload;
  const auto task = std::find_if(f.parts.test.rows.begin(), f.parts.test.rows.end(),
                                 [&](const Instance& r) { return r.id == s.task_id; });
  ASSERT_NE(task, f.parts.test.rows.end());
  SessionOptions o;
  o.participant = s.participant;
  o.stage_tag = started.at("stage_tag");
  Session replay("r", f.engine, *task, mode_from_string(started.at("mode").get<std::string>()), c.params, o);
  for (const auto& answer : s.answers) apply_answer(replay, answer);
  EXPECT_TRUE(same_transcript(replay.transcript(), s.transcript));
}

TEST(Simulate, AnalyzerAndRecommenderModes) {
  const auto& f = testing::ames();
  for (const Mode mode : {Mode::recommender, Mode::analyzer}) {
    const auto sessions = simulate(f.engine, f.parts.test.rows, config("always_adopt", mode));
    for (const auto& s : sessions) {
      const auto bad = testing::transcript_violations(s.transcript, 1);
      EXPECT_TRUE(bad.empty()) << bad.front();
    }
  }
  EXPECT_NE(responder_seed(0, "p001", "t1"), responder_seed(0, "p002", "t1"));
  EXPECT_NE(responder_seed(0, "p001", "t1"), responder_seed(0, "p001", "t2"));
}

}  // namespace
}  // namespace aact
