#include "aact/error.hpp"
#include "aact/model.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>

namespace aact {
namespace {

using testing::ames;
using testing::binary_schema;
using testing::task_of;

TEST(Predict, ZeroModelIsUniform) {
  const auto model = Classifier::from_parameters(binary_schema(2), Eigen::MatrixXd::Zero(2, 2), Eigen::VectorXd::Zero(2));
  for (double a : {0.0, 1.0}) {
    for (double b : {0.0, 1.0}) {
      const auto p = model.predict_proba(task_of("t", {a, b})).probs;
      EXPECT_EQ(p(0), 0.5);
      EXPECT_EQ(p(1), 0.5);
    }
  }
}

TEST(Predict, ScoreGapLn3) {
  Eigen::VectorXd b(2);
  b << std::log(3.0), 0.0;
  const auto model = Classifier::from_parameters(binary_schema(2), Eigen::MatrixXd::Zero(2, 2), b);
  const auto p = model.predict_proba(task_of("t", {1, 0})).probs;
  EXPECT_NEAR(p(0), 0.75, 1e-15);
  EXPECT_NEAR(p(1), 0.25, 1e-15);
}

TEST(Predict, Monotone) {
  FeatureSchema s = binary_schema(1);
  s.features[0].kind = FeatureKind::continuous;
  s.features[0].bin_edges = {0.0};
  Eigen::MatrixXd w(2, 1);
  w << 0.0, 0.7;
  const auto model = Classifier::from_parameters(s, w, Eigen::VectorXd::Zero(2));
  double last = 0.0;
  for (double x = -5; x <= 5; x += 0.25) {
    const double p = model.predict_proba(task_of("t", {x})).probs(1);
    EXPECT_GE(p, last);
    last = p;
  }
}

TEST(Predict, NormalizesOnAmes) {
  const auto& f = ames();
  for (const auto& row : f.parts.test.rows) {
    const auto p = f.model().predict_proba(row).probs;
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_GE(p.minCoeff(), 0.0);
  }
}

TEST(Predict, UnseenCategoryIsFlagged) {
  FeatureSchema s;
  s.features = {{"c", "c", FeatureKind::categorical, FeatureEncoding::onehot, {"a", "b"}, false, 5, {}}};
  s.classes = {"n", "y"};
  const auto model = Classifier::from_parameters(s, Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Zero(2));
  EXPECT_FALSE(model.predict_proba(task_of("t", {1})).unseen_category);
  EXPECT_TRUE(model.predict_proba(task_of("t", {5})).unseen_category);
}

TEST(Train, SeparableToy) {
  // class 1 iff x1 + x2 >= 1 with margin
  FeatureSchema s = binary_schema(2);
  Dataset d{s, {}};
  for (int i = 0; i < 40; ++i) {
    const double a = (i % 4) * 0.5, b = ((i / 4) % 5) * 0.5;
    if (std::abs(a + b - 1.1) < 0.3) continue;
    d.rows.push_back({std::to_string(i), {a, b}, a + b > 1.1 ? 1u : 0u});
  }
  const auto model = train(d);
  EXPECT_EQ(model.meta().train_accuracy, 1.0);
}

TEST(Train, SingleClassFails) {
  auto d = testing::factorial(binary_schema(2));
  for (auto& r : d.rows) r.label = 1;
  try {
    train(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("single-class"), std::string::npos);
  }
}

TEST(Train, NonConvergenceReportsIterations) {
  TrainingConfig config;
  config.max_iterations = 2;
  try {
    train(ames().parts.train, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::runtime_failure);
    EXPECT_NE(std::string(e.what()).find("2 iterations"), std::string::npos) << e.what();
  }
}

TEST(Train, Deterministic) {
  const auto a = train(ames().parts.train);
  EXPECT_LE((a.weights() - ames().model().weights()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE((a.intercepts() - ames().model().intercepts()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Train, MatchesReferenceSolver) {
  // coefficients from scikit-learn LogisticRegression(solver="newton-cg") on the same split
  Eigen::MatrixXd ref(3, 8);
  ref << 0.285691984, -0.434897782, -0.886276856, -1.00653525, -0.48663823, -0.564248481, 0.0403473777, -0.00414034376,
      0.0504872119, 0.506275041, -0.052169309, -0.0289538236, -0.253909631, 0.0339896913, -0.000487723212, -5.86728161e-05,
      -0.336179196, -0.0713772586, 0.938446165, 1.03548907, 0.740547861, 0.53025879, -0.0398596545, 0.0041990166;
  const auto& w = ames().model().weights();
  ASSERT_EQ(w.rows(), 3);
  ASSERT_EQ(w.cols(), 8);
  EXPECT_LE((w - ref).cwiseAbs().maxCoeff(), 1e-4) << w;
  const auto p = ames().model().predict_proba(ames().parts.test.rows[0]).probs;
  EXPECT_NEAR(p(0), 5.762834286e-04, 1e-6);
  EXPECT_NEAR(p(1), 0.8209912187, 1e-6);
  EXPECT_NEAR(p(2), 0.1784324979, 1e-6);
}

TEST(Persist, RoundTripIsBitwise) {
  const auto path = std::filesystem::temp_directory_path() / "aact_model.json";
  save(ames().model(), path);
  const auto back = load(path);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& row = ames().parts.train.rows[i];
    const auto a = ames().model().predict_proba(row).probs;
    const auto b = back.predict_proba(row).probs;
    EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(back.meta().iterations, ames().model().meta().iterations);
}

TEST(Persist, CorruptFieldIsNamed) {
  auto doc = classifier_to_json(ames().model());
  doc["weights"] = "oops";
  try {
    classifier_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos) << e.what();
  }
  doc = classifier_to_json(ames().model());
  doc.erase("intercepts");
  try {
    classifier_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("intercepts"), std::string::npos) << e.what();
  }
}

TEST(Persist, OldVersionRejected) {
  auto doc = classifier_to_json(ames().model());
  doc["version"] = kModelFormatVersion - 1;
  try {
    classifier_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported format version"), std::string::npos);
  }
}

TEST(Evaluate, ConstantPredictor) {
  FeatureSchema s = binary_schema(1, {"Low", "Medium", "High"});
  Eigen::VectorXd b(3);
  b << 0.0, 5.0, 0.0;
  const auto model = Classifier::from_parameters(s, Eigen::MatrixXd::Zero(3, 1), b);
  Dataset test{s, {}};
  for (std::size_t c = 0; c < 3; ++c) {
    for (int i = 0; i < 4; ++i) test.rows.push_back({"r", {0}, c});
  }
  const auto ev = evaluate(model, test);
  EXPECT_NEAR(ev.balanced_accuracy, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ev.accuracy, 1.0 / 3.0, 1e-15);
}

TEST(Evaluate, PerfectPredictor) {
  FeatureSchema s = binary_schema(1);
  Eigen::MatrixXd w(2, 1);
  w << -10, 10;
  const auto model = Classifier::from_parameters(s, w, Eigen::VectorXd::Zero(2));
  Dataset test{s, {{"a", {0}, 0u}, {"b", {1}, 1u}, {"c", {1}, 1u}}};
  const auto ev = evaluate(model, test);
  EXPECT_EQ(ev.accuracy, 1.0);
  EXPECT_EQ(ev.balanced_accuracy, 1.0);
  EXPECT_EQ(ev.f1, (std::vector<double>{1.0, 1.0}));
  Dataset unlabeled{s, {{"a", {0}, std::nullopt}}};
  EXPECT_THROW(evaluate(model, unlabeled), Error);
}

TEST(Evaluate, AmesReference) {
  Dataset test = ames().parts.test;
  const auto ev = evaluate(ames().model(), test);
  EXPECT_NEAR(ev.accuracy, 0.8737, 5e-5);
  EXPECT_NEAR(ev.balanced_accuracy, 0.795, 5e-4);
  EXPECT_NEAR(ev.f1[0], 0.694, 5e-4);
  EXPECT_NEAR(ev.f1[1], 0.902, 5e-4);
  EXPECT_NEAR(ev.f1[2], 0.851, 5e-4);
}

}  // namespace
}  // namespace aact
