#include "aact/assistance.hpp"

#include "aact/math.hpp"

#include <cmath>

namespace aact {

Recommendation recommender_payload(const Engine& engine, const Instance& task,
                                   const EngineParams& params) {
  const auto dist = engine.model().predict_proba(task);
  Recommendation out;
  out.prediction = dist.prediction();
  out.confidence = dist.probs(static_cast<Eigen::Index>(out.prediction));
  const Eigen::VectorXd scores = feature_importance(engine, task, out.prediction, params);
  for (Eigen::Index f = 0; f < scores.size(); ++f) {
    out.importances.push_back({static_cast<std::size_t>(f), scores(f)});
  }
  return out;
}

HypothesisEvidence analyzer_payload(const Engine& engine, const Instance& task,
                                    const EngineParams& params) {
  const Eigen::MatrixXd scores = importance_matrix(engine, task, params);
  HypothesisEvidence out;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    ClassEvidence evidence;
    evidence.decision = static_cast<std::size_t>(c);
    for (Eigen::Index f = 0; f < scores.rows(); ++f) {
      const double s = scores(f, c);
      if (std::abs(s) < kEvidenceCutoff) continue;
      (s > 0 ? evidence.supporting : evidence.opposing).push_back({static_cast<std::size_t>(f), s});
    }
    out.classes.push_back(std::move(evidence));
  }
  return out;
}

}  // namespace aact
