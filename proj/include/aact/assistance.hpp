#pragma once

#include "aact/counterfactual.hpp"

#include <cstddef>
#include <vector>

namespace aact {

/// Scores with a magnitude below this are listed as neither supporting nor
/// opposing.
inline constexpr double kEvidenceCutoff = 1e-6;

struct FeatureScore {
  std::size_t feature = 0;
  double score = 0.0;
};

/// Explicit AI recommendation: argmax class, its probability, and the
/// importance of every feature towards it.
struct Recommendation {
  std::size_t prediction = 0;
  double confidence = 0.0;
  std::vector<FeatureScore> importances;
};

struct ClassEvidence {
  std::size_t decision = 0;
  std::vector<FeatureScore> supporting;
  std::vector<FeatureScore> opposing;
};

/// Evidence for and against every class, without a prediction.
struct HypothesisEvidence {
  std::vector<ClassEvidence> classes;
};

Recommendation recommender_payload(const Engine& engine, const Instance& task,
                                   const EngineParams& params);

HypothesisEvidence analyzer_payload(const Engine& engine, const Instance& task,
                                    const EngineParams& params);

}  // namespace aact
