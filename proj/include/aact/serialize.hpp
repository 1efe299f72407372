#pragma once

#include "aact/assistance.hpp"
#include "aact/counterfactual.hpp"
#include "aact/model.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace aact {

/// Shortest decimal text that parses back to the same double.
std::string shortest(double value);

nlohmann::json task_json(const FeatureSchema& schema, const Instance& task);
nlohmann::json argument_json(const FeatureSchema& schema, const Instance& task,
                             const Argument& argument);
nlohmann::json flag_json(const FeatureSchema& schema, const IssueFlag& flag);
nlohmann::json critique_json(const FeatureSchema& schema, const Instance& task,
                             const Critique& critique);
nlohmann::json recommendation_json(const FeatureSchema& schema, const Recommendation& rec);
nlohmann::json evidence_json(const FeatureSchema& schema, const HypothesisEvidence& evidence);
nlohmann::json evaluation_json(const FeatureSchema& schema, const Evaluation& evaluation);

nlohmann::json params_to_json(const EngineParams& params);
/// Missing keys keep their defaults; the result is validated.
EngineParams params_from_json(const nlohmann::json& doc, EngineParams base = {});

}  // namespace aact
