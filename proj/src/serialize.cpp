#include "aact/serialize.hpp"

#include "aact/error.hpp"

#include <charconv>

namespace aact {

using nlohmann::json;

std::string shortest(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc{}) fail(ErrorCode::runtime_failure, "cannot format number");
  return std::string(buffer, ptr);
}

json task_json(const FeatureSchema& schema, const Instance& task) {
  json features = json::array();
  for (std::size_t f = 0; f < schema.size(); ++f) {
    features.push_back({{"name", schema.features[f].name},
                        {"label", schema.features[f].label},
                        {"value", schema.format_value(f, task.values[f])}});
  }
  return {{"id", task.id}, {"features", std::move(features)}, {"classes", schema.classes}};
}

json argument_json(const FeatureSchema& schema, const Instance& task, const Argument& argument) {
  json out = json::array();
  for (const auto f : argument) {
    out.push_back({{"feature", schema.features[f].name},
                   {"label", schema.features[f].label},
                   {"value", schema.format_value(f, task.values[f])}});
  }
  return out;
}

json flag_json(const FeatureSchema& schema, const IssueFlag& flag) {
  json out{{"kind", to_string(flag.kind)},
           {"feature", schema.features.at(flag.feature).name},
           {"delta", flag.delta},
           {"base_confidence", flag.base_confidence}};
  if (flag.suppressed()) out["suppressed"] = true;
  return out;
}

json critique_json(const FeatureSchema& schema, const Instance& task, const Critique& critique) {
  const auto flags = [&](const std::vector<IssueFlag>& list) {
    json out = json::array();
    for (const auto& f : list) out.push_back(flag_json(schema, f));
    return out;
  };
  json conflicts = json::array();
  for (const auto& c : critique.conflicts) {
    conflicts.push_back({{"alt_decision", schema.classes.at(c.alt_decision)},
                         {"argument", c.argument.names(schema)},
                         {"confidence", c.confidence}});
  }
  return {{"task_id", task.id},
          {"decision", schema.classes.at(critique.decision)},
          {"argument", argument_json(schema, task, critique.argument)},
          {"p_m", critique.p_m},
          {"agreement", flags(critique.agreement)},
          {"incompleteness", flags(critique.incompleteness)},
          {"unreliability", flags(critique.unreliability)},
          {"irrelevant", flags(critique.irrelevant)},
          {"conflicts", std::move(conflicts)}};
}

json recommendation_json(const FeatureSchema& schema, const Recommendation& rec) {
  json importances = json::array();
  for (const auto& s : rec.importances) {
    importances.push_back({{"feature", schema.features.at(s.feature).name}, {"score", s.score}});
  }
  return {{"prediction", schema.classes.at(rec.prediction)},
          {"confidence", rec.confidence},
          {"importances", std::move(importances)}};
}

json evidence_json(const FeatureSchema& schema, const HypothesisEvidence& evidence) {
  const auto list = [&](const std::vector<FeatureScore>& scores) {
    json out = json::array();
    for (const auto& s : scores) {
      out.push_back({{"feature", schema.features.at(s.feature).name}, {"score", s.score}});
    }
    return out;
  };
  json classes = json::array();
  for (const auto& block : evidence.classes) {
    classes.push_back({{"decision", schema.classes.at(block.decision)},
                       {"supporting", list(block.supporting)},
                       {"opposing", list(block.opposing)}});
  }
  return {{"classes", std::move(classes)}};
}

json evaluation_json(const FeatureSchema& schema, const Evaluation& evaluation) {
  json f1 = json::object();
  for (std::size_t c = 0; c < evaluation.f1.size(); ++c) f1[schema.classes[c]] = evaluation.f1[c];
  return {{"rows", evaluation.rows},
          {"accuracy", evaluation.accuracy},
          {"balanced_accuracy", evaluation.balanced_accuracy},
          {"f1", std::move(f1)}};
}

json params_to_json(const EngineParams& params) {
  return {{"epsilon", params.epsilon},
          {"k", params.k},
          {"max_feature_change", params.max_feature_change},
          {"L", params.samples},
          {"seed", params.seed},
          {"mu", params.mu},
          {"sampling_mode", to_string(params.sampling)},
          {"min_support", params.min_support},
          {"argument_search", to_string(params.argument_search)},
          {"conflict_scoring", to_string(params.conflict_scoring)},
          {"update_strategy", to_string(params.update_strategy)},
          {"include_agreement", params.include_agreement}};
}

EngineParams params_from_json(const json& doc, EngineParams params) {
  if (!doc.is_object()) fail(ErrorCode::invalid_argument, "engine params must be a JSON object");
  try {
    if (doc.contains("epsilon")) params.epsilon = doc.at("epsilon").get<double>();
    if (doc.contains("k")) params.k = doc.at("k").get<std::size_t>();
    if (doc.contains("max_feature_change"))
      params.max_feature_change = doc.at("max_feature_change").get<std::size_t>();
    if (doc.contains("L")) params.samples = doc.at("L").get<std::size_t>();
    if (doc.contains("seed")) params.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("mu")) params.mu = doc.at("mu").get<double>();
    if (doc.contains("sampling_mode"))
      params.sampling = sampling_mode_from_string(doc.at("sampling_mode").get<std::string>());
    if (doc.contains("min_support")) params.min_support = doc.at("min_support").get<std::size_t>();
    if (doc.contains("argument_search")) {
      const auto text = doc.at("argument_search").get<std::string>();
      if (text == "exact") {
        params.argument_search = ArgumentSearch::exact;
      } else if (text == "importance") {
        params.argument_search = ArgumentSearch::importance;
      } else {
        fail(ErrorCode::invalid_argument, "unknown argument_search '" + text + "'");
      }
    }
    if (doc.contains("conflict_scoring")) {
      const auto text = doc.at("conflict_scoring").get<std::string>();
      if (text == "argument") {
        params.conflict_scoring = ConflictScoring::argument;
      } else if (text == "full_instance") {
        params.conflict_scoring = ConflictScoring::full_instance;
      } else {
        fail(ErrorCode::invalid_argument, "unknown conflict_scoring '" + text + "'");
      }
    }
    if (doc.contains("update_strategy")) {
      const auto text = doc.at("update_strategy").get<std::string>();
      if (text == "continue") {
        params.update_strategy = UpdateStrategy::continue_stages;
      } else if (text == "restart") {
        params.update_strategy = UpdateStrategy::restart;
      } else {
        fail(ErrorCode::invalid_argument, "unknown update_strategy '" + text + "'");
      }
    }
    if (doc.contains("include_agreement"))
      params.include_agreement = doc.at("include_agreement").get<bool>();
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("engine params: ") + e.what());
  }
  params.validate();
  return params;
}

}  // namespace aact
