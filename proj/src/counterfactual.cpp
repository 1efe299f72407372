#include "aact/counterfactual.hpp"

#include "aact/error.hpp"
#include "aact/random.hpp"

#include <algorithm>
#include <cmath>

namespace aact {
namespace {

void check_query(const Engine& engine, const Instance& task, std::size_t decision,
                 const Argument& argument) {
  if (task.values.size() != engine.feature_count())
    fail(ErrorCode::invalid_argument, "task arity does not match schema");
  if (decision >= engine.class_count()) fail(ErrorCode::not_found, "unknown class index");
  for (const auto f : argument) {
    if (f >= engine.feature_count()) fail(ErrorCode::not_found, "argument feature out of range");
  }
}

}  // namespace

void EngineParams::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail(ErrorCode::invalid_argument, "epsilon must lie in [0, 1]");
  if (max_feature_change < 1) fail(ErrorCode::invalid_argument, "max_feature_change must be >= 1");
  if (max_feature_change > 1)
    fail(ErrorCode::not_implemented, "max_feature_change > 1 is not implemented");
  if (samples < 1) fail(ErrorCode::invalid_argument, "sample count L must be >= 1");
  if (!(mu > 0.0)) fail(ErrorCode::invalid_argument, "mu must be positive");
  if (min_support < 1) fail(ErrorCode::invalid_argument, "min_support must be >= 1");
  if (update_strategy == UpdateStrategy::restart)
    fail(ErrorCode::not_implemented, "the restart update strategy is not implemented");
}

std::optional<IssueKind> classify_addition(double delta, double epsilon) {
  if (delta > epsilon) return IssueKind::missing_supporting;
  if (delta < -epsilon) return IssueKind::missing_opposing;
  return std::nullopt;
}

IssueKind classify_removal(double delta, double epsilon) {
  if (delta > epsilon) return IssueKind::unreliable;
  if (delta < -epsilon) return IssueKind::reliable;
  return IssueKind::irrelevant;
}

Engine::Engine(Classifier model, Dataset train) : model_(std::move(model)), train_(std::move(train)) {
  if (train_.rows.empty()) fail(ErrorCode::invalid_argument, "engine needs background rows");
  if (train_.schema.size() != model_.schema().size())
    fail(ErrorCode::invalid_argument, "dataset schema does not match the model");
  const std::size_t n_features = feature_count();
  const std::size_t n_classes = class_count();
  contributions_.resize(static_cast<Eigen::Index>(train_.size()),
                        static_cast<Eigen::Index>(n_features * n_classes));
  for (std::size_t r = 0; r < train_.size(); ++r) {
    for (std::size_t f = 0; f < n_features; ++f) {
      contributions_.row(static_cast<Eigen::Index>(r))
          .segment(static_cast<Eigen::Index>(f * n_classes), static_cast<Eigen::Index>(n_classes)) =
          model_.feature_scores(f, train_.rows[r].values[f]).transpose();
    }
  }
}

std::uint64_t Engine::seed_for(const Instance& task, const EngineParams& params) {
  return splitmix64(fnv1a(task.id) ^ splitmix64(params.seed));
}

Eigen::VectorXd Engine::marginal_distribution(const Instance& task, const Argument& argument,
                                              const EngineParams& params) const {
  check_query(*this, task, 0, argument);
  const std::size_t n_features = feature_count();
  if (argument.size() == n_features) return model_.predict_proba(task).probs;

  const std::uint64_t seed = seed_for(task, params);
  std::vector<std::size_t> rows;
  if (params.sampling == SamplingMode::conditional) {
    try {
      rows = sample_rows(train_, task, argument, params.samples, seed, SamplingMode::conditional);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::not_found) throw;
      rows = sample_rows(train_, task, argument, params.samples, seed, SamplingMode::independent);
    }
  } else {
    rows = sample_rows(train_, task, argument, params.samples, seed, params.sampling);
  }

  const auto n_classes = static_cast<Eigen::Index>(class_count());
  Eigen::VectorXd base = model_.intercepts();
  std::vector<std::size_t> free_features;
  for (std::size_t f = 0; f < n_features; ++f) {
    if (argument.contains(f)) {
      base += model_.feature_scores(f, task.values[f]);
    } else {
      free_features.push_back(f);
    }
  }

  Eigen::VectorXd total = Eigen::VectorXd::Zero(n_classes);
  Eigen::VectorXd scores(n_classes);
  for (const auto r : rows) {
    scores = base;
    const auto row = contributions_.row(static_cast<Eigen::Index>(r));
    for (const auto f : free_features) {
      scores += row.segment(static_cast<Eigen::Index>(f) * n_classes, n_classes).transpose();
    }
    const double top = scores.maxCoeff();
    scores = (scores.array() - top).exp().matrix();
    total += scores / scores.sum();
  }
  return total / static_cast<double>(rows.size());
}

double marginal_confidence(const Engine& engine, const Instance& task, std::size_t decision,
                           const Argument& argument, const EngineParams& params) {
  check_query(engine, task, decision, argument);
  return engine.marginal_distribution(task, argument, params)(static_cast<Eigen::Index>(decision));
}

double confidence_delta_add(const Engine& engine, const Instance& task, std::size_t decision,
                            const Argument& argument, std::size_t feature,
                            const EngineParams& params) {
  if (argument.contains(feature)) fail(ErrorCode::invalid_argument, "feature already in argument");
  if (feature >= engine.feature_count()) fail(ErrorCode::not_found, "feature out of range");
  return marginal_confidence(engine, task, decision, argument.with(feature), params) -
         marginal_confidence(engine, task, decision, argument, params);
}

double confidence_delta_remove(const Engine& engine, const Instance& task, std::size_t decision,
                               const Argument& argument, std::size_t feature,
                               const EngineParams& params) {
  if (!argument.contains(feature)) fail(ErrorCode::invalid_argument, "feature not in argument");
  return marginal_confidence(engine, task, decision, argument.without(feature), params) -
         marginal_confidence(engine, task, decision, argument, params);
}

Eigen::MatrixXd importance_matrix(const Engine& engine, const Instance& task,
                                  const EngineParams& params) {
  const auto n_features = static_cast<Eigen::Index>(engine.feature_count());
  const Eigen::VectorXd prior = engine.marginal_distribution(task, Argument{}, params);
  Eigen::MatrixXd scores(n_features, prior.size());
  for (Eigen::Index f = 0; f < n_features; ++f) {
    const Argument single({static_cast<std::size_t>(f)});
    scores.row(f) = (engine.marginal_distribution(task, single, params) - prior).transpose();
  }
  return scores;
}

Eigen::VectorXd feature_importance(const Engine& engine, const Instance& task,
                                   std::size_t decision, const EngineParams& params) {
  check_query(engine, task, decision, Argument{});
  return importance_matrix(engine, task, params).col(static_cast<Eigen::Index>(decision));
}

std::optional<ScoredArgument> strongest_argument(const Engine& engine, const Instance& task,
                                                 std::size_t alt_decision,
                                                 const Eigen::Ref<const Eigen::VectorXd>& scores,
                                                 const EngineParams& params) {
  check_query(engine, task, alt_decision, Argument{});
  std::vector<std::size_t> chosen;
  for (Eigen::Index f = 0; f < scores.size(); ++f) {
    if (scores(f) > params.mu) chosen.push_back(static_cast<std::size_t>(f));
  }
  if (chosen.empty()) return std::nullopt;
  ScoredArgument out{Argument(std::move(chosen)), 0.0};
  out.confidence = marginal_confidence(engine, task, alt_decision, out.argument, params);
  return out;
}

std::optional<ScoredArgument> strongest_argument(const Engine& engine, const Instance& task,
                                                 std::size_t alt_decision,
                                                 const EngineParams& params) {
  const Eigen::VectorXd scores = feature_importance(engine, task, alt_decision, params);
  return strongest_argument(engine, task, alt_decision, scores, params);
}

ScoredArgument exact_strongest_argument(const Engine& engine, const Instance& task,
                                        std::size_t alt_decision, const EngineParams& params) {
  const std::size_t n = engine.feature_count();
  if (n > kMaxEnumerationFeatures)
    fail(ErrorCode::invalid_argument, "exhaustive argument search is limited to " +
                                          std::to_string(kMaxEnumerationFeatures) + " features");
  check_query(engine, task, alt_decision, Argument{});
  if (n == 0) fail(ErrorCode::invalid_argument, "no features to search");

  std::optional<ScoredArgument> best;
  for (std::uint32_t mask = 1; mask < (1U << n); ++mask) {
    std::vector<std::size_t> features;
    for (std::size_t f = 0; f < n; ++f) {
      if (mask & (1U << f)) features.push_back(f);
    }
    ScoredArgument candidate{Argument(std::move(features)), 0.0};
    candidate.confidence = marginal_confidence(engine, task, alt_decision, candidate.argument, params);
    const bool better =
        !best || candidate.confidence > best->confidence ||
        (candidate.confidence == best->confidence &&
         (candidate.argument.size() < best->argument.size() ||
          (candidate.argument.size() == best->argument.size() &&
           candidate.argument.features() < best->argument.features())));
    if (better) best = std::move(candidate);
  }
  return *best;
}

Critique identify_issues(const Engine& engine, const Instance& task, std::size_t human_decision,
                         const Argument& argument, const EngineParams& params) {
  params.validate();
  check_query(engine, task, human_decision, argument);
  const auto decision = static_cast<Eigen::Index>(human_decision);

  Critique critique;
  critique.decision = human_decision;
  critique.argument = argument;
  critique.p_m = engine.marginal_distribution(task, argument, params)(decision);

  for (std::size_t f = 0; f < engine.feature_count(); ++f) {
    if (!argument.contains(f)) {
      const double delta =
          engine.marginal_distribution(task, argument.with(f), params)(decision) - critique.p_m;
      if (const auto kind = classify_addition(delta, params.epsilon)) {
        critique.incompleteness.push_back({*kind, f, delta, critique.p_m});
      }
    } else {
      const double delta =
          engine.marginal_distribution(task, argument.without(f), params)(decision) - critique.p_m;
      const IssueFlag flag{classify_removal(delta, params.epsilon), f, delta, critique.p_m};
      switch (flag.kind) {
        case IssueKind::unreliable: critique.unreliability.push_back(flag); break;
        case IssueKind::reliable: critique.agreement.push_back(flag); break;
        default: critique.irrelevant.push_back(flag); break;
      }
    }
  }

  if (params.k > 0) {
    const double chance = 1.0 / static_cast<double>(engine.class_count());
    Eigen::MatrixXd scores;
    if (params.argument_search == ArgumentSearch::importance) {
      scores = importance_matrix(engine, task, params);
    }
    Eigen::VectorXd full;
    if (params.conflict_scoring == ConflictScoring::full_instance) {
      full = engine.model().predict_proba(task).probs;
    }
    for (std::size_t alt = 0; alt < engine.class_count(); ++alt) {
      if (alt == human_decision) continue;
      std::optional<ScoredArgument> found;
      if (params.argument_search == ArgumentSearch::exact) {
        found = exact_strongest_argument(engine, task, alt, params);
      } else {
        found = strongest_argument(engine, task, alt, scores.col(static_cast<Eigen::Index>(alt)), params);
      }
      if (!found) continue;
      const double confidence = params.conflict_scoring == ConflictScoring::argument
                                    ? found->confidence
                                    : full(static_cast<Eigen::Index>(alt));
      if (confidence > chance) {
        critique.conflicts.push_back({alt, std::move(found->argument), confidence});
      }
    }
    std::stable_sort(critique.conflicts.begin(), critique.conflicts.end(),
                     [](const ConflictCandidate& a, const ConflictCandidate& b) {
                       return a.confidence > b.confidence;
                     });
    if (critique.conflicts.size() > params.k) critique.conflicts.resize(params.k);
  }
  return critique;
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::missing_supporting: return "missing_supporting";
    case IssueKind::missing_opposing: return "missing_opposing";
    case IssueKind::unreliable: return "unreliable";
    case IssueKind::irrelevant: return "irrelevant";
    case IssueKind::reliable: return "reliable";
  }
  return "?";
}

std::string_view to_string(ArgumentSearch search) {
  return search == ArgumentSearch::exact ? "exact" : "importance";
}

std::string_view to_string(ConflictScoring scoring) {
  return scoring == ConflictScoring::argument ? "argument" : "full_instance";
}

std::string_view to_string(UpdateStrategy strategy) {
  return strategy == UpdateStrategy::restart ? "restart" : "continue";
}

}  // namespace aact
