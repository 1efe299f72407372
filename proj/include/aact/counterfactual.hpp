#pragma once

#include "aact/argument.hpp"
#include "aact/dataset.hpp"
#include "aact/model.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace aact {

/// How strongest arguments for alternative decisions are found.
enum class ArgumentSearch { importance, exact };

/// What conflict candidates are ranked by: confidence given the candidate
/// argument, or given the whole task.
enum class ConflictScoring { argument, full_instance };

enum class UpdateStrategy { continue_stages, restart };

struct EngineParams {
  double epsilon = 0.04;
  std::size_t k = 1;
  std::size_t max_feature_change = 1;
  std::size_t samples = 5000;
  std::uint64_t seed = 0;
  double mu = 0.05;
  SamplingMode sampling = SamplingMode::independent;
  std::size_t min_support = 10;
  ArgumentSearch argument_search = ArgumentSearch::importance;
  ConflictScoring conflict_scoring = ConflictScoring::argument;
  UpdateStrategy update_strategy = UpdateStrategy::continue_stages;
  bool include_agreement = true;

  /// Range checks; max_feature_change > 1 and the restart strategy are
  /// rejected as not implemented.
  void validate() const;
};

enum class IssueKind { missing_supporting, missing_opposing, unreliable, irrelevant, reliable };

struct IssueFlag {
  IssueKind kind = IssueKind::irrelevant;
  std::size_t feature = 0;
  double delta = 0.0;            // signed change in the model's confidence
  double base_confidence = 0.0;  // model confidence given the argument

  bool suppressed() const noexcept { return kind == IssueKind::irrelevant; }
};

struct ConflictCandidate {
  std::size_t alt_decision = 0;
  Argument argument;
  double confidence = 0.0;
};

struct Critique {
  std::size_t decision = 0;
  Argument argument;
  double p_m = 0.0;
  std::vector<IssueFlag> agreement;       // reliable
  std::vector<IssueFlag> incompleteness;  // missing supporting / opposing
  std::vector<IssueFlag> unreliability;   // unreliable
  std::vector<IssueFlag> irrelevant;      // kept, never shown
  std::vector<ConflictCandidate> conflicts;  // descending confidence, at most k

  bool has_issues() const noexcept {
    return !agreement.empty() || !incompleteness.empty() || !unreliability.empty() ||
           !conflicts.empty();
  }
};

struct ScoredArgument {
  Argument argument;
  double confidence = 0.0;
};

/// Classification rules for single-feature perturbations; nullopt means the
/// change is not substantial.
std::optional<IssueKind> classify_addition(double delta, double epsilon);
IssueKind classify_removal(double delta, double epsilon);

/// Model plus background data, with the per-row score contribution of every
/// feature precomputed so marginalization only sums and normalizes.
class Engine {
 public:
  Engine(Classifier model, Dataset train);

  const Classifier& model() const noexcept { return model_; }
  const Dataset& train() const noexcept { return train_; }
  const FeatureSchema& schema() const noexcept { return model_.schema(); }
  std::size_t feature_count() const noexcept { return model_.schema().size(); }
  std::size_t class_count() const noexcept { return model_.class_count(); }

  /// Model confidence in every class given only the argument, averaging
  /// over background completions. A full argument returns predict_proba
  /// unchanged. All classes share one completion set.
  Eigen::VectorXd marginal_distribution(const Instance& task, const Argument& argument,
                                        const EngineParams& params) const;

  /// Per-task sampling seed: stable in the task id and the base seed, so
  /// every argument of one task sees the same background draw.
  static std::uint64_t seed_for(const Instance& task, const EngineParams& params);

 private:
  Classifier model_;
  Dataset train_;
  // rows x (features * classes), row-major
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> contributions_;
};

double marginal_confidence(const Engine& engine, const Instance& task, std::size_t decision,
                           const Argument& argument, const EngineParams& params);

double confidence_delta_add(const Engine& engine, const Instance& task, std::size_t decision,
                            const Argument& argument, std::size_t feature,
                            const EngineParams& params);

double confidence_delta_remove(const Engine& engine, const Instance& task, std::size_t decision,
                               const Argument& argument, std::size_t feature,
                               const EngineParams& params);

/// Features x classes matrix of s(X_i, y) = P(y | {X_i}) - P(y | {}).
/// Positive entries support the class.
Eigen::MatrixXd importance_matrix(const Engine& engine, const Instance& task,
                                  const EngineParams& params);

Eigen::VectorXd feature_importance(const Engine& engine, const Instance& task,
                                   std::size_t decision, const EngineParams& params);

/// Features whose importance towards alt_decision exceeds mu; nullopt when
/// no feature qualifies.
std::optional<ScoredArgument> strongest_argument(const Engine& engine, const Instance& task,
                                                 std::size_t alt_decision,
                                                 const EngineParams& params);

/// Same construction from precomputed importance scores for alt_decision.
std::optional<ScoredArgument> strongest_argument(const Engine& engine, const Instance& task,
                                                 std::size_t alt_decision,
                                                 const Eigen::Ref<const Eigen::VectorXd>& scores,
                                                 const EngineParams& params);

inline constexpr std::size_t kMaxEnumerationFeatures = 12;

/// Argmax of the marginal confidence over every non-empty feature subset.
/// Ties go to the smaller subset, then the lexicographically smaller one.
ScoredArgument exact_strongest_argument(const Engine& engine, const Instance& task,
                                        std::size_t alt_decision, const EngineParams& params);

Critique identify_issues(const Engine& engine, const Instance& task, std::size_t human_decision,
                         const Argument& argument, const EngineParams& params);

std::string_view to_string(IssueKind kind);
std::string_view to_string(ArgumentSearch search);
std::string_view to_string(ConflictScoring scoring);
std::string_view to_string(UpdateStrategy strategy);

}  // namespace aact
