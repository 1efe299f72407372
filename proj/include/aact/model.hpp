#pragma once

#include "aact/dataset.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aact {

/// Class probabilities in schema class order.
struct Distribution {
  Eigen::VectorXd probs;
  // Set when a categorical value was outside the training vocabulary and
  // encoded as all zeros.
  bool unseen_category = false;

  std::size_t prediction() const;
  double confidence() const { return probs.maxCoeff(); }
};

/// Maps one raw feature value onto its block of model inputs.
struct FeatureEncoder {
  FeatureEncoding type = FeatureEncoding::raw;
  std::size_t offset = 0;
  std::size_t width = 1;
  std::vector<std::size_t> vocabulary;  // onehot: level code per column
  double center = 0.0;
  double scale = 1.0;
};

struct TrainingConfig {
  double inverse_regularization = 1.0;  // L2, intercepts unpenalized
  double tolerance = 1e-6;              // Euclidean norm of the gradient
  int max_iterations = 200;
  int max_cg_iterations = 200;
};

struct TrainingMeta {
  std::string solver = "newton-cg";
  double inverse_regularization = 1.0;
  double tolerance = 1e-6;
  int max_iterations = 200;
  int iterations = 0;
  double gradient_norm = 0.0;
  double train_accuracy = 0.0;
  std::size_t train_rows = 0;
  // Provenance of the train split, so analysis can rebuild it.
  std::uint32_t split_seed = 0;
  double split_ratio = 0.8;
  bool stratified = false;
};

/// Multinomial logistic regression over encoded features.
class Classifier {
 public:
  Classifier(FeatureSchema schema, std::vector<FeatureEncoder> encoders,
             Eigen::MatrixXd weights, Eigen::VectorXd intercepts,
             TrainingMeta meta = {});

  /// Hand-set model: encoders use every schema level, no standardization
  /// shift. Weights are classes x encoded width.
  static Classifier from_parameters(FeatureSchema schema,
                                    Eigen::MatrixXd weights,
                                    Eigen::VectorXd intercepts);

  const FeatureSchema& schema() const noexcept { return schema_; }
  const std::vector<FeatureEncoder>& encoders() const noexcept { return encoders_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }
  const Eigen::VectorXd& intercepts() const noexcept { return intercepts_; }
  const TrainingMeta& meta() const noexcept { return meta_; }
  TrainingMeta& meta() noexcept { return meta_; }

  std::size_t class_count() const noexcept { return schema_.class_count(); }
  std::size_t input_width() const noexcept { return static_cast<std::size_t>(weights_.cols()); }

  /// Writes the encoded instance into `out` (size input_width()). Returns
  /// false when a categorical value fell outside the vocabulary.
  bool encode(const Instance& instance, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::VectorXd scores(const Instance& instance) const;
  Distribution predict_proba(const Instance& instance) const;

  /// Score contribution of one feature at one value; summing these over
  /// all features and adding the intercepts gives the linear scores.
  Eigen::VectorXd feature_scores(std::size_t feature, double value) const;

 private:
  void check_shapes() const;

  FeatureSchema schema_;
  std::vector<FeatureEncoder> encoders_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd intercepts_;
  TrainingMeta meta_;
};

inline Distribution predict_proba(const Classifier& model, const Instance& instance) {
  return model.predict_proba(instance);
}

/// Encoders fitted on the data: observed one-hot vocabularies and
/// population mean/std for standardized features.
std::vector<FeatureEncoder> fit_encoders(const Dataset& data);

/// Fits by Newton-CG on the mean log loss plus ||W||^2 / (2 C n).
/// Throws invalid_argument on single-class data and runtime_failure when
/// the gradient tolerance is not reached.
Classifier train(const Dataset& train, const TrainingConfig& config = {});

struct Evaluation {
  std::size_t rows = 0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  std::vector<double> recall;
  std::vector<double> precision;
  std::vector<double> f1;
  Eigen::MatrixXi confusion;  // truth x prediction
};

Evaluation evaluate(const Classifier& model, const Dataset& test);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json classifier_to_json(const Classifier& model);
Classifier classifier_from_json(const nlohmann::json& doc);
void save(const Classifier& model, const std::filesystem::path& path);
Classifier load(const std::filesystem::path& path);

}  // namespace aact
