#include "aact/model.hpp"

#include "aact/error.hpp"
#include "aact/math.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace aact {
namespace {

using nlohmann::json;

std::vector<FeatureEncoder> layout(std::vector<FeatureEncoder> encoders) {
  std::size_t offset = 0;
  for (auto& e : encoders) {
    e.offset = offset;
    e.width = e.type == FeatureEncoding::onehot ? e.vocabulary.size() : 1;
    offset += e.width;
  }
  return encoders;
}

std::size_t total_width(const std::vector<FeatureEncoder>& encoders) {
  return encoders.empty() ? 0 : encoders.back().offset + encoders.back().width;
}

// Value of a single encoded column; onehot handled by the caller.
double encode_scalar(const FeatureEncoder& e, double value) {
  return e.type == FeatureEncoding::standardize ? (value - e.center) / e.scale : value;
}

double dot(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a.array() * b.array()).sum();
}

// Mean log loss with L2 on the weight columns; the last column of theta
// holds the intercepts.
class Objective {
 public:
  Objective(Eigen::MatrixXd inputs, Eigen::MatrixXd targets, double inverse_regularization)
      : x_(std::move(inputs)), y_(std::move(targets)) {
    const double n = static_cast<double>(x_.rows());
    inv_n_ = 1.0 / n;
    lambda_ = 1.0 / (inverse_regularization * n);
    mask_ = Eigen::MatrixXd::Ones(y_.cols(), x_.cols());
    mask_.col(x_.cols() - 1).setZero();
  }

  // Loss at theta; leaves the class probabilities in probs_.
  double value(const Eigen::MatrixXd& theta) {
    probs_ = x_ * theta.transpose();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probs_.rows(); ++i) {
      const double lse = log_sum_exp(probs_.row(i).transpose());
      loss += lse - (probs_.row(i).array() * y_.row(i).array()).sum();
      probs_.row(i) = (probs_.row(i).array() - lse).exp().matrix();
    }
    const Eigen::MatrixXd w = theta.array() * mask_.array();
    return loss * inv_n_ + 0.5 * lambda_ * w.squaredNorm();
  }

  // Gradient at the theta last passed to value().
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& theta) const {
    return inv_n_ * (probs_ - y_).transpose() * x_ +
           lambda_ * (theta.array() * mask_.array()).matrix();
  }

  // Hessian-vector product at the theta last passed to value().
  Eigen::MatrixXd hessian_times(const Eigen::MatrixXd& v) const {
    const Eigen::MatrixXd r = x_ * v.transpose();
    const Eigen::MatrixXd pr = (probs_.array() * r.array()).matrix();
    const Eigen::VectorXd row_sums = pr.rowwise().sum();
    const Eigen::MatrixXd t = pr - (probs_.array().colwise() * row_sums.array()).matrix();
    return inv_n_ * t.transpose() * x_ + lambda_ * (v.array() * mask_.array()).matrix();
  }

 private:
  Eigen::MatrixXd x_;  // n x (D + 1), trailing ones column
  Eigen::MatrixXd y_;  // n x C one-hot
  Eigen::MatrixXd mask_;
  Eigen::MatrixXd probs_;
  double inv_n_ = 0.0;
  double lambda_ = 0.0;
};

// Truncated conjugate gradient for H d = -g.
Eigen::MatrixXd newton_direction(const Objective& objective, const Eigen::MatrixXd& grad,
                                 int max_iterations) {
  const double gnorm = grad.norm();
  const double tolerance = std::min(0.5, std::sqrt(gnorm)) * gnorm;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(grad.rows(), grad.cols());
  Eigen::MatrixXd r = -grad;
  Eigen::MatrixXd p = r;
  double rs = dot(r, r);
  for (int j = 0; j < max_iterations; ++j) {
    if (std::sqrt(rs) <= tolerance) break;
    const Eigen::MatrixXd hp = objective.hessian_times(p);
    const double curvature = dot(p, hp);
    if (curvature <= 0.0) {
      if (j == 0) d = -grad;
      break;
    }
    const double alpha = rs / curvature;
    d += alpha * p;
    r -= alpha * hp;
    const double rs_next = dot(r, r);
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  return d;
}

const json& field(const json& doc, const char* name) {
  if (!doc.is_object() || !doc.contains(name))
    fail(ErrorCode::parse_error, std::string("model file: missing field '") + name + "'");
  return doc.at(name);
}

template <typename T>
T field_as(const json& doc, const char* name) {
  try {
    return field(doc, name).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::parse_error, std::string("model file: invalid field '") + name + "'");
  }
}

}  // namespace

std::size_t Distribution::prediction() const { return static_cast<std::size_t>(argmax(probs)); }

Classifier::Classifier(FeatureSchema schema, std::vector<FeatureEncoder> encoders,
                       Eigen::MatrixXd weights, Eigen::VectorXd intercepts, TrainingMeta meta)
    : schema_(std::move(schema)),
      encoders_(layout(std::move(encoders))),
      weights_(std::move(weights)),
      intercepts_(std::move(intercepts)),
      meta_(std::move(meta)) {
  check_shapes();
}

void Classifier::check_shapes() const {
  schema_.validate();
  if (encoders_.size() != schema_.size())
    fail(ErrorCode::invalid_argument, "one encoder per feature required");
  const auto classes = static_cast<Eigen::Index>(schema_.class_count());
  if (weights_.rows() != classes || intercepts_.size() != classes)
    fail(ErrorCode::invalid_argument, "weights/intercepts must have one row per class");
  if (weights_.cols() != static_cast<Eigen::Index>(total_width(encoders_)))
    fail(ErrorCode::invalid_argument, "weight arity does not match the encoding width");
  for (const auto& e : encoders_) {
    if (!(e.scale > 0.0) || !std::isfinite(e.center))
      fail(ErrorCode::invalid_argument, "encoder scale must be positive");
  }
}

Classifier Classifier::from_parameters(FeatureSchema schema, Eigen::MatrixXd weights,
                                       Eigen::VectorXd intercepts) {
  std::vector<FeatureEncoder> encoders;
  for (const auto& f : schema.features) {
    FeatureEncoder e;
    e.type = f.encoding;
    if (e.type == FeatureEncoding::onehot) {
      for (std::size_t c = 0; c < f.levels.size(); ++c) e.vocabulary.push_back(c);
    }
    encoders.push_back(std::move(e));
  }
  return Classifier(std::move(schema), std::move(encoders), std::move(weights),
                    std::move(intercepts));
}

bool Classifier::encode(const Instance& instance, Eigen::Ref<Eigen::VectorXd> out) const {
  if (instance.values.size() != encoders_.size())
    fail(ErrorCode::invalid_argument, "instance arity does not match schema");
  bool known = true;
  for (std::size_t f = 0; f < encoders_.size(); ++f) {
    const auto& e = encoders_[f];
    const double value = instance.values[f];
    if (e.type == FeatureEncoding::onehot) {
      auto block = out.segment(static_cast<Eigen::Index>(e.offset), static_cast<Eigen::Index>(e.width));
      block.setZero();
      const auto it = std::find(e.vocabulary.begin(), e.vocabulary.end(),
                                static_cast<std::size_t>(std::max(0.0, value)));
      if (value >= 0 && it != e.vocabulary.end()) {
        block(it - e.vocabulary.begin()) = 1.0;
      } else {
        known = false;
      }
    } else {
      out(static_cast<Eigen::Index>(e.offset)) = encode_scalar(e, value);
    }
  }
  return known;
}

Eigen::VectorXd Classifier::scores(const Instance& instance) const {
  Eigen::VectorXd x(weights_.cols());
  encode(instance, x);
  return weights_ * x + intercepts_;
}

Distribution Classifier::predict_proba(const Instance& instance) const {
  Eigen::VectorXd x(weights_.cols());
  Distribution out;
  out.unseen_category = !encode(instance, x);
  out.probs = softmax(weights_ * x + intercepts_);
  return out;
}

Eigen::VectorXd Classifier::feature_scores(std::size_t feature, double value) const {
  const auto& e = encoders_.at(feature);
  const auto offset = static_cast<Eigen::Index>(e.offset);
  if (e.type == FeatureEncoding::onehot) {
    const auto it = std::find(e.vocabulary.begin(), e.vocabulary.end(),
                              static_cast<std::size_t>(std::max(0.0, value)));
    if (value < 0 || it == e.vocabulary.end()) return Eigen::VectorXd::Zero(weights_.rows());
    return weights_.col(offset + (it - e.vocabulary.begin()));
  }
  return weights_.col(offset) * encode_scalar(e, value);
}

std::vector<FeatureEncoder> fit_encoders(const Dataset& data) {
  std::vector<FeatureEncoder> encoders;
  const double n = static_cast<double>(data.size());
  for (std::size_t f = 0; f < data.schema.size(); ++f) {
    FeatureEncoder e;
    e.type = data.schema.features[f].encoding;
    if (e.type == FeatureEncoding::onehot) {
      std::set<std::size_t> codes;
      for (const auto& row : data.rows) codes.insert(static_cast<std::size_t>(row.values[f]));
      e.vocabulary.assign(codes.begin(), codes.end());
    } else if (e.type == FeatureEncoding::standardize) {
      double sum = 0.0;
      for (const auto& row : data.rows) sum += row.values[f];
      e.center = sum / n;
      double ss = 0.0;
      for (const auto& row : data.rows) ss += (row.values[f] - e.center) * (row.values[f] - e.center);
      const double sd = std::sqrt(ss / n);
      e.scale = sd > 0.0 ? sd : 1.0;
    }
    encoders.push_back(std::move(e));
  }
  return layout(std::move(encoders));
}

Classifier train(const Dataset& data, const TrainingConfig& config) {
  if (data.rows.empty()) fail(ErrorCode::invalid_argument, "training data is empty");
  if (!(config.inverse_regularization > 0.0))
    fail(ErrorCode::invalid_argument, "inverse regularization must be positive");
  const auto counts = data.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
    fail(ErrorCode::invalid_argument, "training data is single-class");

  auto encoders = fit_encoders(data);
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto width = static_cast<Eigen::Index>(total_width(encoders));
  const auto classes = static_cast<Eigen::Index>(data.schema.class_count());

  // The shell classifier only supplies encoding.
  const Classifier shell(data.schema, encoders, Eigen::MatrixXd::Zero(classes, width),
                         Eigen::VectorXd::Zero(classes));
  Eigen::MatrixXd x(n, width + 1);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, classes);
  Eigen::VectorXd buffer(width);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    shell.encode(row, buffer);
    x.row(i).head(width) = buffer.transpose();
    x(i, width) = 1.0;
    y(i, static_cast<Eigen::Index>(row.label.value())) = 1.0;
  }

  Objective objective(std::move(x), std::move(y), config.inverse_regularization);
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(classes, width + 1);
  double loss = objective.value(theta);
  Eigen::MatrixXd grad = objective.gradient(theta);

  int iteration = 0;
  while (grad.norm() > config.tolerance) {
    if (iteration >= config.max_iterations) {
      fail(ErrorCode::runtime_failure,
           "newton-cg did not converge after " + std::to_string(iteration) +
               " iterations (gradient norm " + std::to_string(grad.norm()) + ")");
    }
    ++iteration;
    const Eigen::MatrixXd direction = newton_direction(objective, grad, config.max_cg_iterations);
    const double slope = dot(grad, direction);
    double step = 1.0;
    Eigen::MatrixXd candidate = theta + direction;
    double candidate_loss = objective.value(candidate);
    while (candidate_loss > loss + 1e-4 * step * slope && step > 1e-12) {
      step *= 0.5;
      candidate = theta + step * direction;
      candidate_loss = objective.value(candidate);
    }
    if (!(candidate_loss <= loss)) {
      // No descent possible at this precision; report at the caller's tolerance.
      objective.value(theta);
      break;
    }
    theta = std::move(candidate);
    loss = candidate_loss;
    grad = objective.gradient(theta);
  }
  const double gnorm = grad.norm();
  if (gnorm > config.tolerance) {
    fail(ErrorCode::runtime_failure, "newton-cg stalled after " + std::to_string(iteration) +
                                         " iterations (gradient norm " + std::to_string(gnorm) + ")");
  }

  TrainingMeta meta;
  meta.inverse_regularization = config.inverse_regularization;
  meta.tolerance = config.tolerance;
  meta.max_iterations = config.max_iterations;
  meta.iterations = iteration;
  meta.gradient_norm = gnorm;
  meta.train_rows = data.size();

  Classifier model(data.schema, std::move(encoders), theta.leftCols(width),
                   theta.col(width), meta);
  std::size_t correct = 0;
  for (const auto& row : data.rows) {
    if (model.predict_proba(row).prediction() == row.label) ++correct;
  }
  model.meta().train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return model;
}

Evaluation evaluate(const Classifier& model, const Dataset& test) {
  if (test.rows.empty()) fail(ErrorCode::invalid_argument, "evaluation data is empty");
  const auto classes = static_cast<Eigen::Index>(model.class_count());
  Evaluation out;
  out.rows = test.size();
  out.confusion = Eigen::MatrixXi::Zero(classes, classes);
  for (const auto& row : test.rows) {
    if (!row.label) fail(ErrorCode::invalid_argument, "evaluation row '" + row.id + "' is unlabeled");
    const auto pred = model.predict_proba(row).prediction();
    ++out.confusion(static_cast<Eigen::Index>(*row.label), static_cast<Eigen::Index>(pred));
  }
  out.accuracy = static_cast<double>(out.confusion.trace()) / static_cast<double>(out.rows);
  double recall_sum = 0.0;
  int present = 0;
  for (Eigen::Index c = 0; c < classes; ++c) {
    const double tp = out.confusion(c, c);
    const double actual = out.confusion.row(c).sum();
    const double predicted = out.confusion.col(c).sum();
    const double recall = actual > 0 ? tp / actual : 0.0;
    const double precision = predicted > 0 ? tp / predicted : 0.0;
    out.recall.push_back(recall);
    out.precision.push_back(precision);
    out.f1.push_back(precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0);
    if (actual > 0) {
      recall_sum += recall;
      ++present;
    }
  }
  out.balanced_accuracy = present > 0 ? recall_sum / present : 0.0;
  return out;
}

json classifier_to_json(const Classifier& model) {
  const auto& schema = model.schema();
  json doc;
  doc["format"] = "aact-classifier";
  doc["version"] = kModelFormatVersion;
  doc["schema"] = schema_to_json(schema);
  doc["encoders"] = json::array();
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& e = model.encoders()[f];
    json item{{"feature", schema.features[f].name}, {"type", to_string(e.type)}};
    if (e.type == FeatureEncoding::onehot) {
      std::vector<std::string> vocabulary;
      for (const auto code : e.vocabulary) vocabulary.push_back(schema.features[f].levels.at(code));
      item["vocabulary"] = vocabulary;
    }
    if (e.type == FeatureEncoding::standardize) {
      item["center"] = e.center;
      item["scale"] = e.scale;
    }
    doc["encoders"].push_back(std::move(item));
  }
  json weights = json::array();
  for (Eigen::Index c = 0; c < model.weights().rows(); ++c) {
    std::vector<double> row(model.weights().cols());
    for (Eigen::Index j = 0; j < model.weights().cols(); ++j) row[static_cast<std::size_t>(j)] = model.weights()(c, j);
    weights.push_back(row);
  }
  doc["weights"] = std::move(weights);
  doc["intercepts"] = std::vector<double>(model.intercepts().data(),
                                          model.intercepts().data() + model.intercepts().size());
  const auto& m = model.meta();
  doc["training_meta"] = {{"solver", m.solver},
                          {"inverse_regularization", m.inverse_regularization},
                          {"tolerance", m.tolerance},
                          {"max_iterations", m.max_iterations},
                          {"iterations", m.iterations},
                          {"gradient_norm", m.gradient_norm},
                          {"train_accuracy", m.train_accuracy},
                          {"train_rows", m.train_rows},
                          {"split_seed", m.split_seed},
                          {"split_ratio", m.split_ratio},
                          {"stratified", m.stratified}};
  return doc;
}

Classifier classifier_from_json(const json& doc) {
  if (field_as<std::string>(doc, "format") != "aact-classifier")
    fail(ErrorCode::parse_error, "model file: invalid field 'format'");
  const int version = field_as<int>(doc, "version");
  if (version != kModelFormatVersion)
    fail(ErrorCode::parse_error, "model file: unsupported format version " + std::to_string(version) +
                                     " (expected " + std::to_string(kModelFormatVersion) + ")");
  FeatureSchema schema = schema_from_json(field(doc, "schema"));
  for (auto& f : schema.features) f.levels_fixed = f.kind == FeatureKind::categorical;

  const json& enc = field(doc, "encoders");
  if (!enc.is_array() || enc.size() != schema.size())
    fail(ErrorCode::parse_error, "model file: invalid field 'encoders'");
  std::vector<FeatureEncoder> encoders;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    FeatureEncoder e;
    e.type = schema.features[f].encoding;
    if (field_as<std::string>(enc[f], "type") != to_string(e.type))
      fail(ErrorCode::parse_error, "model file: invalid field 'type' for feature " + schema.features[f].name);
    if (e.type == FeatureEncoding::onehot) {
      for (const auto& level : field_as<std::vector<std::string>>(enc[f], "vocabulary")) {
        const auto& levels = schema.features[f].levels;
        const auto it = std::find(levels.begin(), levels.end(), level);
        if (it == levels.end()) fail(ErrorCode::parse_error, "model file: invalid field 'vocabulary'");
        e.vocabulary.push_back(static_cast<std::size_t>(it - levels.begin()));
      }
    }
    if (e.type == FeatureEncoding::standardize) {
      e.center = field_as<double>(enc[f], "center");
      e.scale = field_as<double>(enc[f], "scale");
    }
    encoders.push_back(std::move(e));
  }

  const auto rows = field_as<std::vector<std::vector<double>>>(doc, "weights");
  const auto bias = field_as<std::vector<double>>(doc, "intercepts");
  const auto width = rows.empty() ? 0 : rows.front().size();
  Eigen::MatrixXd weights(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (rows[c].size() != width) fail(ErrorCode::parse_error, "model file: invalid field 'weights'");
    for (std::size_t j = 0; j < width; ++j) weights(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(j)) = rows[c][j];
  }
  Eigen::VectorXd intercepts = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));

  TrainingMeta meta;
  const json& m = field(doc, "training_meta");
  meta.solver = field_as<std::string>(m, "solver");
  meta.inverse_regularization = field_as<double>(m, "inverse_regularization");
  meta.tolerance = field_as<double>(m, "tolerance");
  meta.max_iterations = field_as<int>(m, "max_iterations");
  meta.iterations = field_as<int>(m, "iterations");
  meta.gradient_norm = field_as<double>(m, "gradient_norm");
  meta.train_accuracy = field_as<double>(m, "train_accuracy");
  meta.train_rows = field_as<std::size_t>(m, "train_rows");
  meta.split_seed = field_as<std::uint32_t>(m, "split_seed");
  meta.split_ratio = field_as<double>(m, "split_ratio");
  meta.stratified = field_as<bool>(m, "stratified");

  try {
    return Classifier(std::move(schema), std::move(encoders), std::move(weights),
                      std::move(intercepts), meta);
  } catch (const Error& e) {
    fail(ErrorCode::parse_error, std::string("model file: invalid field 'weights': ") + e.what());
  }
}

void save(const Classifier& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write model file " + path.string());
  out << classifier_to_json(model).dump(2) << '\n';
}

Classifier load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open model file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, "model file " + path.string() + ": " + e.what());
  }
  return classifier_from_json(doc);
}

}  // namespace aact
