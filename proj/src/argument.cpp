#include "aact/argument.hpp"

#include "aact/dataset.hpp"
#include "aact/error.hpp"

#include <algorithm>

namespace aact {

Argument::Argument(std::vector<std::size_t> features) : features_(std::move(features)) {
  std::sort(features_.begin(), features_.end());
  if (std::adjacent_find(features_.begin(), features_.end()) != features_.end())
    fail(ErrorCode::invalid_argument, "argument lists a feature twice");
}

Argument Argument::all(std::size_t feature_count) {
  std::vector<std::size_t> idx(feature_count);
  for (std::size_t i = 0; i < feature_count; ++i) idx[i] = i;
  return Argument(std::move(idx));
}

Argument Argument::from_names(const FeatureSchema& schema, std::span<const std::string> names) {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& name : names) idx.push_back(schema.index_of(name));
  return Argument(std::move(idx));
}

bool Argument::contains(std::size_t feature) const {
  return std::binary_search(features_.begin(), features_.end(), feature);
}

Argument Argument::with(std::size_t feature) const {
  if (contains(feature)) fail(ErrorCode::invalid_argument, "feature already in argument");
  auto next = features_;
  next.insert(std::lower_bound(next.begin(), next.end(), feature), feature);
  Argument out;
  out.features_ = std::move(next);
  return out;
}

Argument Argument::without(std::size_t feature) const {
  if (!contains(feature)) fail(ErrorCode::invalid_argument, "feature not in argument");
  Argument out;
  out.features_.reserve(features_.size() - 1);
  for (const auto f : features_) {
    if (f != feature) out.features_.push_back(f);
  }
  return out;
}

std::vector<std::string> Argument::names(const FeatureSchema& schema) const {
  std::vector<std::string> out;
  out.reserve(features_.size());
  for (const auto f : features_) out.push_back(schema.features.at(f).name);
  return out;
}

std::string Argument::describe(const FeatureSchema& schema) const {
  std::string out;
  for (const auto f : features_) {
    if (!out.empty()) out += ", ";
    out += schema.features.at(f).label;
  }
  return out;
}

}  // namespace aact
