#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace aact {

class FeatureSchema;

/// A subset of one task's feature assignments. Only feature indices are
/// stored; values always come from the source instance, so an argument can
/// never carry a hypothetical value.
class Argument {
 public:
  Argument() = default;
  /// Throws on duplicate indices.
  explicit Argument(std::vector<std::size_t> features);

  static Argument all(std::size_t feature_count);
  /// Resolves names against the schema; unknown or repeated names throw.
  static Argument from_names(const FeatureSchema& schema,
                             std::span<const std::string> names);

  bool contains(std::size_t feature) const;
  Argument with(std::size_t feature) const;
  Argument without(std::size_t feature) const;

  std::size_t size() const noexcept { return features_.size(); }
  bool empty() const noexcept { return features_.empty(); }
  const std::vector<std::size_t>& features() const noexcept { return features_; }
  auto begin() const noexcept { return features_.begin(); }
  auto end() const noexcept { return features_.end(); }

  std::vector<std::string> names(const FeatureSchema& schema) const;
  /// Human-readable labels joined with ", ".
  std::string describe(const FeatureSchema& schema) const;

  friend bool operator==(const Argument&, const Argument&) = default;
  friend auto operator<=>(const Argument&, const Argument&) = default;

 private:
  std::vector<std::size_t> features_;  // sorted, unique
};

}  // namespace aact
