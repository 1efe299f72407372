#pragma once

#include "aact/argument.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aact {

enum class FeatureKind { categorical, integer, continuous };

/// How the classifier turns a raw value into model inputs.
enum class FeatureEncoding { onehot, ordinal, raw, standardize };

struct FeatureSpec {
  std::string name;
  std::string label;  // display text used in dialogue messages
  FeatureKind kind = FeatureKind::continuous;
  FeatureEncoding encoding = FeatureEncoding::raw;
  // Categorical vocabulary; a value is stored as its index in this list.
  std::vector<std::string> levels;
  // Declared vocabularies reject unseen values at load time.
  bool levels_fixed = false;
  // Continuous only: quantile bin count used when edges are not declared,
  // and the interior cut points once fitted (strictly increasing).
  std::size_t bin_count = 5;
  std::vector<double> bin_edges;
};

class FeatureSchema {
 public:
  std::vector<FeatureSpec> features;
  std::vector<std::string> classes;
  std::string id_column = "id";
  std::string label_column = "label";

  std::size_t size() const noexcept { return features.size(); }
  std::size_t class_count() const noexcept { return classes.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws not_found for an unknown feature name.
  std::size_t index_of(std::string_view name) const;
  /// Throws not_found for an unknown class label.
  std::size_t class_index(std::string_view label) const;

  /// Checks unique names, at least two classes and increasing bin edges.
  void validate() const;
  /// True once every continuous feature carries bin edges.
  bool finalized() const;

  /// Bin membership for matching; non-continuous features match exactly and
  /// this returns the value's integer code.
  std::int64_t bin_of(std::size_t feature, double value) const;

  /// Parses one cell. New categorical levels are appended unless the
  /// vocabulary is fixed. Throws parse_error on failure.
  double parse_value(std::size_t feature, std::string_view text);
  std::string format_value(std::size_t feature, double value) const;
};

struct Instance {
  std::string id;
  std::vector<double> values;
  std::optional<std::size_t> label;  // class index
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Instance> rows;

  std::size_t size() const noexcept { return rows.size(); }
  std::vector<std::size_t> class_counts() const;
  const Instance* find(std::string_view id) const;
};

/// Data-derived probability. Absent when fewer than min_support rows match.
struct EmpiricalEstimate {
  std::optional<double> probability;
  std::size_t support = 0;

  bool available() const noexcept { return probability.has_value(); }
};

enum class SamplingMode { independent, conditional, exhaustive };

struct Split {
  Dataset train;
  Dataset test;
};

FeatureSchema schema_from_json(const nlohmann::json& config);
nlohmann::json schema_to_json(const FeatureSchema& schema);
FeatureSchema load_schema(const std::filesystem::path& path);

/// Reads a CSV whose header lists the id column (optional), every schema
/// feature and the label column. Rows that fail to parse are reported
/// together with their line numbers.
Dataset load_dataset(const std::filesystem::path& path, FeatureSchema schema);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Low below 100000, High above 200000, Medium otherwise (both bounds
/// inclusive).
std::string_view discretize_price(double price);

/// Converts the raw Ames extract (sale price, year built, year sold, ...)
/// into the modelling table: age when sold and the price class are derived.
void prepare_ames(const std::filesystem::path& raw_csv,
                  const std::filesystem::path& out_csv);

/// Shuffled partition. The permutation is numpy's RandomState(seed)
/// permutation; the first n - round(ratio * n) positions form the test
/// part. Continuous features without declared edges get quantile bins
/// fitted on the train part, and both parts share that schema.
Split split(const Dataset& dataset, double ratio, std::uint32_t seed,
            bool stratify = false);

/// Equal-frequency cut points over the given values; duplicates collapse.
std::vector<double> quantile_edges(std::vector<double> values,
                                   std::size_t bins);

bool matches(const FeatureSchema& schema, const Instance& row,
             const Instance& source, const Argument& argument);

EmpiricalEstimate empirical_confidence(const Dataset& train,
                                       std::size_t decision,
                                       const Instance& source,
                                       const Argument& argument,
                                       std::size_t min_support);

/// Row indices of the background draw. Independent mode draws from all of
/// train, conditional mode only from rows matching the argument (throws
/// not_found when none match), exhaustive mode returns every row once.
std::vector<std::size_t> sample_rows(const Dataset& train,
                                     const Instance& source,
                                     const Argument& argument,
                                     std::size_t count, std::uint64_t seed,
                                     SamplingMode mode);

/// Non-argument slices of the sampled rows, in feature order.
std::vector<std::vector<double>> sample_background(
    const Dataset& train, const Instance& source, const Argument& argument,
    std::size_t count, std::uint64_t seed, SamplingMode mode);

std::string_view to_string(FeatureKind kind);
std::string_view to_string(FeatureEncoding encoding);
std::string_view to_string(SamplingMode mode);
SamplingMode sampling_mode_from_string(std::string_view text);

}  // namespace aact
