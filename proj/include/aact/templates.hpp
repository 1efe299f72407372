#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace aact {

using Slots = std::map<std::string, std::string, std::less<>>;

/// Whole percentage points of a probability change, rounded half away from
/// zero: 0.12 -> 12, -0.085 -> -9.
long long percentage_points(double delta);
/// "+12 percentage points", "-9 percentage points", "0 percentage points".
std::string signed_points(double delta);
/// Probability as a whole percent, rounded half away from zero.
long long percent(double probability);

/// Fixed sentence templates keyed by id. Rendering is pure substitution.
class TemplateCatalog {
 public:
  static TemplateCatalog parse(std::string_view text);
  static TemplateCatalog load(const std::filesystem::path& path);
  /// Catalog compiled in from resources/templates.txt.
  static const TemplateCatalog& builtin();

  bool contains(std::string_view id) const;

  /// Substitutes every {slot}. When the id has .pos/.neg variants the
  /// numeric "delta" slot picks one and "delta_pp" is derived from it.
  /// Throws invalid_argument naming the first missing slot.
  std::string render(std::string_view id, const Slots& slots) const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

inline std::string render_template(std::string_view id, const Slots& slots) {
  return TemplateCatalog::builtin().render(id, slots);
}

}  // namespace aact
