#include "aact/templates.hpp"

#include "aact/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aact {
namespace detail {
extern const std::string_view kEmbeddedTemplates;
}  // namespace detail

long long percentage_points(double delta) { return std::llround(delta * 100.0); }

std::string signed_points(double delta) {
  const long long pp = percentage_points(delta);
  return (pp > 0 ? "+" : "") + std::to_string(pp) + " percentage points";
}

long long percent(double probability) { return std::llround(probability * 100.0); }

TemplateCatalog TemplateCatalog::parse(std::string_view text) {
  TemplateCatalog catalog;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      fail(ErrorCode::parse_error, "template catalog line " + std::to_string(line_no) + ": expected '<id> = <text>'");
    std::string id = line.substr(first, eq - first);
    if (!catalog.templates_.emplace(std::move(id), line.substr(eq + 3)).second)
      fail(ErrorCode::parse_error, "template catalog line " + std::to_string(line_no) + ": duplicate id");
  }
  return catalog;
}

TemplateCatalog TemplateCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open template catalog " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

const TemplateCatalog& TemplateCatalog::builtin() {
  static const TemplateCatalog catalog = parse(detail::kEmbeddedTemplates);
  return catalog;
}

bool TemplateCatalog::contains(std::string_view id) const {
  return templates_.contains(id) || templates_.contains(std::string(id) + ".pos");
}

std::string TemplateCatalog::render(std::string_view id, const Slots& slots) const {
  Slots filled = slots;
  std::string key(id);
  if (!templates_.contains(key) && templates_.contains(key + ".pos")) {
    const auto delta_it = slots.find("delta");
    if (delta_it == slots.end())
      fail(ErrorCode::invalid_argument, "template " + key + ": missing slot 'delta'");
    double delta = 0.0;
    const auto& text = delta_it->second;
    const auto [ptr, ec] = std::from_chars(text.data() + (text.starts_with('+') ? 1 : 0),
                                           text.data() + text.size(), delta);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      fail(ErrorCode::invalid_argument, "template " + key + ": slot 'delta' is not a number");
    key += delta < 0 ? ".neg" : ".pos";
    filled.try_emplace("delta_pp", std::to_string(std::llabs(percentage_points(delta))));
  }
  const auto it = templates_.find(key);
  if (it == templates_.end()) fail(ErrorCode::not_found, "unknown template '" + std::string(id) + "'");

  const std::string& pattern = it->second;
  std::string out;
  out.reserve(pattern.size() + 32);
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern[i] != '{') {
      out.push_back(pattern[i++]);
      continue;
    }
    const auto close = pattern.find('}', i);
    if (close == std::string::npos) fail(ErrorCode::parse_error, "template " + key + ": unterminated slot");
    const std::string_view name(pattern.data() + i + 1, close - i - 1);
    const auto slot = filled.find(name);
    if (slot == filled.end())
      fail(ErrorCode::invalid_argument, "template " + key + ": missing slot '" + std::string(name) + "'");
    out += slot->second;
    i = close + 1;
  }
  return out;
}

}  // namespace aact
