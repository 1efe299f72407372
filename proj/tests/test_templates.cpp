#include "aact/error.hpp"
#include "aact/templates.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sstream>

namespace aact {
namespace {

TEST(Templates, GoldenFile) {
  std::istringstream in(testing::read_file(std::filesystem::path(AACT_TEST_DIR) / "golden" / "templates.jsonl"));
  std::string line;
  int cases = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto doc = nlohmann::json::parse(line);
    Slots slots;
    for (const auto& [k, v] : doc.at("slots").items()) slots[k] = v.get<std::string>();
    EXPECT_EQ(render_template(doc.at("id").get<std::string>(), slots), doc.at("text").get<std::string>());
    ++cases;
  }
  EXPECT_EQ(cases, 8);
}

TEST(Templates, MissingSlotIsNamed) {
  try {
    render_template("T-INC-REFLECT", {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    EXPECT_NE(std::string(e.what()).find("feature"), std::string::npos);
  }
  EXPECT_THROW(render_template("T-NOPE", {}), Error);
}

TEST(Templates, PointsRounding) {
  EXPECT_EQ(percentage_points(0.12), 12);
  EXPECT_EQ(percentage_points(-0.085), -9);
  EXPECT_EQ(percentage_points(0.125), 13);
  EXPECT_EQ(percentage_points(0.004), 0);
  EXPECT_EQ(signed_points(0.12), "+12 percentage points");
  EXPECT_EQ(signed_points(-0.3), "-30 percentage points");
  EXPECT_EQ(signed_points(0.0), "0 percentage points");
  EXPECT_EQ(percent(0.5112), 51);
}

TEST(Templates, CatalogFromText) {
  const auto catalog = TemplateCatalog::parse("# comment\nA = hello {who}\nB.pos = up {delta_pp}\nB.neg = down {delta_pp}\n");
  EXPECT_EQ(catalog.render("A", {{"who", "you"}}), "hello you");
  EXPECT_EQ(catalog.render("B", {{"delta", "-0.2"}}), "down 20");
  EXPECT_TRUE(catalog.contains("B"));
  EXPECT_FALSE(catalog.contains("C"));
}

TEST(Templates, EmbeddedCatalogMatchesResource) {
  const auto file = TemplateCatalog::load(std::filesystem::path(AACT_TEST_DIR) / ".." / "resources" / "templates.txt");
  for (const char* id : {"T-INC-REFLECT", "T-UNR-REFLECT", "T-CONF-REFLECT", "T-UPDATE", "T-NO-ISSUES"}) {
    const Slots slots{{"feature", "f"}, {"alt", "a"}, {"features", "g"}};
    EXPECT_EQ(file.render(id, slots), render_template(id, slots));
  }
}

}  // namespace
}  // namespace aact
