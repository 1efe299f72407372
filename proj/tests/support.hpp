#pragma once

// Shared fixtures and independent oracles for the test binaries.

#include "aact/counterfactual.hpp"
#include "aact/dataset.hpp"
#include "aact/model.hpp"
#include "aact/workflow.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace aact::testing {

inline std::filesystem::path data_dir() { return AACT_DATA_DIR; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// n integer features x1..xn taking 0/1.
inline FeatureSchema binary_schema(std::size_t n, std::vector<std::string> classes = {"A", "B"}) {
  FeatureSchema schema;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureSpec f;
    f.name = "x" + std::to_string(i + 1);
    f.label = "feature " + std::to_string(i + 1);
    f.kind = FeatureKind::integer;
    f.encoding = FeatureEncoding::raw;
    schema.features.push_back(f);
  }
  schema.classes = std::move(classes);
  return schema;
}

/// Every 0/1 combination once; labels cycle through the classes.
inline Dataset factorial(const FeatureSchema& schema, std::size_t copies = 1) {
  Dataset d{schema, {}};
  const std::size_t n = schema.size();
  for (std::size_t c = 0; c < copies; ++c) {
    for (std::size_t bits = 0; bits < (std::size_t{1} << n); ++bits) {
      Instance row;
      row.id = "r" + std::to_string(c) + "_" + std::to_string(bits);
      for (std::size_t i = 0; i < n; ++i) row.values.push_back(static_cast<double>((bits >> i) & 1));
      row.label = (bits + c) % schema.class_count();
      d.rows.push_back(row);
    }
  }
  return d;
}

inline Instance task_of(std::string id, std::vector<double> values) {
  Instance t;
  t.id = std::move(id);
  t.values = std::move(values);
  return t;
}

/// Plain-loop softmax of W x + b.
inline std::vector<double> oracle_proba(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                        const std::vector<double>& x) {
  std::vector<double> s(static_cast<std::size_t>(W.rows()));
  double top = -1e300;
  for (Eigen::Index c = 0; c < W.rows(); ++c) {
    double v = b(c);
    for (Eigen::Index j = 0; j < W.cols(); ++j) v += W(c, j) * x[static_cast<std::size_t>(j)];
    s[static_cast<std::size_t>(c)] = v;
    top = std::max(top, v);
  }
  double z = 0.0;
  for (auto& v : s) z += (v = std::exp(v - top));
  for (auto& v : s) v /= z;
  return s;
}

/// Exact marginal over the empirical background: average over every
/// background row with the argument features taken from the task.
inline std::vector<double> oracle_marginal(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                           const std::vector<Instance>& background, const Instance& task,
                                           const std::vector<std::size_t>& argument) {
  std::vector<double> acc(static_cast<std::size_t>(W.rows()), 0.0);
  for (const auto& row : background) {
    std::vector<double> x = row.values;
    for (const auto f : argument) x[f] = task.values[f];
    const auto p = oracle_proba(W, b, x);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += p[c];
  }
  for (auto& v : acc) v /= static_cast<double>(background.size());
  return acc;
}

/// Exact marginal evaluated for each background row by the model itself;
/// used where encodings are not plain linear.
inline std::vector<double> model_marginal(const Classifier& model, const std::vector<Instance>& background,
                                          const Instance& task, const std::vector<std::size_t>& argument) {
  std::vector<double> acc(model.class_count(), 0.0);
  for (const auto& row : background) {
    Instance x = row;
    for (const auto f : argument) x.values[f] = task.values[f];
    const auto p = model.predict_proba(x).probs;
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += p(static_cast<Eigen::Index>(c));
  }
  for (auto& v : acc) v /= static_cast<double>(background.size());
  return acc;
}

/// Ames data, reference split and trained model, built once per binary.
struct AmesFixture {
  Dataset data;
  Split parts;
  std::shared_ptr<const Engine> engine;

  const Classifier& model() const { return engine->model(); }
};

inline const AmesFixture& ames() {
  static const AmesFixture fixture = [] {
    AmesFixture f;
    f.data = load_dataset(data_dir() / "ames.csv", load_schema(data_dir() / "ames_schema.json"));
    f.parts = split(f.data, 0.8, 0);
    Classifier model = train(f.parts.train);
    f.engine = std::make_shared<const Engine>(std::move(model), f.parts.train);
    return f;
  }();
  return fixture;
}

/// Transcript checker: returns one line per broken workflow invariant.
inline std::vector<std::string> transcript_violations(const std::vector<TranscriptEvent>& events, std::size_t k) {
  using nlohmann::json;
  std::vector<std::string> bad;
  const auto report = [&](std::size_t seq, const std::string& what) {
    bad.push_back("seq " + std::to_string(seq) + ": " + what);
  };
  const std::vector<std::string> order = {"agreement", "incompleteness", "unreliability", "conflict"};
  const auto list_key = [](const std::string& stage) -> std::string {
    if (stage == "conflict") return "conflicts";
    return stage;
  };

  if (events.empty() || events.front().kind != "session_started") {
    bad.push_back("transcript does not open with session_started");
    return bad;
  }
  const std::string mode = events.front().payload.at("mode");

  json critique;
  int last_stage = -1;
  std::string current_stage;
  std::set<std::string> visited;
  std::map<std::string, int> updates_per_stage;
  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> steps;
  std::size_t conflict_items = 0;
  std::size_t submissions = 0, flags_seen = 0;
  bool skipped = false, finished = false;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.seq != i) report(e.seq, "sequence numbers are not contiguous");
    if (finished) report(e.seq, "event after final");
    const json& p = e.payload;
    if (e.kind == "critique") {
      critique = p;
      for (const auto& key : {"agreement", "incompleteness", "unreliability", "conflicts"}) flags_seen += p.at(key).size();
      const double eps = events.front().payload.at("params").at("epsilon");
      for (const auto& f : p.at("incompleteness")) {
        const double d = f.at("delta");
        const std::string kind = f.at("kind");
        if (!((kind == "missing_supporting" && d > eps) || (kind == "missing_opposing" && d < -eps)))
          report(e.seq, "incompleteness flag breaks its inequality");
      }
      for (const auto& f : p.at("unreliability")) {
        if (!(f.at("kind") == "unreliable" && f.at("delta").get<double>() > eps))
          report(e.seq, "unreliability flag breaks its inequality");
      }
      if (p.at("conflicts").size() > k) report(e.seq, "more than k conflicts");
    } else if (e.kind == "stage_entered") {
      const std::string stage = p.at("stage");
      if (stage == "assist") {
        if (mode == "aact" || mode == "human_only") report(e.seq, "assist stage in mode " + mode);
      } else {
        const int idx = static_cast<int>(std::find(order.begin(), order.end(), stage) - order.begin());
        if (idx <= last_stage) report(e.seq, "stage " + stage + " out of order");
        last_stage = idx;
        if (critique.is_null() || critique.at(list_key(stage)).empty())
          report(e.seq, "entered stage " + stage + " with an empty list");
      }
      if (visited.count(stage)) report(e.seq, "stage " + stage + " revisited");
      visited.insert(stage);
      current_stage = stage;
    } else if (e.kind == "stage_skipped") {
      const std::string stage = p.at("stage");
      if (stage != "all") {
        const int idx = static_cast<int>(std::find(order.begin(), order.end(), stage) - order.begin());
        if (idx <= last_stage) report(e.seq, "skipped stage " + stage + " out of order");
        last_stage = idx;
        const bool disabled = p.at("reason") == "disabled";
        if (!disabled && !critique.at(list_key(stage)).empty())
          report(e.seq, "skipped non-empty stage " + stage);
        visited.insert(stage);
      } else {
        for (const auto& s : order) {
          if (!critique.at(list_key(s)).empty() && !(s == "agreement" && !events.front().payload.at("params").at("include_agreement")))
            report(e.seq, "no-issue notice with a non-empty " + s + " list");
        }
      }
    } else if (e.kind == "message") {
      if (p.at("template_id") == "T-SKIP") continue;
      const std::string stage = p.at("stage");
      const std::string step = p.at("step");
      const std::size_t item = p.at("item");
      const json& body = p.at("payload");
      if (stage == "incompleteness" || stage == "unreliability" || stage == "conflict") {
        if (step == "reflect" || step == "suggest" || step == "triangulate") steps[{stage, item}].push_back(step);
        if (stage == "conflict" && step == "reflect") conflict_items = std::max(conflict_items, item + 1);
        if (stage != "conflict" && step != "update_prompt") {
          const std::string feature = body.at("feature");
          bool listed = false;
          for (const auto& f : critique.at(stage)) {
            if (f.at("feature") == feature) {
              listed = true;
              if (step == "suggest" && f.at("delta") != body.at("delta"))
                report(e.seq, "suggest delta differs from the critique");
            }
          }
          if (!listed) report(e.seq, "message about unlisted feature " + feature);
          for (const auto& f : critique.at("irrelevant")) {
            if (f.at("feature") == feature) report(e.seq, "message references irrelevant feature " + feature);
          }
        }
      }
    } else if (e.kind == "reflection" || e.kind == "update" || e.kind == "initial" || e.kind == "skip") {
      ++submissions;
      if (e.kind == "update") ++updates_per_stage[current_stage];
      if (e.kind == "skip") skipped = true;
    } else if (e.kind == "final") {
      finished = true;
    }
  }

  if (!finished) bad.push_back("session never reached final");
  if (conflict_items > k) bad.push_back("more than k conflict items prompted");
  for (const auto& [key, seq] : steps) {
    const std::vector<std::string> full = {"reflect", "suggest", "triangulate"};
    const bool prefix = seq.size() <= 3 && std::equal(seq.begin(), seq.end(), full.begin());
    if (!prefix || (seq.size() != 3 && !skipped))
      bad.push_back("item " + key.first + "#" + std::to_string(key.second) + " step order broken");
  }
  for (const auto& stage : visited) {
    const bool entered = std::any_of(events.begin(), events.end(), [&](const TranscriptEvent& e) {
      return e.kind == "stage_entered" && e.payload.at("stage") == stage;
    });
    if (!entered) continue;
    const int n = updates_per_stage.count(stage) ? updates_per_stage.at(stage) : 0;
    if (n > 1 || (n == 0 && !skipped)) bad.push_back("stage " + stage + " has " + std::to_string(n) + " update prompts");
  }
  if (submissions > 1 + 3 * flags_seen + 4 + (skipped ? 1 : 0)) bad.push_back("submission count over bound");
  return bad;
}

}  // namespace aact::testing
