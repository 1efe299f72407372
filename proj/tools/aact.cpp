// aact: command line front end (prepare, train, evaluate, analyze, serve,
// simulate, score).

#include "aact/counterfactual.hpp"
#include "aact/dataset.hpp"
#include "aact/error.hpp"
#include "aact/metrics.hpp"
#include "aact/model.hpp"
#include "aact/serialize.hpp"
#include "aact/service.hpp"
#include "aact/simulate.hpp"
#include "aact/workflow.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aact;

namespace {

enum class Format { json, csv, md };

struct EngineFlags {
  std::string params_file;
  std::optional<double> epsilon, mu;
  std::optional<std::size_t> k, samples, min_support;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> sampling, argument_search, conflict_scoring;
  bool no_agreement = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--params", params_file, "JSON file with engine parameters");
    cmd->add_option("--epsilon", epsilon, "substantial change threshold");
    cmd->add_option("--k", k, "conflicts shown");
    cmd->add_option("-L,--samples", samples, "Monte Carlo draws");
    cmd->add_option("--engine-seed", seed, "base sampling seed");
    cmd->add_option("--mu", mu, "importance cutoff for strongest arguments");
    cmd->add_option("--min-support", min_support, "rows needed for a data estimate");
    cmd->add_option("--sampling", sampling, "independent|conditional|exhaustive");
    cmd->add_option("--argument-search", argument_search, "importance|exact");
    cmd->add_option("--conflict-scoring", conflict_scoring, "argument|full_instance");
    cmd->add_flag("--no-agreement", no_agreement, "skip the agreement stage");
  }

  // flags > file > defaults
  EngineParams resolve(EngineParams base = {}) const {
    EngineParams p = base;
    if (!params_file.empty()) {
      std::ifstream in(params_file);
      if (!in) fail(ErrorCode::io_error, "cannot open " + params_file);
      try {
        p = params_from_json(json::parse(in), p);
      } catch (const json::exception& e) {
        fail(ErrorCode::parse_error, params_file + ": " + e.what());
      }
    }
    json o = json::object();
    if (epsilon) o["epsilon"] = *epsilon;
    if (mu) o["mu"] = *mu;
    if (k) o["k"] = *k;
    if (samples) o["L"] = *samples;
    if (min_support) o["min_support"] = *min_support;
    if (seed) o["seed"] = *seed;
    if (sampling) o["sampling_mode"] = *sampling;
    if (argument_search) o["argument_search"] = *argument_search;
    if (conflict_scoring) o["conflict_scoring"] = *conflict_scoring;
    if (no_agreement) o["include_agreement"] = false;
    return params_from_json(o, p);
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string opt_fmt(const Fraction& f) {
  const auto v = f.value();
  return v ? fmt(*v) : "NA";
}

void header(std::string_view cmd, const EngineParams& p, const std::string& extra = {}) {
  std::cout << "# aact " << cmd << " epsilon=" << shortest(p.epsilon) << " k=" << p.k << " L=" << p.samples
            << " seed=" << p.seed;
  if (!extra.empty()) std::cout << ' ' << extra;
  std::cout << '\n';
}

fs::path env_or(const std::string& flag, const char* env) {
  if (!flag.empty()) return flag;
  if (const char* v = std::getenv(env)) return v;
  return {};
}

fs::path require(fs::path p, const char* what) {
  if (p.empty()) fail(ErrorCode::invalid_argument, std::string("missing required path: ") + what);
  return p;
}

Format parse_format(const std::string& text) {
  if (text == "json") return Format::json;
  if (text == "csv") return Format::csv;
  if (text == "md") return Format::md;
  fail(ErrorCode::invalid_argument, "unknown format " + text);
}

void print_evaluation(const FeatureSchema& schema, const Evaluation& ev, Format format, json extra) {
  if (format == Format::json) {
    json doc = evaluation_json(schema, ev);
    for (auto& [k, v] : extra.items()) doc[k] = v;
    std::cout << doc.dump(2) << '\n';
    return;
  }
  if (format == Format::csv) {
    std::cout << "metric,value\naccuracy," << fmt(ev.accuracy) << "\nbalanced_accuracy," << fmt(ev.balanced_accuracy)
              << '\n';
    for (std::size_t c = 0; c < ev.f1.size(); ++c) std::cout << "f1_" << schema.classes[c] << ',' << fmt(ev.f1[c]) << '\n';
    return;
  }
  std::cout << "| metric | value |\n|---|---|\n| accuracy | " << fmt(ev.accuracy) << " |\n| balanced accuracy | "
            << fmt(ev.balanced_accuracy) << " |\n";
  for (std::size_t c = 0; c < ev.f1.size(); ++c)
    std::cout << "| F1 " << schema.classes[c] << " | " << fmt(ev.f1[c]) << " |\n";
}

int cmd_prepare(const std::string& raw, const std::string& out) {
  prepare_ames(raw, out);
  std::cout << "wrote " << out << '\n';
  return 0;
}

struct TrainFlags {
  std::string data, schema, out, format = "md";
  double ratio = 0.8;
  std::uint32_t seed = 0;
  bool stratify = false;
};

int cmd_train(const TrainFlags& f) {
  const Format format = parse_format(f.format);
  const fs::path data = require(env_or(f.data, "AACT_DATA"), "--data");
  fs::path schema_path = f.schema;
  if (schema_path.empty()) schema_path = data.parent_path() / (data.stem().string() + "_schema.json");
  const Dataset dataset = load_dataset(data, load_schema(schema_path));
  const Split parts = split(dataset, f.ratio, f.seed, f.stratify);

  header("train", EngineParams{}, "split_seed=" + std::to_string(f.seed) + " split=" + shortest(f.ratio));
  const auto start = std::chrono::steady_clock::now();
  Classifier model = train(parts.train);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  model.meta().split_seed = f.seed;
  model.meta().split_ratio = f.ratio;
  model.meta().stratified = f.stratify;
  if (!f.out.empty()) save(model, f.out);

  const Evaluation ev = evaluate(model, parts.test);
  print_evaluation(model.schema(), ev, format,
                   {{"train_rows", parts.train.size()},
                    {"iterations", model.meta().iterations},
                    {"train_seconds", seconds}});
  if (format == Format::md)
    std::cout << "\ntrain rows " << parts.train.size() << ", test rows " << parts.test.size() << ", "
              << model.meta().iterations << " iterations, " << fmt(seconds, 3) << " s\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path, const std::string& format_text) {
  const Format format = parse_format(format_text);
  const Deployment d = load_deployment(require(env_or(model_path, "AACT_MODEL"), "--model"),
                                       require(env_or(data_path, "AACT_DATA"), "--data"));
  Dataset test{d.engine->schema(), d.tasks};
  const auto& meta = d.engine->model().meta();
  header("evaluate", EngineParams{}, "split_seed=" + std::to_string(meta.split_seed));
  print_evaluation(test.schema, evaluate(d.engine->model(), test), format, json::object());
  return 0;
}

int cmd_analyze(const std::string& model_path, const std::string& data_path, const std::string& records,
                const std::string& out_path, bool exact_oracle, const EngineFlags& ef) {
  EngineParams params = ef.resolve();
  if (exact_oracle) params.argument_search = ArgumentSearch::exact;
  const Deployment d = load_deployment(require(env_or(model_path, "AACT_MODEL"), "--model"),
                                       require(env_or(data_path, "AACT_DATA"), "--data"));
  const Engine& engine = *d.engine;
  const auto& schema = engine.schema();
  std::ifstream in(require(records, "--records"));
  if (!in) fail(ErrorCode::io_error, "cannot open " + records);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) fail(ErrorCode::io_error, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  header("analyze", params);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::parse_error, records + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto id = rec.at("task_id").get<std::string>();
    const Instance* task = nullptr;
    for (const auto& t : d.tasks) {
      if (t.id == id) task = &t;
    }
    if (!task) task = engine.train().find(id);
    if (!task) fail(ErrorCode::not_found, records + ":" + std::to_string(line_no) + ": unknown task " + id);
    const auto decision = schema.class_index(rec.at("decision").get<std::string>());
    const auto names = rec.at("argument").get<std::vector<std::string>>();
    const Critique critique = identify_issues(engine, *task, decision, Argument::from_names(schema, names), params);
    json doc = critique_json(schema, *task, critique);
    if (exact_oracle) {
      json oracle = json::array();
      for (std::size_t c = 0; c < schema.class_count(); ++c) {
        if (c == decision) continue;
        const auto exact = exact_strongest_argument(engine, *task, c, params);
        const auto approx = strongest_argument(engine, *task, c, params);
        oracle.push_back({{"alt_decision", schema.classes[c]},
                          {"exact_argument", exact.argument.names(schema)},
                          {"exact_confidence", exact.confidence},
                          {"approx_argument", approx ? json(approx->argument.names(schema)) : json(nullptr)},
                          {"approx_confidence", approx ? json(approx->confidence) : json(nullptr)}});
      }
      doc["exact_oracle"] = std::move(oracle);
    }
    out << doc.dump() << '\n';
  }
  return 0;
}

Service* g_service = nullptr;

int cmd_serve(const std::string& config_path, std::optional<int> port, const std::string& model,
              const std::string& data, const std::string& static_dir, const EngineFlags& ef) {
  ServiceConfig config;
  if (!config_path.empty()) config = load_service_config(config_path);
  apply_env_overrides(config);
  if (port) config.port = *port;
  if (!model.empty()) config.model = model;
  if (!data.empty()) config.data = data;
  if (!static_dir.empty()) config.static_dir = static_dir;
  config.params = ef.resolve(config.params);

  auto store = std::make_shared<SessionStore>(load_deployment(require(config.model, "model"), require(config.data, "data")),
                                              config.params, config.transcript_dir);
  Service service(store, config.static_dir);
  const int bound = service.bind(config.host, config.port);
  header("serve", config.params, "port=" + std::to_string(bound));
  std::cout << "listening on http://" << config.host << ':' << bound << "/v1" << std::endl;
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  service.run();
  g_service = nullptr;
  return 0;
}

struct SimulateFlags {
  std::string model, data, out, policy = "always_keep", mode = "aact";
  std::size_t participants = 1;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateFlags& f, const EngineFlags& ef) {
  SimulationConfig config;
  config.params = ef.resolve();
  config.policy = Policy::parse(f.policy);
  config.mode = mode_from_string(f.mode);
  config.participants = f.participants;
  config.seed = f.seed;
  const Deployment d = load_deployment(require(env_or(f.model, "AACT_MODEL"), "--model"),
                                       require(env_or(f.data, "AACT_DATA"), "--data"));
  header("simulate", config.params, "sim_seed=" + std::to_string(f.seed) + " policy=" + to_string(config.policy));
  const auto sessions = simulate(d.engine, d.tasks, config);
  const fs::path dir = require(f.out, "--out");
  fs::create_directories(dir);
  for (const auto& s : sessions) {
    std::ofstream file(dir / (s.participant + "-" + s.task_id + ".jsonl"));
    file << transcript_jsonl(s.transcript);
    if (!file) fail(ErrorCode::io_error, "cannot write into " + dir.string());
  }
  std::cout << sessions.size() << " transcripts written to " << dir.string() << '\n';
  return 0;
}

json fraction_json(const Fraction& f) {
  return {{"value", f.value() ? json(*f.value()) : json(nullptr)}, {"numerator", f.numerator}, {"denominator", f.denominator}};
}

struct ScoreRow {
  std::string scope;
  std::optional<RelianceReport> reliance;
  std::optional<LearningReport> learning;
};

ScoreRow score_group(std::string scope, const std::vector<TaskOutcome>& outcomes) {
  ScoreRow row{std::move(scope), std::nullopt, std::nullopt};
  std::vector<TaskOutcome> assisted;
  std::map<StageTag, int> seen;
  for (const auto& o : outcomes) {
    ++seen[o.stage];
    if (o.stage == StageTag::intervention) assisted.push_back(o);
  }
  if (!assisted.empty()) row.reliance = reliance(assisted);
  if (seen.size() == 3) row.learning = learning_report(outcomes);
  return row;
}

int cmd_score(const std::string& dir, const std::string& format_text, const std::string& out_path) {
  const Format format = parse_format(format_text);
  const fs::path root = require(dir, "--transcripts");
  if (!fs::is_directory(root)) fail(ErrorCode::io_error, root.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::invalid_argument, "no transcripts in " + root.string());

  std::vector<TaskOutcome> outcomes;
  std::map<std::string, std::vector<TaskOutcome>> by_participant;
  for (const auto& path : files) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    auto o = outcome_from_transcript(parse_transcript_jsonl(buffer.str()));
    by_participant[o.participant].push_back(o);
    outcomes.push_back(std::move(o));
  }
  std::vector<ScoreRow> groups;
  for (const auto& [p, list] : by_participant) groups.push_back(score_group(p.empty() ? "(none)" : p, list));
  groups.push_back(score_group("ALL", outcomes));

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) fail(ErrorCode::io_error, "cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  header("score", EngineParams{}, "transcripts=" + std::to_string(files.size()));

  if (format == Format::json) {
    json sessions = json::array();
    for (const auto& o : outcomes) {
      sessions.push_back({{"participant", o.participant}, {"task_id", o.task_id}, {"mode", o.mode},
                          {"stage_tag", to_string(o.stage)}, {"ai_prediction", o.ai_prediction},
                          {"human_initial", o.human_initial}, {"human_final", o.human_final},
                          {"ground_truth", o.ground_truth}, {"ai_correct", o.ai_correct()}});
    }
    json aggregates = json::array();
    for (const auto& g : groups) {
      json a{{"scope", g.scope}};
      if (g.reliance) {
        a["agreement"] = fraction_json(g.reliance->agreement);
        a["switch"] = fraction_json(g.reliance->switch_to_ai);
        a["over_reliance"] = fraction_json(g.reliance->over_reliance);
        a["under_reliance"] = fraction_json(g.reliance->under_reliance);
      }
      if (g.learning) a["learning"] = {{"during", g.learning->during}, {"after", g.learning->after}};
      aggregates.push_back(std::move(a));
    }
    out << json{{"sessions", sessions}, {"aggregates", aggregates}}.dump(2) << '\n';
    return 0;
  }

  const char* sep = format == Format::csv ? "," : " | ";
  const auto line = [&](const std::vector<std::string>& cells) {
    if (format == Format::md) out << "| ";
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? sep : "") << cells[i];
    if (format == Format::md) out << " |";
    out << '\n';
  };
  const std::vector<std::string> cols = {"row", "participant", "task_id", "mode", "stage_tag", "ai_prediction",
                                         "human_initial", "human_final", "ground_truth", "agreement", "switch",
                                         "over_reliance", "under_reliance", "learning_during", "learning_after"};
  line(cols);
  if (format == Format::md) line(std::vector<std::string>(cols.size(), "---"));
  for (const auto& o : outcomes) {
    line({"session", o.participant, o.task_id, o.mode, std::string(to_string(o.stage)), o.ai_prediction,
          o.human_initial, o.human_final, o.ground_truth, "", "", "", "", "", ""});
  }
  for (const auto& g : groups) {
    const auto r = g.reliance;
    line({g.scope == "ALL" ? "aggregate" : "participant", g.scope, "", "", "", "", "", "", "",
          r ? opt_fmt(r->agreement) : "NA", r ? opt_fmt(r->switch_to_ai) : "NA", r ? opt_fmt(r->over_reliance) : "NA",
          r ? opt_fmt(r->under_reliance) : "NA", g.learning ? fmt(g.learning->during) : "NA",
          g.learning ? fmt(g.learning->after) : "NA"});
  }
  return 0;
}

int exit_code(ErrorCode code) { return code == ErrorCode::runtime_failure ? 2 : 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AACT decision support engine"};
  app.require_subcommand(1);

  std::string raw = "data/ames_raw.csv", prepared = "data/ames.csv";
  auto* prepare = app.add_subcommand("prepare", "derive the modelling table from the raw Ames extract");
  prepare->add_option("--raw", raw);
  prepare->add_option("--out", prepared);

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "fit the classifier on a seeded split");
  train_cmd->add_option("--data", tf.data, "prepared CSV");
  train_cmd->add_option("--schema", tf.schema, "schema JSON (default <data>_schema.json)");
  train_cmd->add_option("--split", tf.ratio, "train fraction");
  train_cmd->add_option("--seed", tf.seed, "split seed");
  train_cmd->add_flag("--stratify", tf.stratify);
  train_cmd->add_option("--out", tf.out, "model JSON");
  train_cmd->add_option("--format", tf.format, "json|csv|md");

  std::string model, data, format = "md", records, out, config, static_dir, transcripts;
  bool exact_oracle = false;
  std::optional<int> port;
  EngineFlags ef;

  auto* eval_cmd = app.add_subcommand("evaluate", "score a saved model on its held-out split");
  eval_cmd->add_option("--model", model);
  eval_cmd->add_option("--data", data);
  eval_cmd->add_option("--format", format, "json|csv|md");

  auto* analyze_cmd = app.add_subcommand("analyze", "critique JSON for each (task, decision, argument) record");
  analyze_cmd->add_option("--model", model);
  analyze_cmd->add_option("--data", data);
  analyze_cmd->add_option("--records", records, "JSONL with task_id, decision, argument");
  analyze_cmd->add_option("--out", out);
  analyze_cmd->add_flag("--exact-oracle", exact_oracle, "search strongest arguments by enumeration and report both searches");
  ef.attach(analyze_cmd);

  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--config", config);
  serve_cmd->add_option("--port", port);
  serve_cmd->add_option("--model", model);
  serve_cmd->add_option("--data", data);
  serve_cmd->add_option("--static", static_dir);
  ef.attach(serve_cmd);

  SimulateFlags sf;
  auto* sim_cmd = app.add_subcommand("simulate", "drive simulated participants through sessions");
  sim_cmd->add_option("--model", sf.model);
  sim_cmd->add_option("--data", sf.data);
  sim_cmd->add_option("--policy", sf.policy, "always_keep|always_adopt|threshold:<p>");
  sim_cmd->add_option("--mode", sf.mode, "aact|recommender|analyzer|human_only");
  sim_cmd->add_option("--participants", sf.participants);
  sim_cmd->add_option("--seed", sf.seed);
  sim_cmd->add_option("--out", sf.out, "transcript directory");
  ef.attach(sim_cmd);

  auto* score_cmd = app.add_subcommand("score", "reliance and learning metrics over transcripts");
  score_cmd->add_option("--transcripts", transcripts);
  score_cmd->add_option("--format", format, "json|csv|md");
  score_cmd->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*prepare) return cmd_prepare(raw, prepared);
    if (*train_cmd) return cmd_train(tf);
    if (*eval_cmd) return cmd_evaluate(model, data, format);
    if (*analyze_cmd) return cmd_analyze(model, data, records, out, exact_oracle, ef);
    if (*serve_cmd) return cmd_serve(config, port, model, data, static_dir, ef);
    if (*sim_cmd) return cmd_simulate(sf, ef);
    if (*score_cmd) return cmd_score(transcripts, format, out);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
