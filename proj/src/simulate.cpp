#include "aact/simulate.hpp"

#include "aact/error.hpp"
#include "aact/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace aact {

using nlohmann::json;

Policy Policy::parse(std::string_view text) {
  if (text == "always_keep") return {Kind::always_keep, 0.0};
  if (text == "always_adopt") return {Kind::always_adopt, 0.0};
  constexpr std::string_view prefix = "threshold:";
  if (text.starts_with(prefix)) {
    const auto rest = text.substr(prefix.size());
    double p = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), p);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || !(p >= 0.0 && p <= 1.0))
      fail(ErrorCode::invalid_argument, "threshold policy needs a value in [0, 1]");
    return {Kind::threshold, p};
  }
  fail(ErrorCode::invalid_argument, "unknown policy '" + std::string(text) + "'");
}

bool Policy::adopts(double magnitude) const {
  switch (kind) {
    case Kind::always_keep: return false;
    case Kind::always_adopt: return true;
    case Kind::threshold: return magnitude >= threshold;
  }
  return false;
}

std::string to_string(const Policy& policy) {
  switch (policy.kind) {
    case Policy::Kind::always_keep: return "always_keep";
    case Policy::Kind::always_adopt: return "always_adopt";
    case Policy::Kind::threshold: return "threshold:" + std::to_string(policy.threshold);
  }
  return "?";
}

HumanState draw_initial(const FeatureSchema& schema, const Instance& task, const SimulatedHuman& human,
                        std::mt19937_64& rng) {
  const std::size_t classes = schema.class_count();
  HumanState state;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (task.label && unit(rng) < human.initial_accuracy) {
    state.decision = *task.label;
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    state.decision = pick(rng);
    if (task.label && state.decision == *task.label) state.decision = (state.decision + 1) % classes;
  }
  std::vector<std::size_t> order(schema.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t hi = std::min(human.max_argument, schema.size());
  const std::size_t lo = std::min(human.min_argument, hi);
  std::uniform_int_distribution<std::size_t> size(lo, hi);
  order.resize(size(rng));
  std::sort(order.begin(), order.end());
  state.argument = Argument(order);
  std::uniform_int_distribution<int> confidence(human.min_confidence, human.max_confidence);
  state.confidence = confidence(rng);
  return state;
}

Responder::Responder(const FeatureSchema& schema, Policy policy, std::uint64_t seed)
    : schema_(&schema), policy_(policy), rng_(seed) {}

std::optional<Answer> Responder::observe(const json& message) {
  const auto id = message.at("template_id").get<std::string>();
  const json& payload = message.at("payload");

  if (id == "T-INC-REFLECT" || id == "T-UNR-REFLECT") {
    std::uniform_int_distribution<int> noise(-10, 10);
    const int current = payload.at("current_confidence").get<int>();
    Answer a;
    a.kind = Answer::Kind::reflection;
    a.reported_confidence = std::clamp(current + noise(rng_), 0, 100);
    return a;
  }
  if (id == "T-CONF-REFLECT") {
    std::uniform_int_distribution<int> guess(0, 50);
    Answer a;
    a.kind = Answer::Kind::reflection;
    a.reported_confidence = guess(rng_);
    return a;
  }

  if (id.starts_with("T-INC-SUGGEST")) {
    if (policy_.adopts(std::abs(payload.at("delta").get<double>())))
      add_.insert(payload.at("feature").get<std::string>());
  } else if (id.starts_with("T-UNR-SUGGEST")) {
    if (policy_.adopts(std::abs(payload.at("delta").get<double>())))
      remove_.insert(payload.at("feature").get<std::string>());
  } else if (id == "T-CONF-SUGGEST") {
    // only the strongest candidate is taken
    if (!switch_to_ && policy_.adopts(payload.at("margin").get<double>())) {
      switch_to_ = payload.at("alt_decision").get<std::string>();
      std::vector<std::string> names;
      for (const auto& row : payload.at("argument")) names.push_back(row.at("feature").get<std::string>());
      replace_argument_ = std::move(names);
    }
  } else if (id == "T-REC") {
    if (policy_.adopts(payload.at("margin").get<double>())) switch_to_ = payload.at("prediction").get<std::string>();
  } else if (id == "T-ANALYZE") {
    std::optional<std::string> best;
    double best_total = 0.0;
    for (const auto& block : payload.at("classes")) {
      double total = 0.0;
      for (const auto& s : block.at("supporting")) total += s.at("score").get<double>();
      for (const auto& s : block.at("opposing")) total += s.at("score").get<double>();
      if (!best || total > best_total) {
        best = block.at("decision").get<std::string>();
        best_total = total;
      }
    }
    if (best && policy_.adopts(best_total)) switch_to_ = best;
  } else if (id == "T-UPDATE") {
    const auto decision = payload.at("decision").get<std::string>();
    auto names = payload.at("argument").get<std::vector<std::string>>();
    std::set<std::string> argument(names.begin(), names.end());
    const std::set<std::string> before = argument;
    if (replace_argument_) argument = std::set<std::string>(replace_argument_->begin(), replace_argument_->end());
    for (const auto& f : add_) argument.insert(f);
    for (const auto& f : remove_) argument.erase(f);

    Answer a;
    a.kind = Answer::Kind::update;
    if (switch_to_ && *switch_to_ != decision) a.update.decision = schema_->class_index(*switch_to_);
    if (argument != before) {
      const std::vector<std::string> list(argument.begin(), argument.end());
      a.update.argument = Argument::from_names(*schema_, list);
    }
    switch_to_.reset();
    replace_argument_.reset();
    add_.clear();
    remove_.clear();
    return a;
  }
  return std::nullopt;
}

void run_session(Session& session, Responder& responder, const HumanState& initial) {
  session.submit_initial(initial.decision, initial.argument, initial.confidence);
  while (!session.finished()) {
    const auto message = session.next_prompt();
    const auto answer = responder.observe(message_json(message));
    if (message.expected_input == ExpectedInput::none) continue;
    if (!answer) fail(ErrorCode::runtime_failure, "policy has no answer for " + message.template_id);
    if (answer->kind == Answer::Kind::reflection) {
      session.submit_reflection(answer->reported_confidence);
    } else {
      session.submit_update(answer->update);
    }
  }
}

std::vector<std::size_t> task_pool(const Engine& engine, std::span<const Instance> tasks,
                                   std::size_t ai_correct, std::size_t ai_wrong, std::uint64_t seed) {
  std::vector<std::size_t> right, wrong;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!tasks[i].label) continue;
    const bool correct = engine.model().predict_proba(tasks[i]).prediction() == *tasks[i].label;
    (correct ? right : wrong).push_back(i);
  }
  if (right.size() < ai_correct || wrong.size() < ai_wrong)
    fail(ErrorCode::invalid_argument, "not enough labelled tasks for the requested pool");
  std::mt19937_64 rng(splitmix64(seed));
  std::shuffle(right.begin(), right.end(), rng);
  std::shuffle(wrong.begin(), wrong.end(), rng);
  std::vector<std::size_t> pool(right.begin(), right.begin() + static_cast<std::ptrdiff_t>(ai_correct));
  pool.insert(pool.end(), wrong.begin(), wrong.begin() + static_cast<std::ptrdiff_t>(ai_wrong));
  return pool;
}

std::uint64_t responder_seed(std::uint64_t seed, std::string_view participant, std::string_view task_id) {
  return splitmix64(splitmix64(seed) ^ fnv1a(participant) ^ splitmix64(fnv1a(task_id)));
}

std::vector<SimulatedSession> simulate(std::shared_ptr<const Engine> engine,
                                       std::span<const Instance> tasks, const SimulationConfig& config) {
  config.params.validate();
  const auto pool = task_pool(*engine, tasks, config.ai_correct_tasks, config.ai_wrong_tasks, config.seed);
  if (config.pre_tasks + config.post_tasks > pool.size())
    fail(ErrorCode::invalid_argument, "pre and post blocks exceed the task pool");
  const auto& schema = engine->schema();

  std::vector<SimulatedSession> out;
  for (std::size_t p = 0; p < config.participants; ++p) {
    char name[16];
    std::snprintf(name, sizeof name, "p%03zu", p + 1);
    std::mt19937_64 rng(splitmix64(config.seed ^ splitmix64(p + 1)));
    auto order = pool;
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t t = 0; t < order.size(); ++t) {
      const Instance& task = tasks[order[t]];
      StageTag stage = StageTag::intervention;
      if (t < config.pre_tasks) stage = StageTag::pre_test;
      if (t >= order.size() - config.post_tasks) stage = StageTag::post_test;
      const Mode mode = stage == StageTag::intervention ? config.mode : Mode::human_only;

      SessionOptions options;
      options.participant = name;
      options.stage_tag = std::string(to_string(stage));
      options.clock = config.clock;
      Session session(std::string(name) + "-" + task.id, engine, task, mode, config.params, options);
      const HumanState initial = draw_initial(schema, task, config.human, rng);
      Responder responder(schema, config.policy, responder_seed(config.seed, name, task.id));
      run_session(session, responder, initial);
      out.push_back({name, task.id, stage, session.transcript(), session.answers()});
    }
  }
  return out;
}

}  // namespace aact
