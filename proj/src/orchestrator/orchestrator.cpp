#include "safedit/orchestrator.hpp"

#include <chrono>

namespace safedit::orchestrator {

using nlohmann::json;

namespace {

constexpr int kApplyFailureConfidence = 90;

fal::FeedbackReport apply_failure_report(const editor::ApplyError& e) {
  fal::FeedbackReport report;
  report.test = std::string(kApplyTest);
  report.type = fal::FailureType::UnknownRuntimeError;
  if (dynamic_cast<const editor::AmbiguousAnchor*>(&e) != nullptr) {
    report.diagnosis = "The anchor of fragment " + std::to_string(e.fragment_index()) +
                       " occurs more than once in the code, so the edit location is ambiguous.";
  } else {
    report.diagnosis = "The anchor of fragment " + std::to_string(e.fragment_index()) +
                       " does not occur in the code, so the fragment could not be applied.";
  }
  report.action = "Copy each anchor verbatim from the original code and extend it until it matches exactly once.";
  report.confidence = kApplyFailureConfidence;
  return report;
}

template <class T>
json optional_json(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

json exchanges_json(const std::vector<structured::Exchange>& exchanges) {
  json out = json::array();
  for (const auto& e : exchanges) {
    out.push_back(structured::to_json(e));
  }
  return out;
}

std::vector<structured::Exchange> exchanges_from(const json& doc) {
  std::vector<structured::Exchange> out;
  for (const auto& e : doc) {
    out.push_back(structured::exchange_from_json(e));
  }
  return out;
}

template <class T>
std::optional<T> optional_from(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) {
    return std::nullopt;
  }
  return it->get<T>();
}

fal::FeedbackReport report_from_json(const json& doc) {
  fal::FeedbackReport r;
  r.test = doc.at("test").get<std::string>();
  const auto type = fal::parse_failure_type(doc.at("type").get<std::string>());
  if (!type) {
    throw std::invalid_argument("unknown failure type in trace: " + doc.at("type").dump());
  }
  r.type = *type;
  r.diagnosis = doc.at("diagnosis").get<std::string>();
  r.action = doc.at("action").get<std::string>();
  r.expected = optional_from<std::string>(doc, "expected");
  r.actual = optional_from<std::string>(doc, "actual");
  r.confidence = doc.at("confidence").get<int>();
  return r;
}

json to_json(const IterationRecord& it) {
  json fragments = nullptr;
  if (it.fragments) {
    fragments = json::array();
    for (const auto& f : *it.fragments) {
      fragments.push_back(editor::to_json(f));
    }
  }
  json reports = json::array();
  for (const auto& r : it.reports) {
    reports.push_back(fal::to_json(r));
  }
  return {{"index", it.index},
          {"editor_exchanges", exchanges_json(it.editor_exchanges)},
          {"fragments", fragments},
          {"full_file", it.full_file},
          {"edited_code", optional_json(it.edited_code)},
          {"run", it.run ? verifier::to_json(*it.run) : json(nullptr)},
          {"apply_error", optional_json(it.apply_error)},
          {"edit_error", optional_json(it.edit_error)},
          {"reports", reports},
          {"feedback", optional_json(it.feedback)}};
}

IterationRecord iteration_from_json(const json& doc) {
  IterationRecord it;
  it.index = doc.at("index").get<int>();
  it.editor_exchanges = exchanges_from(doc.at("editor_exchanges"));
  if (!doc.at("fragments").is_null()) {
    std::vector<editor::EditFragment> fragments;
    for (const auto& f : doc.at("fragments")) {
      fragments.push_back(editor::fragment_from_json(f));
    }
    it.fragments = std::move(fragments);
  }
  it.full_file = doc.value("full_file", false);
  it.edited_code = optional_from<std::string>(doc, "edited_code");
  if (!doc.at("run").is_null()) {
    it.run = verifier::run_from_json(doc.at("run"));
  }
  it.apply_error = optional_from<std::string>(doc, "apply_error");
  it.edit_error = optional_from<std::string>(doc, "edit_error");
  for (const auto& r : doc.at("reports")) {
    it.reports.push_back(report_from_json(r));
  }
  it.feedback = optional_from<std::string>(doc, "feedback");
  return it;
}

}  // namespace

void validate(const PipelineConfig& config) {
  if (config.max_refinements < 0) {
    throw std::invalid_argument("max_refinements must be >= 0");
  }
  if (config.test_timeout <= verifier::Seconds::zero()) {
    throw std::invalid_argument("test_timeout must be positive");
  }
}

std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "pass" : "fail"; }

std::string trace_filename(std::string_view task_id, corpus::VisibilityVariant variant) {
  return std::string(task_id) + "." + std::string(corpus::to_string(variant)) + ".trace.json";
}

TaskTrace run_task(const corpus::EditTask& task, const PipelineConfig& config,
                   provider::Provider& provider) {
  validate(config);
  const auto started = std::chrono::steady_clock::now();
  TaskTrace trace;
  trace.task_id = task.id;
  trace.instruction_language = task.instruction_language;
  trace.variant = config.variant;
  trace.max_refinements = config.max_refinements;

  auto finish = [&] {
    trace.attempts_used = static_cast<int>(trace.iterations.size());
    trace.verdict = !trace.iterations.empty() && trace.iterations.back().succeeded() ? Verdict::Pass
                                                                                      : Verdict::Fail;
    trace.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return trace;
  };

  const auto visible = corpus::render_visible_code(task, config.variant);
  const planner::RequestOptions options{config.model_id, config.temperature, config.max_output_tokens};
  try {
    auto result = planner::plan(task, visible, provider, options);
    trace.plan = std::move(result.plan);
    trace.planner_exchanges = std::move(result.exchanges);
  } catch (const planner::PlanFailure& e) {
    trace.plan_error = e.what();
    trace.planner_exchanges = e.exchanges();
    return finish();
  }

  verifier::SandboxOptions sandbox;
  sandbox.limit = config.test_timeout;
  sandbox.temp_root = config.sandbox_root;

  std::vector<fal::FeedbackReport> feedback;
  const int budget = 1 + config.max_refinements;
  for (int attempt = 1; attempt <= budget; ++attempt) {
    IterationRecord it;
    it.index = attempt;
    try {
      auto result = editor::edit(*trace.plan, task.original_code, provider, feedback, options);
      it.editor_exchanges = std::move(result.exchanges);
      it.fragments = std::move(result.fragments);
    } catch (const editor::EditFailure& e) {
      it.editor_exchanges = e.exchanges();
      it.edit_error = e.what();
      trace.iterations.push_back(std::move(it));
      break;
    }
    it.full_file = editor::is_full_file(task.original_code, *it.fragments);
    try {
      auto edited = editor::apply_fragments(task.original_code, *it.fragments);
      it.edited_code = edited.text;
      it.run = verifier::run_tests(edited.text, task, sandbox);
      if (!verifier::is_success(*it.run)) {
        it.reports = fal::diagnose(*it.run);
      }
    } catch (const editor::ApplyError& e) {
      it.apply_error = e.what();
      it.reports = {apply_failure_report(e)};
    }
    const bool done = it.succeeded();
    if (!done && attempt < budget) {
      it.feedback = fal::render_feedback(it.reports);
      feedback = it.reports;
    }
    trace.iterations.push_back(std::move(it));
    if (done) {
      break;
    }
  }
  return finish();
}

json to_json(const TaskTrace& trace) {
  json iterations = json::array();
  for (const auto& it : trace.iterations) {
    iterations.push_back(to_json(it));
  }
  return {{"task_id", trace.task_id},
          {"instruction_language", trace.instruction_language},
          {"variant", corpus::to_string(trace.variant)},
          {"max_refinements", trace.max_refinements},
          {"plan", trace.plan ? planner::to_json(*trace.plan) : json(nullptr)},
          {"plan_error", optional_json(trace.plan_error)},
          {"planner_exchanges", exchanges_json(trace.planner_exchanges)},
          {"iterations", iterations},
          {"verdict", to_string(trace.verdict)},
          {"attempts_used", trace.attempts_used},
          {"wall_time_seconds", trace.wall_time_seconds}};
}

TaskTrace trace_from_json(const json& doc) {
  TaskTrace trace;
  trace.task_id = doc.at("task_id").get<std::string>();
  trace.instruction_language = doc.at("instruction_language").get<std::string>();
  const auto variant = corpus::parse_variant(doc.at("variant").get<std::string>());
  if (!variant) {
    throw std::invalid_argument("unknown variant in trace: " + doc.at("variant").dump());
  }
  trace.variant = *variant;
  trace.max_refinements = doc.at("max_refinements").get<int>();
  if (!doc.at("plan").is_null()) {
    trace.plan = planner::plan_from_json(doc.at("plan"));
  }
  trace.plan_error = optional_from<std::string>(doc, "plan_error");
  trace.planner_exchanges = exchanges_from(doc.at("planner_exchanges"));
  for (const auto& it : doc.at("iterations")) {
    trace.iterations.push_back(iteration_from_json(it));
  }
  const auto verdict = doc.at("verdict").get<std::string>();
  if (verdict != "pass" && verdict != "fail") {
    throw std::invalid_argument("unknown verdict in trace: " + verdict);
  }
  trace.verdict = verdict == "pass" ? Verdict::Pass : Verdict::Fail;
  trace.attempts_used = doc.at("attempts_used").get<int>();
  trace.wall_time_seconds = doc.value("wall_time_seconds", 0.0);
  return trace;
}

}  // namespace safedit::orchestrator
