#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "safedit/harness.hpp"
#include "safedit/json_io.hpp"
#include "safedit/verifier.hpp"

namespace safedit::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kTraceSuffix = ".trace.json";

struct Job {
  const corpus::EditTask* task;
  corpus::VisibilityVariant variant;
  fs::path path;
};

json manifest_json(const RunOptions& options, const RunSummary& summary) {
  json variants = json::array();
  for (const auto v : options.variants) {
    variants.push_back(corpus::to_string(v));
  }
  json not_applicable = json::array();
  for (const auto& na : summary.not_applicable) {
    not_applicable.push_back({{"task_id", na.task_id}, {"variant", corpus::to_string(na.variant)}});
  }
  json errors = json::array();
  for (const auto& e : summary.errors) {
    errors.push_back({{"task_id", e.task_id}, {"variant", corpus::to_string(e.variant)}, {"message", e.message}});
  }
  const auto& p = options.pipeline;
  return {{"corpus", options.corpus_path},
          {"variants", variants},
          {"max_refinements", p.max_refinements},
          {"test_timeout_seconds", p.test_timeout.count()},
          {"model_id", p.model_id},
          {"temperature", p.temperature},
          {"not_applicable", not_applicable},
          {"errors", errors}};
}

std::vector<NotApplicable> manifest_not_applicable(const fs::path& run_dir) {
  std::vector<NotApplicable> out;
  const auto path = run_dir / kManifestFile;
  if (!fs::exists(path)) {
    return out;
  }
  const auto doc = json_io::read_file(path);
  for (const auto& item : doc.value("not_applicable", json::array())) {
    const auto variant = corpus::parse_variant(item.at("variant").get<std::string>());
    if (!variant) {
      throw std::runtime_error("unknown variant in " + path.string());
    }
    out.push_back({item.at("task_id").get<std::string>(), *variant});
  }
  return out;
}

}  // namespace

std::vector<fs::path> trace_files(const fs::path& run_dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(run_dir)) {
    throw std::runtime_error("not a run directory: " + run_dir.string());
  }
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > kTraceSuffix.size() &&
        name.compare(name.size() - kTraceSuffix.size(), kTraceSuffix.size(), kTraceSuffix) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

MetricsReport report_for_run_dir(const fs::path& run_dir) {
  std::vector<RunRecord> records;
  for (const auto& path : trace_files(run_dir)) {
    try {
      records.push_back(record_from_trace(json_io::read_file(path)));
    } catch (const json::exception& e) {
      throw std::runtime_error("malformed trace " + path.string() + ": " + e.what());
    }
  }
  if (records.empty()) {
    throw std::runtime_error("no trace files in " + run_dir.string());
  }
  return compute_report(records, manifest_not_applicable(run_dir));
}

MetricsReport write_report(const fs::path& run_dir) {
  auto report = report_for_run_dir(run_dir);
  json_io::write_atomic(run_dir / kReportJson, render_json(report));
  json_io::write_text_atomic(run_dir / kReportText, render_text(report));
  return report;
}

RunSummary run_corpus(const std::vector<corpus::EditTask>& tasks, const RunOptions& options,
                      provider::Provider& provider, const fs::path& out_dir) {
  orchestrator::validate(options.pipeline);
  fs::create_directories(out_dir);
  RunSummary summary;
  std::vector<Job> jobs;
  for (const auto& task : tasks) {
    for (const auto v : options.variants) {
      if (!corpus::is_applicable(task, v)) {
        summary.not_applicable.push_back({task.id, v});
        continue;
      }
      auto path = out_dir / orchestrator::trace_filename(task.id, v);
      if (fs::exists(path)) {
        ++summary.traces_skipped;
        continue;
      }
      jobs.push_back({&task, v, std::move(path)});
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex mutex;
  std::exception_ptr fatal;
  std::map<std::size_t, RunError> errors;  // keyed by job index for stable order
  auto worker = [&] {
    while (!abort.load()) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) {
        return;
      }
      const auto& job = jobs[i];
      auto config = options.pipeline;
      config.variant = job.variant;
      try {
        const auto trace = orchestrator::run_task(*job.task, config, provider);
        json_io::write_atomic(job.path, orchestrator::to_json(trace));
        std::lock_guard lock(mutex);
        ++summary.traces_written;
      } catch (const verifier::EnvironmentError&) {
        std::lock_guard lock(mutex);
        if (!fatal) {
          fatal = std::current_exception();
        }
        abort = true;
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        errors.emplace(i, RunError{job.task->id, job.variant, e.what()});
      }
    }
  };
  const auto workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(options.parallel, 1)), 1,
                                               std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  for (auto& [index, error] : errors) {
    summary.errors.push_back(std::move(error));
  }
  json_io::write_atomic(out_dir / kManifestFile, manifest_json(options, summary));
  if (fatal) {
    std::rethrow_exception(fatal);
  }
  if (!trace_files(out_dir).empty()) {
    summary.report = write_report(out_dir);
  }
  return summary;
}

ClassifySummary classify_run_dir(const fs::path& run_dir, const std::vector<corpus::EditTask>& tasks,
                                 provider::Provider& provider, const planner::RequestOptions& options) {
  std::map<std::string, const corpus::EditTask*> by_id;
  for (const auto& t : tasks) {
    by_id[t.id] = &t;
  }
  ClassifySummary summary;
  for (const auto& path : trace_files(run_dir)) {
    auto doc = json_io::read_file(path);
    const auto trace = orchestrator::trace_from_json(doc);
    if (trace.verdict != orchestrator::Verdict::Fail || (doc.contains("taxonomy") && !doc["taxonomy"].is_null())) {
      ++summary.skipped;
      continue;
    }
    const auto it = by_id.find(trace.task_id);
    if (it == by_id.end()) {
      throw std::runtime_error("task " + trace.task_id + " from " + path.string() + " is not in the corpus");
    }
    const auto result = taxonomy::classify_failure(trace, *it->second, provider, options);
    doc["taxonomy"] = taxonomy::to_json(result);
    json_io::write_atomic(path, doc);
    ++(result.unclassified() ? summary.unclassified : summary.classified);
  }
  return summary;
}

}  // namespace safedit::harness
