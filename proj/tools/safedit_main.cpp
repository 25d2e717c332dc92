#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safedit/corpus.hpp"
#include "safedit/fal.hpp"
#include "safedit/harness.hpp"
#include "safedit/json_io.hpp"
#include "safedit/provider.hpp"
#include "safedit/verifier.hpp"

namespace {

using nlohmann::json;
using namespace safedit;

constexpr int kExitFailure = 1;
constexpr int kExitEnvironment = 3;

struct ProviderOptions {
  std::string replay;
  std::string record;
  std::string model = provider::kDefaultModel;
  double temperature = provider::kDefaultTemperature;
  std::string endpoint;
};

struct RunArgs {
  std::string config;
  std::string corpus;
  std::string variant = "all";
  std::string out;
  int max_refinements = 3;
  double timeout = 30.0;
  int parallel = 1;
  ProviderOptions provider;
};

struct ClassifyArgs {
  std::string config;
  std::string run_dir;
  std::string corpus;
  ProviderOptions provider;
};

template <class T>
void override_from(const json& doc, const char* key, T& target) {
  if (const auto it = doc.find(key); it != doc.end() && !it->is_null()) {
    target = it->get<T>();
  }
}

void apply_provider_config(const json& doc, ProviderOptions& p) {
  override_from(doc, "replay", p.replay);
  override_from(doc, "record", p.record);
  override_from(doc, "model", p.model);
  override_from(doc, "temperature", p.temperature);
  override_from(doc, "endpoint", p.endpoint);
}

void apply_config(RunArgs& args) {
  if (args.config.empty()) {
    return;
  }
  const auto doc = json_io::read_file(args.config);
  override_from(doc, "corpus", args.corpus);
  override_from(doc, "variant", args.variant);
  override_from(doc, "out", args.out);
  override_from(doc, "max_refinements", args.max_refinements);
  override_from(doc, "timeout", args.timeout);
  override_from(doc, "parallel", args.parallel);
  apply_provider_config(doc, args.provider);
}

void apply_config(ClassifyArgs& args) {
  if (args.config.empty()) {
    return;
  }
  const auto doc = json_io::read_file(args.config);
  override_from(doc, "run_dir", args.run_dir);
  override_from(doc, "corpus", args.corpus);
  apply_provider_config(doc, args.provider);
}

void add_provider_flags(CLI::App& cmd, ProviderOptions& p) {
  cmd.add_option("--replay", p.replay, "Serve model replies from this cassette");
  cmd.add_option("--record", p.record, "Call the live endpoint and record replies to this cassette");
  cmd.add_option("--model", p.model, "Model id")->capture_default_str();
  cmd.add_option("--temperature", p.temperature, "Sampling temperature")->capture_default_str();
}

// Owns whichever providers the options call for.
struct ProviderStack {
  std::unique_ptr<provider::Provider> live;
  std::unique_ptr<provider::Provider> top;
};

ProviderStack make_provider(const ProviderOptions& p) {
  if (!p.replay.empty() && !p.record.empty()) {
    throw CLI::ValidationError("--replay and --record are mutually exclusive");
  }
  ProviderStack stack;
  if (!p.replay.empty()) {
    stack.top = std::make_unique<provider::ReplayProvider>(provider::Cassette::load(p.replay));
    return stack;
  }
  auto config = provider::http_config_from_env();
  if (!p.endpoint.empty()) {
    config.endpoint = p.endpoint;
  }
  if (config.api_key.empty()) {
    std::cerr << "warning: SAFEDIT_API_KEY is not set; requests are sent without credentials\n";
  }
  stack.live = std::make_unique<provider::HttpProvider>(config);
  if (!p.record.empty()) {
    stack.top = std::make_unique<provider::RecordingProvider>(*stack.live, p.record);
  }
  return stack;
}

provider::Provider& top(ProviderStack& s) { return s.top ? *s.top : *s.live; }

std::vector<corpus::VisibilityVariant> variants_from(const std::string& name) {
  if (name == "all") {
    return {std::begin(corpus::kAllVariants), std::end(corpus::kAllVariants)};
  }
  if (const auto v = corpus::parse_variant(name)) {
    return {*v};
  }
  throw CLI::ValidationError("--variant must be code_only, highlight, highlight_cursor or all");
}

void print_corpus_error(const corpus::CorpusError& e) {
  std::cerr << "error: corpus rejected\n";
  for (const auto& d : e.diagnostics()) {
    std::cerr << "  " << (d.source.empty() ? "<input>" : d.source) << ": task '" << d.task_id
              << "' field '" << d.field << "': " << d.message << "\n";
  }
}

int cmd_run(RunArgs args) {
  apply_config(args);
  if (args.corpus.empty() || args.out.empty()) {
    throw CLI::ValidationError("run needs --corpus and --out");
  }
  const auto tasks = corpus::load_corpus(args.corpus);
  harness::RunOptions options;
  options.variants = variants_from(args.variant);
  options.parallel = args.parallel;
  options.corpus_path = args.corpus;
  options.pipeline.max_refinements = args.max_refinements;
  options.pipeline.test_timeout = verifier::Seconds(args.timeout);
  options.pipeline.model_id = args.provider.model;
  options.pipeline.temperature = args.provider.temperature;
  auto providers = make_provider(args.provider);
  const auto summary = harness::run_corpus(tasks, options, top(providers), args.out);
  std::cout << "traces written: " << summary.traces_written << ", skipped: " << summary.traces_skipped
            << ", not applicable: " << summary.not_applicable.size() << "\n";
  for (const auto& e : summary.errors) {
    std::cerr << "error: " << e.task_id << " (" << corpus::to_string(e.variant) << "): " << e.message << "\n";
  }
  if (summary.report.overall.instances > 0) {
    std::cout << "\n" << harness::render_text(summary.report);
  }
  return summary.errors.empty() ? 0 : kExitFailure;
}

int cmd_report(const std::string& run_dir, bool as_json) {
  const auto report = harness::write_report(run_dir);
  if (as_json) {
    std::cout << json_io::dump(harness::render_json(report));
  } else {
    std::cout << harness::render_text(report);
  }
  return 0;
}

int cmd_classify(ClassifyArgs args) {
  apply_config(args);
  if (args.run_dir.empty()) {
    throw CLI::ValidationError("classify needs --run-dir");
  }
  auto corpus_path = args.corpus;
  if (corpus_path.empty()) {
    const auto manifest = json_io::read_file(std::filesystem::path(args.run_dir) / harness::kManifestFile);
    corpus_path = manifest.at("corpus").get<std::string>();
  }
  const auto tasks = corpus::load_corpus(corpus_path);
  auto providers = make_provider(args.provider);
  const planner::RequestOptions options{args.provider.model, args.provider.temperature,
                                        provider::kDefaultMaxOutputTokens};
  const auto summary = harness::classify_run_dir(args.run_dir, tasks, top(providers), options);
  std::cout << "classified: " << summary.classified << ", unclassified: " << summary.unclassified
            << ", skipped: " << summary.skipped << "\n";
  harness::write_report(args.run_dir);
  return 0;
}

int cmd_fal_parse(const std::string& log_path, bool as_json) {
  std::ifstream in(log_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read " << log_path << "\n";
    return kExitFailure;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  verifier::TestRunResult run;
  run.raw_log = buffer.str();
  const auto failures = fal::parse_log(run.raw_log);
  std::vector<fal::FeedbackReport> reports;
  for (const auto& f : failures) {
    const auto c = fal::classify(f, run);
    reports.push_back(fal::explain(f, c.type, c.confidence));
  }
  const auto feedback = fal::render_feedback(reports);
  if (as_json) {
    json doc = {{"failures", json::array()}, {"reports", json::array()}, {"feedback", feedback}};
    for (const auto& f : failures) {
      doc["failures"].push_back(fal::to_json(f));
    }
    for (const auto& r : reports) {
      doc["reports"].push_back(fal::to_json(r));
    }
    std::cout << json_io::dump(doc);
    return 0;
  }
  std::cout << failures.size() << " failure(s)\n";
  for (const auto& f : failures) {
    std::cout << "- " << f.test_name << ": " << (f.exception_type.empty() ? "?" : f.exception_type);
    if (f.location) {
      std::cout << " at " << f.location->file << ":" << f.location->line;
    }
    std::cout << "\n";
  }
  if (!feedback.empty()) {
    std::cout << "\n" << feedback;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instructed code editing pipeline: run, report, classify, fal-parse"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Run the pipeline over a corpus");
  run->add_option("--config", run_args.config, "JSON config file; its values override flags");
  run->add_option("--corpus", run_args.corpus, "Task file or directory of *.task.json");
  run->add_option("--variant", run_args.variant, "code_only|highlight|highlight_cursor|all")
      ->capture_default_str();
  run->add_option("--out", run_args.out, "Run directory for traces and reports");
  run->add_option("--max-refinements", run_args.max_refinements, "Refinements after the first attempt")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  run->add_option("--timeout", run_args.timeout, "Test time limit in seconds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  run->add_option("--parallel", run_args.parallel, "Concurrent pipelines")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_provider_flags(*run, run_args.provider);

  std::string report_dir;
  bool report_json = false;
  auto* report = app.add_subcommand("report", "Recompute the report of a run directory");
  report->add_option("--run-dir", report_dir, "Run directory")->required();
  report->add_flag("--json", report_json, "Print the machine report instead of tables");

  ClassifyArgs classify_args;
  auto* classify = app.add_subcommand("classify", "Label every failed trace with a root-cause category");
  classify->add_option("--config", classify_args.config, "JSON config file; its values override flags");
  classify->add_option("--run-dir", classify_args.run_dir, "Run directory");
  classify->add_option("--corpus", classify_args.corpus, "Corpus (defaults to the one in the run manifest)");
  add_provider_flags(*classify, classify_args.provider);

  std::string log_path;
  bool fal_json = false;
  auto* fal_parse = app.add_subcommand("fal-parse", "Parse a test log into structured feedback");
  fal_parse->add_option("log", log_path, "Test runner log file")->required();
  fal_parse->add_flag("--json", fal_json, "Emit JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      return cmd_run(run_args);
    }
    if (*report) {
      return cmd_report(report_dir, report_json);
    }
    if (*classify) {
      return cmd_classify(classify_args);
    }
    return cmd_fal_parse(log_path, fal_json);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const corpus::CorpusError& e) {
    print_corpus_error(e);
    return kExitFailure;
  } catch (const verifier::EnvironmentError& e) {
    std::cerr << "environment error: " << e.what() << "\n";
    return kExitEnvironment;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
