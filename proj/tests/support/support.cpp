#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "safedit/json_io.hpp"

namespace safedit::testing {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path fixtures_dir() { return SAFEDIT_FIXTURES_DIR; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

corpus::EditTask fixture_task(const std::string& name) {
  return corpus::load_corpus(fixtures_dir() / "tasks" / (name + ".task.json")).at(0);
}

fs::path corpus_dir() { return fixtures_dir() / "corpus"; }

std::vector<corpus::EditTask> fixture_corpus() { return corpus::load_corpus(corpus_dir()); }

fs::path cassette_path(const std::string& name) { return fixtures_dir() / "cassettes" / (name + ".json"); }

provider::Cassette cassette(const std::string& name) { return provider::Cassette::load(cassette_path(name)); }

std::vector<FixtureLog> fixture_logs() {
  std::vector<FixtureLog> out;
  const auto dir = fixtures_dir() / "logs";
  for (const auto& item : json_io::read_file(dir / "index.json")) {
    FixtureLog log;
    const auto file = item.at("log").get<std::string>();
    log.name = file.substr(0, file.size() - 4);
    log.run.raw_log = read_text(dir / file);
    log.run.overall = verifier::parse_overall(item.at("overall").get<std::string>()).value();
    log.run.exit_code = item.at("exit_code").get<int>();
    log.expected_types = item.at("expected_types").get<std::vector<std::string>>();
    out.push_back(std::move(log));
  }
  return out;
}

FixtureLog fixture_log(const std::string& name) {
  for (auto& log : fixture_logs()) {
    if (log.name == name) {
      return log;
    }
  }
  throw std::runtime_error("no fixture log " + name);
}

double sandbox_timeout_seconds() {
  if (const char* value = std::getenv("SAFEDIT_SANDBOX_TIMEOUT")) {
    const double v = std::atof(value);
    if (v > 0) {
      return v;
    }
  }
  return 30.0;
}

provider::ChatResponse QueueProvider::complete(const provider::ChatRequest& request) {
  std::lock_guard lock(mutex_);
  provider::validate(request);
  if (requests_.size() >= replies_.size()) {
    throw std::runtime_error("QueueProvider ran out of scripted replies");
  }
  requests_.push_back(request);
  return {replies_[requests_.size() - 1], std::nullopt, {}};
}

std::vector<provider::ChatRequest> QueueProvider::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

struct StubServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::vector<StubRule> rules;
  mutable std::mutex mutex;
  std::size_t hits = 0;
  std::vector<std::string> unmatched;
};

StubServer::StubServer(std::vector<StubRule> rules) : impl_(std::make_unique<Impl>()) {
  impl_->rules = std::move(rules);
  auto* impl = impl_.get();
  impl->server.Post("/v1/chat/completions", [impl](const httplib::Request& req, httplib::Response& res) {
    std::string haystack;
    try {
      const auto doc = json::parse(req.body);
      for (const auto& m : doc.at("messages")) {
        haystack += m.at("content").get<std::string>();
        haystack += '\n';
      }
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    std::lock_guard lock(impl->mutex);
    ++impl->hits;
    for (const auto& rule : impl->rules) {
      const bool all = std::all_of(rule.contains.begin(), rule.contains.end(),
                                   [&](const std::string& s) { return haystack.find(s) != std::string::npos; });
      const bool none = std::none_of(rule.excludes.begin(), rule.excludes.end(),
                                     [&](const std::string& s) { return haystack.find(s) != std::string::npos; });
      if (all && none) {
        const json body = {{"choices", {{{"message", {{"role", "assistant"}, {"content", rule.reply}}}}}},
                           {"usage", {{"prompt_tokens", 1}, {"completion_tokens", 1}}}};
        res.set_content(body.dump(), "application/json");
        return;
      }
    }
    impl->unmatched.push_back(haystack);
    res.status = 500;
  });
  impl->port = impl->server.bind_to_any_port("127.0.0.1");
  if (impl->port <= 0) {
    throw std::runtime_error("stub server cannot bind");
  }
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) {
    impl_->thread.join();
  }
}

std::string StubServer::endpoint() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1/chat/completions";
}

std::size_t StubServer::hits() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->hits;
}

std::vector<std::string> StubServer::unmatched() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->unmatched;
}

planner::EditPlan connect_plan() {
  return {{"connect", "socket.create_connection", "host", "port"},
          "Give connect() a timeout parameter that defaults to 10 seconds and forward it to "
          "socket.create_connection.",
          "The signature and body of function connect().",
          {"ADD parameter `timeout` to function `connect()`"},
          {"Keep the parameters host and port in their current order.", "Leave every other function unchanged."}};
}

planner::EditPlan calc_plan() {
  return {{"subtract", "return a + b"},
          "Make subtract compute a minus b instead of a plus b.",
          "The return statement of method subtract.",
          {"REPLACE the addition in `subtract` with `a` minus `b`"},
          {"Do not change add or multiply."}};
}

planner::EditPlan rename_plan() {
  return {{"avg"},
          "Rename the function avg to mean.",
          "The definition of function avg.",
          {"RENAME function `avg` to `mean`"},
          {"Keep the function body unchanged."}};
}

planner::EditPlan logging_plan() {
  return {{"process", "items"},
          "Log how many items process receives before summing them.",
          "The first statement of function process.",
          {"ADD a call to `logger.info` reporting the item count as the first statement of `process`"},
          {"Keep the summing loop unchanged."}};
}

planner::EditPlan clamp_plan() {
  return {{"clamp", "low", "high"},
          "Reject an inverted range before clamping.",
          "The start of function clamp.",
          {"ADD a check at the start of `clamp` that raises ValueError when `low` exceeds `high`"},
          {"Keep the clamping expression unchanged."}};
}

namespace {

orchestrator::TaskTrace failed_trace(const corpus::EditTask& task, planner::EditPlan plan,
                                     std::string edited_code, std::string log) {
  orchestrator::TaskTrace trace;
  trace.task_id = task.id;
  trace.instruction_language = task.instruction_language;
  trace.variant = corpus::VisibilityVariant::Highlight;
  trace.plan = std::move(plan);
  orchestrator::IterationRecord it;
  it.index = 1;
  it.fragments = std::vector<editor::EditFragment>{};
  it.edited_code = std::move(edited_code);
  verifier::TestRunResult run;
  run.overall = verifier::Overall::Fail;
  run.exit_code = 1;
  run.raw_log = std::move(log);
  it.run = run;
  trace.iterations.push_back(std::move(it));
  trace.verdict = orchestrator::Verdict::Fail;
  trace.attempts_used = 1;
  return trace;
}

}  // namespace

orchestrator::TaskTrace deleted_function_trace() {
  const auto task = corpus::load_corpus(corpus_dir() / "add_logging.task.json").at(0);
  return failed_trace(task, logging_plan(),
                      "import logging\n\nlogger = logging.getLogger(__name__)\n",
                      "==================================== ERRORS ====================================\n"
                      "______________________ ERROR collecting test_solution.py _______________________\n"
                      "ImportError while importing test module '<sandbox>/test_solution.py'.\n"
                      "E   ImportError: cannot import name 'process' from 'solution' (<sandbox>/solution.py)\n"
                      "=========================== short test summary info ============================\n"
                      "ERROR test_solution.py\n"
                      "1 error in 0.12s\n");
}

orchestrator::TaskTrace still_adding_trace() {
  const auto task = fixture_task("calc");
  return failed_trace(task, calc_plan(), task.original_code, read_text(fixtures_dir() / "logs" / "assertion_mismatch.log"));
}

}  // namespace safedit::testing
