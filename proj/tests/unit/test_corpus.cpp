#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "safedit/corpus.hpp"
#include "safedit/text.hpp"
#include "support.hpp"

using namespace safedit;
using namespace safedit::testing;
using nlohmann::json;

namespace {

json minimal_bundle() {
  return {{"id", "t1"},
          {"instruction", "Make f return 1."},
          {"instruction_language", "en"},
          {"code_language", "python"},
          {"original_code", "def f():\n  pass\n"},
          {"test_suite", "from solution import f\n\ndef test_f():\n    assert f() == 1\n"},
          {"test_command", {"python3", "-m", "pytest", "-q", "{test_file}"}}};
}

std::string diagnostics_text(const json& doc) {
  try {
    corpus::parse_task(doc, "bundle.json");
  } catch (const corpus::CorpusError& e) {
    return e.what();
  }
  return {};
}

// Oracle: insert the markers at the declared offsets, highest offset first.
std::string insert_markers(std::string code, corpus::Span hl, std::optional<std::size_t> cursor) {
  std::vector<std::pair<std::size_t, std::string>> inserts{{hl.end, std::string(corpus::kHighlightEnd)}};
  if (cursor) {
    inserts.emplace_back(*cursor, std::string(corpus::kCursor));
  }
  inserts.emplace_back(hl.start, std::string(corpus::kHighlightBegin));
  std::stable_sort(inserts.begin(), inserts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [at, token] : inserts) {
    code.insert(at, token);
  }
  return code;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (const auto v : corpus::kAllVariants) {
    CHECK(corpus::parse_variant(corpus::to_string(v)) == v);
  }
  CHECK(corpus::display_name(corpus::VisibilityVariant::HighlightCursor) == "HIGHLIGHT + CURSOR");
  CHECK_FALSE(corpus::parse_variant("HIGHLIGHT").has_value());
}

TEST_CASE("minimal bundle parses and defaults file names") {
  const auto task = corpus::parse_task(minimal_bundle());
  CHECK(task.id == "t1");
  CHECK(task.code_filename == "solution.py");
  CHECK(task.test_filename == "test_solution.py");
  CHECK_FALSE(task.highlight.has_value());
  CHECK(corpus::is_applicable(task, corpus::VisibilityVariant::CodeOnly));
  CHECK_FALSE(corpus::is_applicable(task, corpus::VisibilityVariant::Highlight));
  CHECK_THROWS_AS(corpus::render_visible_code(task, corpus::VisibilityVariant::Highlight), corpus::NotApplicable);
  CHECK(corpus::parse_task(corpus::task_to_json(task)).original_code == task.original_code);
}

TEST_CASE("highlight example renders with markers at 0 and 16") {
  auto doc = minimal_bundle();
  doc["highlight"] = {{"start", 0}, {"end", 16}};
  doc["cursor"] = 9;
  const auto task = corpus::parse_task(doc);
  REQUIRE(task.original_code.size() == 16);

  const auto hl = corpus::render_visible_code(task, corpus::VisibilityVariant::Highlight);
  CHECK(hl.text == insert_markers(task.original_code, {0, 16}, std::nullopt));
  CHECK(hl.text == "<<HL>>def f():\n  pass\n<</HL>>");
  CHECK(corpus::strip_markers(hl.text) == task.original_code);

  const auto cur = corpus::render_visible_code(task, corpus::VisibilityVariant::HighlightCursor);
  CHECK(cur.text == insert_markers(task.original_code, {0, 16}, 9));
  CHECK(cur.text == "<<HL>>def f():\n<<CUR>>  pass\n<</HL>>");
  CHECK(corpus::strip_markers(cur.text) == task.original_code);

  const auto plain = corpus::render_visible_code(task, corpus::VisibilityVariant::CodeOnly);
  CHECK(plain.text == task.original_code);
  CHECK(corpus::visible_region(cur) == task.original_code);
}

TEST_CASE("render round-trip over fixture tasks") {
  for (const auto& task : fixture_corpus()) {
    for (const auto v : corpus::kAllVariants) {
      if (!corpus::is_applicable(task, v)) {
        continue;
      }
      const auto visible = corpus::render_visible_code(task, v);
      CHECK(corpus::strip_markers(visible.text) == task.original_code);
      const auto hl_count = text::count_occurrences(visible.text, corpus::kHighlightBegin);
      CHECK(hl_count == (v == corpus::VisibilityVariant::CodeOnly ? 0u : 1u));
      CHECK(text::count_occurrences(visible.text, corpus::kCursor) ==
            (v == corpus::VisibilityVariant::HighlightCursor ? 1u : 0u));
    }
  }
}

TEST_CASE("visible_region is the highlighted text") {
  const auto task = fixture_task("calc");
  const auto visible = corpus::render_visible_code(task, corpus::VisibilityVariant::HighlightCursor);
  CHECK(corpus::visible_region(visible) ==
        task.original_code.substr(task.highlight->start, task.highlight->end - task.highlight->start));
}

TEST_CASE("invalid bundles name the field") {
  SUBCASE("highlight past the end") {
    auto doc = minimal_bundle();
    doc["highlight"] = {{"start", 0}, {"end", 99}};
    const auto msg = diagnostics_text(doc);
    CHECK(msg.find("highlight") != std::string::npos);
    CHECK(msg.find("t1") != std::string::npos);
  }
  SUBCASE("inverted highlight") {
    auto doc = minimal_bundle();
    doc["highlight"] = {{"start", 5}, {"end", 2}};
    CHECK(diagnostics_text(doc).find("highlight") != std::string::npos);
  }
  SUBCASE("cursor outside the highlight") {
    auto doc = minimal_bundle();
    doc["highlight"] = {{"start", 0}, {"end", 4}};
    doc["cursor"] = 10;
    CHECK(diagnostics_text(doc).find("cursor") != std::string::npos);
  }
  SUBCASE("cursor past the end") {
    auto doc = minimal_bundle();
    doc["cursor"] = 17;
    CHECK(diagnostics_text(doc).find("cursor") != std::string::npos);
  }
  SUBCASE("offset inside a UTF-8 sequence") {
    auto doc = minimal_bundle();
    doc["original_code"] = "s = \"\xc3\xa9\"\n";
    doc["highlight"] = {{"start", 0}, {"end", 6}};
    CHECK(diagnostics_text(doc).find("UTF-8") != std::string::npos);
  }
  SUBCASE("marker token in the code") {
    auto doc = minimal_bundle();
    doc["original_code"] = "x = '<<HL>>'\n";
    CHECK(diagnostics_text(doc).find("original_code") != std::string::npos);
  }
  SUBCASE("missing test suite") {
    auto doc = minimal_bundle();
    doc.erase("test_suite");
    CHECK(diagnostics_text(doc).find("test_suite") != std::string::npos);
  }
  SUBCASE("bad id") {
    auto doc = minimal_bundle();
    doc["id"] = "../x";
    CHECK(diagnostics_text(doc).find("id") != std::string::npos);
  }
  SUBCASE("empty command") {
    auto doc = minimal_bundle();
    doc["test_command"] = json::array();
    CHECK(diagnostics_text(doc).find("test_command") != std::string::npos);
  }
}

TEST_CASE("directory load collects every bad bundle") {
  const auto dir = std::filesystem::temp_directory_path() / "safedit-corpus-test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const json& doc) { std::ofstream(dir / name) << doc.dump(); };
  auto good = minimal_bundle();
  write("a.task.json", good);
  auto bad1 = minimal_bundle();
  bad1["id"] = "b";
  bad1["highlight"] = {{"start", 0}, {"end", 100}};
  write("b.task.json", bad1);
  auto bad2 = minimal_bundle();
  bad2["id"] = "c";
  bad2["instruction"] = "";
  write("c.task.json", bad2);
  std::ofstream(dir / "ignored.json") << "{";
  try {
    corpus::load_corpus(dir);
    FAIL("expected CorpusError");
  } catch (const corpus::CorpusError& e) {
    CHECK(e.diagnostics().size() == 2);
  }
  std::filesystem::remove(dir / "b.task.json");
  std::filesystem::remove(dir / "c.task.json");
  CHECK(corpus::load_corpus(dir).size() == 1);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(corpus::load_corpus(dir), corpus::CorpusError);
}

TEST_CASE("fixture corpus is ordered by id") {
  const auto tasks = fixture_corpus();
  REQUIRE(tasks.size() == 5);
  for (std::size_t i = 1; i < tasks.size(); ++i) {
    CHECK(tasks[i - 1].id < tasks[i].id);
  }
}
