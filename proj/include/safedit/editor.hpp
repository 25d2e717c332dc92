#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "safedit/fal.hpp"
#include "safedit/planner.hpp"
#include "safedit/provider.hpp"
#include "safedit/structured.hpp"

namespace safedit::editor {

struct EditFragment {
  std::string anchor;
  std::string replacement;

  friend bool operator==(const EditFragment&, const EditFragment&) = default;
};

nlohmann::json to_json(const EditFragment& f);
EditFragment fragment_from_json(const nlohmann::json& doc);

/// Byte range [start, end).
struct Range {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Range&, const Range&) = default;
};

struct AppliedFragment {
  std::size_t index = 0;
  /// Where the anchor sat in the text the fragment was applied to, and where
  /// the replacement sits in that fragment's output.
  Range before;
  Range after;
};

struct EditedCode {
  std::string text;
  std::vector<AppliedFragment> applied;
  /// Changed regions as parallel lists: input_ranges[i] of the input became
  /// output_ranges[i] of text. Sorted and disjoint; bytes outside them are
  /// copied through unchanged.
  std::vector<Range> input_ranges;
  std::vector<Range> output_ranges;
};

class ApplyError : public std::runtime_error {
 public:
  ApplyError(const std::string& what, std::size_t index) : std::runtime_error(what), index_(index) {}
  std::size_t fragment_index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class AnchorNotFound : public ApplyError {
 public:
  explicit AnchorNotFound(std::size_t index);
};

class AmbiguousAnchor : public ApplyError {
 public:
  AmbiguousAnchor(std::size_t index, std::size_t count);
  std::size_t match_count() const noexcept { return count_; }

 private:
  std::size_t count_;
};

/// Sequential exact-once search/replace. Pure: on error nothing is returned.
EditedCode apply_fragments(std::string_view code, std::span<const EditFragment> fragments);

/// True when a single fragment rewrites the whole file.
bool is_full_file(std::string_view code, std::span<const EditFragment> fragments);

provider::ChatRequest build_editor_prompt(const planner::EditPlan& plan, std::string_view code,
                                          std::span<const fal::FeedbackReport> feedback = {},
                                          const planner::RequestOptions& options = {});

/// Accepts a JSON array of {anchor, replacement} or {"fragments": [...]}.
structured::Validation<std::vector<EditFragment>> parse_fragments_reply(std::string_view reply);

class EditFailure : public std::runtime_error {
 public:
  explicit EditFailure(std::vector<structured::Exchange> exchanges);
  const std::vector<structured::Exchange>& exchanges() const noexcept { return exchanges_; }

 private:
  std::vector<structured::Exchange> exchanges_;
};

struct EditResult {
  std::vector<EditFragment> fragments;
  std::vector<structured::Exchange> exchanges;
};

EditResult edit(const planner::EditPlan& plan, std::string_view code, provider::Provider& provider,
                std::span<const fal::FeedbackReport> feedback = {},
                const planner::RequestOptions& options = {});

}  // namespace safedit::editor
