#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "safedit/harness.hpp"

namespace safedit::harness {

using nlohmann::json;
using corpus::VisibilityVariant;

namespace {

void require_non_empty(const std::vector<RunRecord>& records, const char* what) {
  if (records.empty()) {
    throw std::invalid_argument(std::string(what) + " of an empty record set is undefined");
  }
}

std::size_t category_index(taxonomy::TaxonomyCategory c) {
  for (std::size_t i = 0; i < std::size(taxonomy::kAllCategories); ++i) {
    if (taxonomy::kAllCategories[i] == c) {
      return i;
    }
  }
  return 0;
}

}  // namespace

RunRecord make_record(std::string task_id, std::string language, VisibilityVariant variant,
                      orchestrator::Verdict verdict, int attempts_used) {
  RunRecord r;
  r.task_id = std::move(task_id);
  r.instruction_language = std::move(language);
  r.variant = variant;
  r.verdict = verdict;
  r.attempts_used = std::max(1, attempts_used);
  r.first_try = verdict == orchestrator::Verdict::Pass && r.attempts_used == 1;
  return r;
}

RunRecord record_from_trace(const json& doc) {
  const auto trace = orchestrator::trace_from_json(doc);
  auto record = make_record(trace.task_id, trace.instruction_language, trace.variant, trace.verdict,
                            trace.attempts_used);
  if (const auto it = doc.find("taxonomy"); it != doc.end() && !it->is_null()) {
    if (const auto label = it->find("label"); label != it->end() && !label->is_null()) {
      record.taxonomy = taxonomy::label_from_json(*label);
    } else {
      record.unclassified = true;
    }
  }
  return record;
}

double compute_tsr(const std::vector<RunRecord>& records) {
  require_non_empty(records, "TSR");
  const auto passed = std::count_if(records.begin(), records.end(), [](const RunRecord& r) {
    return r.verdict == orchestrator::Verdict::Pass;
  });
  return 100.0 * static_cast<double>(passed) / static_cast<double>(records.size());
}

double compute_first_try_rate(const std::vector<RunRecord>& records) {
  require_non_empty(records, "first-try rate");
  const auto first = std::count_if(records.begin(), records.end(),
                                   [](const RunRecord& r) { return r.first_try; });
  return 100.0 * static_cast<double>(first) / static_cast<double>(records.size());
}

double compute_avg_iterations(const std::vector<RunRecord>& records) {
  require_non_empty(records, "average iterations");
  double sum = 0.0;
  for (const auto& r : records) {
    sum += r.attempts_used;
  }
  return sum / static_cast<double>(records.size());
}

double FailureDistribution::percent_of(taxonomy::TaxonomyCategory c) const {
  return percent[category_index(c)];
}

FailureDistribution compute_failure_distribution(const std::vector<RunRecord>& records) {
  FailureDistribution d;
  for (const auto& r : records) {
    if (r.verdict != orchestrator::Verdict::Fail) {
      continue;
    }
    ++d.failed;
    if (r.taxonomy) {
      ++d.classified;
      ++d.counts[category_index(r.taxonomy->category)];
    } else if (r.unclassified) {
      ++d.unclassified;
    } else {
      ++d.pending;
    }
  }
  d.empty = d.classified == 0;
  if (!d.empty) {
    for (std::size_t i = 0; i < d.counts.size(); ++i) {
      d.percent[i] = 100.0 * static_cast<double>(d.counts[i]) / static_cast<double>(d.classified);
    }
  }
  return d;
}

GroupMetrics compute_group(const std::vector<RunRecord>& records) {
  GroupMetrics g;
  g.instances = records.size();
  for (const auto& r : records) {
    g.passed += r.verdict == orchestrator::Verdict::Pass ? 1 : 0;
    g.first_try += r.first_try ? 1 : 0;
  }
  if (!records.empty()) {
    g.tsr = compute_tsr(records);
    g.first_try_rate = compute_first_try_rate(records);
    g.avg_iterations = compute_avg_iterations(records);
  }
  return g;
}

MetricsReport compute_report(const std::vector<RunRecord>& records,
                             std::vector<NotApplicable> not_applicable) {
  require_non_empty(records, "a metrics report");
  MetricsReport report;
  report.overall = compute_group(records);
  report.failures = compute_failure_distribution(records);
  report.not_applicable = std::move(not_applicable);

  for (const auto& r : records) {
    report.languages.push_back(r.instruction_language);
  }
  std::sort(report.languages.begin(), report.languages.end());
  report.languages.erase(std::unique(report.languages.begin(), report.languages.end()),
                         report.languages.end());
  for (const auto v : corpus::kAllVariants) {
    if (std::any_of(records.begin(), records.end(), [v](const RunRecord& r) { return r.variant == v; })) {
      report.variants.push_back(v);
    }
  }

  auto select = [&](auto&& pred) {
    std::vector<RunRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out), pred);
    return out;
  };
  for (const auto& lang : report.languages) {
    const auto subset = select([&](const RunRecord& r) { return r.instruction_language == lang; });
    report.by_language.push_back(compute_group(subset));
    report.failures_by_language.push_back(compute_failure_distribution(subset));
    std::vector<std::optional<GroupMetrics>> row;
    for (const auto v : report.variants) {
      const auto cell = select([&](const RunRecord& r) {
        return r.instruction_language == lang && r.variant == v;
      });
      row.push_back(cell.empty() ? std::nullopt : std::optional(compute_group(cell)));
    }
    report.by_language_variant.push_back(std::move(row));
  }
  for (const auto v : report.variants) {
    report.by_variant.push_back(compute_group(select([v](const RunRecord& r) { return r.variant == v; })));
  }
  return report;
}

}  // namespace safedit::harness
