#include <cmath>
#include <cstdio>

#include "safedit/harness.hpp"

namespace safedit::harness {

using nlohmann::json;

namespace {

constexpr std::string_view kMinus = "−";

double round_half_away(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double magnitude = std::floor(std::abs(value) * scale + 0.5 + 1e-7) / scale;
  return magnitude == 0.0 ? 0.0 : std::copysign(magnitude, value);
}

std::string fixed(double value, int decimals) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
  return buffer;
}

std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (const unsigned char c : s) {
    n += (c & 0xC0) != 0x80 ? 1 : 0;
  }
  return n;
}

using Row = std::vector<std::string>;

std::string table(const std::string& title, const Row& header, const std::vector<Row>& rows) {
  std::vector<std::size_t> widths(header.size(), 0);
  auto widen = [&](const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      widths[i] = std::max(widths[i], display_width(row[i]));
    }
  };
  widen(header);
  for (const auto& row : rows) {
    widen(row);
  }
  auto line = [&](const Row& row) {
    std::string out = "|";
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += " " + row[i] + std::string(widths[i] - display_width(row[i]), ' ') + " |";
    }
    return out + "\n";
  };
  std::string out = title + "\n" + line(header) + "|";
  for (const auto w : widths) {
    out += std::string(w + 2, '-') + "|";
  }
  out += "\n";
  for (const auto& row : rows) {
    out += line(row);
  }
  return out;
}

json group_json(const GroupMetrics& g) {
  return {{"instances", g.instances},       {"passed", g.passed},
          {"first_try", g.first_try},       {"tsr", g.tsr},
          {"first_try_rate", g.first_try_rate}, {"avg_iterations", g.avg_iterations}};
}

json distribution_json(const FailureDistribution& d) {
  json counts = json::object();
  json percent = json::object();
  for (std::size_t i = 0; i < std::size(taxonomy::kAllCategories); ++i) {
    const auto name = std::string(taxonomy::to_string(taxonomy::kAllCategories[i]));
    counts[name] = d.counts[i];
    percent[name] = d.percent[i];
  }
  return {{"failed", d.failed},   {"classified", d.classified}, {"unclassified", d.unclassified},
          {"pending", d.pending}, {"empty", d.empty},           {"counts", counts},
          {"percent", percent}};
}

Row distribution_row(const std::string& label, const FailureDistribution& d) {
  Row row{label, std::to_string(d.failed)};
  for (std::size_t i = 0; i < d.percent.size(); ++i) {
    row.push_back(d.empty ? "-" : format_percent(d.percent[i]));
  }
  return row;
}

}  // namespace

std::string format_percent(double value, int decimals) {
  return fixed(round_half_away(value, decimals), decimals);
}

std::string format_delta(double value, double base, int decimals) {
  const double delta = round_half_away(round_half_away(value, decimals) - round_half_away(base, decimals),
                                       decimals);
  if (delta == 0.0) {
    return "(" + fixed(0.0, decimals) + ")";
  }
  const auto magnitude = fixed(std::abs(delta), decimals);
  return delta < 0 ? "(" + std::string(kMinus) + magnitude + ")" : "(+" + magnitude + ")";
}

std::string render_text(const MetricsReport& report) {
  std::string out;
  out += "Instances: " + std::to_string(report.overall.instances) +
         " (not applicable: " + std::to_string(report.not_applicable.size()) + ")\n";
  out += "Overall TSR (%): " + format_percent(report.overall.tsr) + "\n";
  out += "First-try success (%): " + format_percent(report.overall.first_try_rate) + "\n";
  out += "Average iterations: " + format_percent(report.overall.avg_iterations, 2) + "\n\n";

  std::vector<Row> rows;
  for (std::size_t i = 0; i < report.languages.size(); ++i) {
    const auto& g = report.by_language[i];
    rows.push_back({report.languages[i], std::to_string(g.instances), format_percent(g.tsr)});
  }
  rows.push_back({"Average", std::to_string(report.overall.instances), format_percent(report.overall.tsr)});
  out += table("TSR (%) per language", {"Language", "Instances", "TSR (%)"}, rows);
  out += "\n";

  Row header{"Language"};
  for (const auto v : report.variants) {
    header.emplace_back(corpus::display_name(v));
  }
  const bool has_base = !report.variants.empty() && report.variants.front() == corpus::VisibilityVariant::CodeOnly;
  auto variant_row = [&](const std::string& label, const std::vector<std::optional<GroupMetrics>>& cells) {
    Row row{label};
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!cells[j]) {
        row.emplace_back("n/a");
        continue;
      }
      auto cell = format_percent(cells[j]->tsr);
      if (j > 0 && has_base && cells[0]) {
        cell += " " + format_delta(cells[j]->tsr, cells[0]->tsr);
      }
      row.push_back(cell);
    }
    return row;
  };
  rows.clear();
  for (std::size_t i = 0; i < report.languages.size(); ++i) {
    rows.push_back(variant_row(report.languages[i], report.by_language_variant[i]));
  }
  std::vector<std::optional<GroupMetrics>> totals(report.by_variant.begin(), report.by_variant.end());
  rows.push_back(variant_row("All", totals));
  out += table("TSR (%) per visibility variant and language (deltas relative to CODE ONLY)", header, rows);

  for (std::size_t j = 0; j < report.variants.size(); ++j) {
    out += "\n";
    rows.clear();
    auto iteration_row = [](const std::string& label, const GroupMetrics& g) {
      return Row{label, format_percent(g.first_try_rate), format_percent(g.avg_iterations, 2),
                 format_percent(g.tsr) + " " + format_delta(g.tsr, g.first_try_rate)};
    };
    for (std::size_t i = 0; i < report.languages.size(); ++i) {
      if (const auto& cell = report.by_language_variant[i][j]) {
        rows.push_back(iteration_row(report.languages[i], *cell));
      }
    }
    rows.push_back(iteration_row("Total Average", report.by_variant[j]));
    out += table("Iteration efficiency (" + std::string(corpus::display_name(report.variants[j])) + ")",
                 {"Language", "First-Try (%)", "Avg Iterations", "Final TSR (%)"}, rows);
  }

  out += "\n";
  rows.clear();
  for (std::size_t i = 0; i < report.languages.size(); ++i) {
    rows.push_back(distribution_row(report.languages[i], report.failures_by_language[i]));
  }
  rows.push_back(distribution_row("Total", report.failures));
  Row dist_header{"Language", "Failed"};
  for (const auto c : taxonomy::kAllCategories) {
    dist_header.emplace_back(std::string(taxonomy::to_string(c)) + " (%)");
  }
  out += table("Failure category distribution (% of classified failures)", dist_header, rows);
  if (report.failures.failed == 0) {
    out += "No failed instances.\n";
  }
  if (report.failures.unclassified > 0) {
    out += "Unclassified failures: " + std::to_string(report.failures.unclassified) +
           " (excluded from the percentages)\n";
  }
  if (report.failures.pending > 0) {
    out += "Failures not yet classified: " + std::to_string(report.failures.pending) + "\n";
  }

  if (!report.not_applicable.empty()) {
    out += "\nNot applicable:\n";
    for (const auto& na : report.not_applicable) {
      out += "- " + na.task_id + " (" + std::string(corpus::to_string(na.variant)) + ")\n";
    }
  }
  return out;
}

json render_json(const MetricsReport& report) {
  json by_language = json::object();
  json by_language_variant = json::object();
  json failures_by_language = json::object();
  for (std::size_t i = 0; i < report.languages.size(); ++i) {
    const auto& lang = report.languages[i];
    by_language[lang] = group_json(report.by_language[i]);
    failures_by_language[lang] = distribution_json(report.failures_by_language[i]);
    json cells = json::object();
    for (std::size_t j = 0; j < report.variants.size(); ++j) {
      if (const auto& cell = report.by_language_variant[i][j]) {
        cells[std::string(corpus::to_string(report.variants[j]))] = group_json(*cell);
      }
    }
    by_language_variant[lang] = cells;
  }
  json by_variant = json::object();
  json variants = json::array();
  for (std::size_t j = 0; j < report.variants.size(); ++j) {
    const auto name = std::string(corpus::to_string(report.variants[j]));
    variants.push_back(name);
    by_variant[name] = group_json(report.by_variant[j]);
  }
  json not_applicable = json::array();
  for (const auto& na : report.not_applicable) {
    not_applicable.push_back({{"task_id", na.task_id}, {"variant", corpus::to_string(na.variant)}});
  }
  return {{"format_version", 1},
          {"overall", group_json(report.overall)},
          {"languages", report.languages},
          {"variants", variants},
          {"by_language", by_language},
          {"by_variant", by_variant},
          {"by_language_variant", by_language_variant},
          {"failure_distribution", {{"overall", distribution_json(report.failures)},
                                    {"by_language", failures_by_language}}},
          {"not_applicable", not_applicable}};
}

}  // namespace safedit::harness
