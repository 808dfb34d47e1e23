#pragma once

// Results bundle serialization and cross-method tables.

#include <span>
#include <string>
#include <string_view>

#include "frozencil/runner.hpp"

namespace frozencil {

inline constexpr int kReportVersion = 1;

enum class ReportFormat { kJson, kCsv, kMarkdown };

ReportFormat parse_report_format(std::string_view word);

/// Deterministic JSON text (sorted keys, two-space indent). Identical inputs
/// produce byte-identical output.
std::string bundle_to_json(const ResultsBundle& bundle);
/// Throws Error(kFormat) on schema violations.
ResultsBundle bundle_from_json(std::string_view text);

/// json: array of bundles. csv: one row per (method, dataset, seed).
/// markdown: one row per method, BAAC / F column pairs per dataset, percent.
std::string render_report(std::span<const ResultsBundle> bundles, ReportFormat format);

}  // namespace frozencil
