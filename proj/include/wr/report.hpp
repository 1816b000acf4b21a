#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "wr/experiments.hpp"

namespace wr {

/// Provenance stamped into every output file.
struct ReportStamp {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string encoder;  // method column of the summary table
};

/// `# seed=... config=...` then `metric,granularity,config-hash,value` rows.
std::string report_csv(const ExperimentReport& r, const ReportStamp& stamp);
/// One block per curve: `# curve <name> (<x label> vs <y label>)`, then `x y`
/// lines, blocks separated by a blank line.
std::string report_plot_data(const ExperimentReport& r, const ReportStamp& stamp);
/// Fixed-width text table of the headline metrics plus notes.
std::string report_summary(const ExperimentReport& r, const ReportStamp& stamp);

/// Writes <name>.csv, <name>.plot.txt (when there are curves) and
/// <name>.summary.txt into `dir`.
void write_report(const std::filesystem::path& dir, const std::string& name, const ExperimentReport& r,
                  const ReportStamp& stamp);

/// Fixed-precision rendering used by every report.
std::string format_value(double v);

}  // namespace wr
