#include "wr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wr/error.hpp"

namespace wr {

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {

std::string stamp_line(const ReportStamp& s) {
  return "# seed=" + std::to_string(s.seed) + " config=" + s.config_hash + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

std::string report_csv(const ExperimentReport& r, const ReportStamp& stamp) {
  std::string out = stamp_line(stamp);
  out += "metric,granularity,config-hash,value\n";
  const std::string g(granularity_name(r.granularity));
  for (const auto& [name, value] : r.metrics) {
    out += name + "," + g + "," + stamp.config_hash + "," + format_value(value) + "\n";
  }
  return out;
}

std::string report_plot_data(const ExperimentReport& r, const ReportStamp& stamp) {
  std::string out = stamp_line(stamp);
  for (std::size_t c = 0; c < r.curves.size(); ++c) {
    const Curve& curve = r.curves[c];
    if (c) out += "\n";
    out += "# curve " + curve.name + " (" + curve.x_label + " vs " + curve.y_label + ")\n";
    for (const auto& [x, y] : curve.points) out += format_value(x) + " " + format_value(y) + "\n";
  }
  return out;
}

std::string report_summary(const ExperimentReport& r, const ReportStamp& stamp) {
  std::ostringstream out;
  out << stamp_line(stamp);
  out << "experiment: " << r.kind << "  granularity: " << granularity_name(r.granularity) << "\n\n";

  // Table row in the usual layout: method, mAP, Top-x columns.
  std::vector<std::pair<std::string, double>> headline;
  for (const auto& [k, v] : r.metrics) {
    if (k == "mAP" || (k.rfind("top", 0) == 0 && k.find('_') == std::string::npos)) headline.emplace_back(k, v);
  }
  if (!headline.empty()) {
    std::string header = pad("Method", 12), row = pad(stamp.encoder.empty() ? "-" : stamp.encoder, 12);
    for (const auto& [k, v] : headline) {
      std::string label = k == "mAP" ? "mAP" : "Top-" + k.substr(3);
      header += pad(label, 10);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
      row += pad(buf, 10);
    }
    out << header << "\n" << row << "\n\n";
  }
  std::size_t width = 0;
  for (const auto& [k, v] : r.metrics) width = std::max(width, k.size());
  for (const auto& [k, v] : r.metrics) out << pad(k, width + 2) << format_value(v) << "\n";
  if (!r.line_count_histogram.empty()) {
    out << "\npages with fewer than n lines:\n";
    for (const auto& [n, pct] : r.line_count_histogram) out << "  n=" << n << "  " << format_value(pct) << " %\n";
  }
  if (!r.notes.empty()) {
    out << "\nnotes:\n";
    for (const auto& n : r.notes) out << "  " << n << "\n";
  }
  return out.str();
}

void write_report(const std::filesystem::path& dir, const std::string& name, const ExperimentReport& r,
                  const ReportStamp& stamp) {
  std::filesystem::create_directories(dir);
  write_text(dir / (name + ".csv"), report_csv(r, stamp));
  if (!r.curves.empty()) write_text(dir / (name + ".plot.txt"), report_plot_data(r, stamp));
  write_text(dir / (name + ".summary.txt"), report_summary(r, stamp));
}

}  // namespace wr
