#include "knnc/report.hpp"

#include <charconv>
#include <cstdio>
#include <ostream>

namespace knnc {

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

namespace {

template <typename T, typename Format>
std::string join_runs(const std::vector<std::optional<T>>& values, Format format) {
  bool any = false;
  for (const auto& v : values) any = any || v.has_value();
  if (!any) return "-";
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += values[i] ? format(*values[i]) : std::string("-");
  }
  return out;
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * fraction);
  return buf;
}

}  // namespace

void write_report_tsv(std::ostream& out, const RunReport& report) {
  out << "method\tavg\tworst\tstd\tn_runs\tlambda\ttau\tk\n";
  for (const auto& row : report.rows) {
    out << method_label(row.mode) << '\t' << format_double(row.stats.avg) << '\t' << format_double(row.stats.worst)
        << '\t' << format_double(row.stats.std_dev) << '\t' << row.accuracies.size() << '\t'
        << join_runs(row.lambdas, format_double) << '\t' << join_runs(row.taus, format_double) << '\t'
        << join_runs(row.ks, [](std::size_t k) { return std::to_string(k); }) << '\n';
  }
}

void write_report_table(std::ostream& out, const RunReport& report) {
  char line[128];
  std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %6s\n", "Method", "Avg", "Worst", "Std", "Runs");
  out << line;
  for (const auto& row : report.rows) {
    std::snprintf(line, sizeof(line), "%-14s %8s %8s %8s %6zu\n", std::string(method_label(row.mode)).c_str(),
                  percent(row.stats.avg).c_str(), percent(row.stats.worst).c_str(),
                  percent(row.stats.std_dev).c_str(), row.accuracies.size());
    out << line;
  }
}

}  // namespace knnc
