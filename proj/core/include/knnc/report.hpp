#pragma once

#include <iosfwd>
#include <string>

#include "knnc/protocol.hpp"

namespace knnc {

/// Machine-readable report: one header line, then one tab-separated line per
/// method: method, avg, worst, std, n_runs, lambda, tau, k. Accuracies are
/// fractions in shortest round-trip decimal form. Per-run lambda/tau/k values
/// are comma-joined in run order; "-" marks a hyperparameter the method does
/// not use.
void write_report_tsv(std::ostream& out, const RunReport& report);

/// Human-readable table in percent: avg / worst / std per method.
void write_report_table(std::ostream& out, const RunReport& report);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace knnc
