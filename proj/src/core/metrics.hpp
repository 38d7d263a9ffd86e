#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scnn {

struct ClassMetrics {
  double precision{0}, recall{0}, f1{0};
  int64_t support{0};
  bool zero_denominator{false}; // precision (or recall) forced to 0
};

struct EvalReport {
  std::vector<std::vector<int64_t>> confusion; // rows = true class
  std::vector<std::vector<double>> normalized; // row-stochastic
  std::vector<ClassMetrics> per_class;
  double macro_precision{0}, macro_recall{0}, macro_f1{0};
  double accuracy{0};
  double mean_loss{0};
  int64_t total{0};
};

// precision = diag/column sum, recall = diag/row sum, F1 the harmonic mean;
// zero denominators give 0 with a flag; support is the row sum; the macro
// average is the unweighted mean over classes.
std::vector<ClassMetrics> classification_report(const std::vector<std::vector<int64_t>>& cm);

// Each nonzero row divided by its sum; zero rows stay zero.
std::vector<std::vector<double>> normalize_cm(const std::vector<std::vector<int64_t>>& cm);

// Fills everything derived from the counts (normalized matrix, per-class
// metrics, macro averages, accuracy = trace/total). mean_loss is left to the
// caller.
EvalReport report_from_confusion(std::vector<std::vector<int64_t>> cm);

std::string report_to_text(const EvalReport& report, const std::vector<std::string>& names);
std::string report_to_json(const EvalReport& report, const std::vector<std::string>& names);

} // namespace scnn
