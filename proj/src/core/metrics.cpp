#include "core/metrics.hpp"

#include <cstdio>
#include <json.hpp>

#include "core/error.hpp"

namespace scnn {

using nlohmann::json;

namespace {

void check_square(const std::vector<std::vector<int64_t>>& cm) {
  if (cm.empty()) raise(ErrorCode::shape, "confusion matrix is empty");
  for (const auto& row : cm) {
    if (row.size() != cm.size()) raise(ErrorCode::shape, "confusion matrix must be square");
    for (int64_t v : row)
      if (v < 0) raise(ErrorCode::data, "confusion matrix counts must be non-negative");
  }
}

} // namespace

std::vector<ClassMetrics> classification_report(const std::vector<std::vector<int64_t>>& cm) {
  check_square(cm);
  const size_t n = cm.size();
  std::vector<ClassMetrics> out(n);
  for (size_t c = 0; c < n; ++c) {
    int64_t row_sum = 0, col_sum = 0;
    for (size_t j = 0; j < n; ++j) {
      row_sum += cm[c][j];
      col_sum += cm[j][c];
    }
    ClassMetrics& m = out[c];
    m.support = row_sum;
    if (col_sum > 0)
      m.precision = static_cast<double>(cm[c][c]) / static_cast<double>(col_sum);
    else
      m.zero_denominator = true;
    if (row_sum > 0)
      m.recall = static_cast<double>(cm[c][c]) / static_cast<double>(row_sum);
    else
      m.zero_denominator = true;
    if (m.precision + m.recall > 0)
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return out;
}

std::vector<std::vector<double>> normalize_cm(const std::vector<std::vector<int64_t>>& cm) {
  check_square(cm);
  std::vector<std::vector<double>> out(cm.size(), std::vector<double>(cm.size(), 0.0));
  for (size_t i = 0; i < cm.size(); ++i) {
    int64_t row_sum = 0;
    for (int64_t v : cm[i]) row_sum += v;
    if (row_sum == 0) continue;
    for (size_t j = 0; j < cm.size(); ++j)
      out[i][j] = static_cast<double>(cm[i][j]) / static_cast<double>(row_sum);
  }
  return out;
}

EvalReport report_from_confusion(std::vector<std::vector<int64_t>> cm) {
  EvalReport report;
  report.per_class = classification_report(cm);
  report.normalized = normalize_cm(cm);
  int64_t total = 0, correct = 0;
  for (size_t i = 0; i < cm.size(); ++i) {
    correct += cm[i][i];
    for (int64_t v : cm[i]) total += v;
  }
  report.total = total;
  report.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  double sp = 0, sr = 0, sf = 0;
  for (const ClassMetrics& m : report.per_class) {
    sp += m.precision;
    sr += m.recall;
    sf += m.f1;
  }
  const double n = static_cast<double>(report.per_class.size());
  report.macro_precision = sp / n;
  report.macro_recall = sr / n;
  report.macro_f1 = sf / n;
  report.confusion = std::move(cm);
  return report;
}

std::string report_to_text(const EvalReport& report, const std::vector<std::string>& names) {
  if (names.size() != report.per_class.size())
    raise(ErrorCode::shape, "report_to_text: one name per class required");
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %9s %9s %9s %9s\n", "Class", "Precision", "Recall", "F1-score",
                "Support");
  out += line;
  for (size_t c = 0; c < names.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    std::snprintf(line, sizeof(line), "%-14s %9.2f %9.2f %9.2f %9lld%s\n", names[c].c_str(), m.precision,
                  m.recall, m.f1, static_cast<long long>(m.support), m.zero_denominator ? "  *" : "");
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-14s %9.2f %9.2f %9.2f %9lld\n", "Average", report.macro_precision,
                report.macro_recall, report.macro_f1, static_cast<long long>(report.total));
  out += line;
  std::snprintf(line, sizeof(line), "\nAccuracy %.4f   Mean loss %.4f   Samples %lld\n", report.accuracy,
                report.mean_loss, static_cast<long long>(report.total));
  out += line;
  if (!report.per_class.empty()) {
    bool any_flag = false;
    for (const ClassMetrics& m : report.per_class) any_flag = any_flag || m.zero_denominator;
    if (any_flag) out += "* zero-denominator metric reported as 0\n";
  }
  return out;
}

std::string report_to_json(const EvalReport& report, const std::vector<std::string>& names) {
  json j;
  j["accuracy"] = report.accuracy;
  j["mean_loss"] = report.mean_loss;
  j["total"] = report.total;
  j["classes"] = names;
  j["confusion"] = report.confusion;
  j["normalized"] = report.normalized;
  json per = json::array();
  for (size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassMetrics& m = report.per_class[c];
    per.push_back({{"class", names[c]},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support},
                   {"zero_denominator", m.zero_denominator}});
  }
  j["per_class"] = std::move(per);
  j["macro"] = {{"precision", report.macro_precision},
                {"recall", report.macro_recall},
                {"f1", report.macro_f1}};
  return j.dump(2);
}

} // namespace scnn
