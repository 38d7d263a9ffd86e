#include "core/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "core/io.hpp"

namespace scnn {

namespace {

constexpr double kWidth = 760, kPanelHeight = 260, kGap = 50;
constexpr double kLeft = 64, kRight = 24, kTop = 28, kBottom = 40;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct Panel {
  double y0;          // top of the plotting area
  double ymin, ymax;  // value range
  double x_of(double epoch, double emin, double emax) const {
    const double span = std::max(1.0, emax - emin);
    return kLeft + (epoch - emin) / span * (kWidth - kLeft - kRight);
  }
  double y_of(double v) const {
    const double span = std::max(1e-12, ymax - ymin);
    return y0 + (ymax - v) / span * kPanelHeight;
  }
};

void polyline(std::string& svg, const Panel& p, const std::vector<HistoryRow>& rows, double emin,
              double emax, double HistoryRow::*field, const char* color, const char* name) {
  svg += "    <polyline class=\"" + std::string(name) + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i) svg += " ";
    svg += fmt(p.x_of(static_cast<double>(rows[i].epoch), emin, emax)) + "," +
           fmt(p.y_of(rows[i].*field));
  }
  svg += "\"/>\n";
}

void axes(std::string& svg, const Panel& p, double emin, double emax, const char* ylabel) {
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double ytop = p.y0, ybot = p.y0 + kPanelHeight;
  svg += "    <line stroke=\"#333\" x1=\"" + fmt(x0) + "\" y1=\"" + fmt(ybot) + "\" x2=\"" + fmt(x1) +
         "\" y2=\"" + fmt(ybot) + "\"/>\n";
  svg += "    <line stroke=\"#333\" x1=\"" + fmt(x0) + "\" y1=\"" + fmt(ytop) + "\" x2=\"" + fmt(x0) +
         "\" y2=\"" + fmt(ybot) + "\"/>\n";
  svg += "    <text class=\"axis-label\" x=\"" + fmt((x0 + x1) / 2) + "\" y=\"" + fmt(ybot + 32) +
         "\" text-anchor=\"middle\">epoch</text>\n";
  svg += "    <text class=\"axis-label\" x=\"" + fmt(x0 - 44) + "\" y=\"" + fmt((ytop + ybot) / 2) +
         "\" text-anchor=\"middle\" transform=\"rotate(-90 " + fmt(x0 - 44) + " " +
         fmt((ytop + ybot) / 2) + ")\">" + ylabel + "</text>\n";
  // value ticks at min/max, epoch ticks at ends
  svg += "    <text class=\"tick\" x=\"" + fmt(x0 - 6) + "\" y=\"" + fmt(ybot + 4) +
         "\" text-anchor=\"end\">" + fmt(p.ymin) + "</text>\n";
  svg += "    <text class=\"tick\" x=\"" + fmt(x0 - 6) + "\" y=\"" + fmt(ytop + 4) +
         "\" text-anchor=\"end\">" + fmt(p.ymax) + "</text>\n";
  svg += "    <text class=\"tick\" x=\"" + fmt(x0) + "\" y=\"" + fmt(ybot + 16) +
         "\" text-anchor=\"middle\">" + fmt(emin) + "</text>\n";
  svg += "    <text class=\"tick\" x=\"" + fmt(x1) + "\" y=\"" + fmt(ybot + 16) +
         "\" text-anchor=\"middle\">" + fmt(emax) + "</text>\n";
}

void lr_change_lines(std::string& svg, const Panel& p, const std::vector<HistoryRow>& rows, double emin,
                     double emax) {
  svg += "    <g class=\"lr-changes\">\n";
  for (size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].lr == rows[i - 1].lr) continue;
    const double x = p.x_of(static_cast<double>(rows[i].epoch), emin, emax);
    svg += "      <line stroke=\"#d33\" stroke-dasharray=\"4 3\" x1=\"" + fmt(x) + "\" y1=\"" +
           fmt(p.y0) + "\" x2=\"" + fmt(x) + "\" y2=\"" + fmt(p.y0 + kPanelHeight) + "\"/>\n";
  }
  svg += "    </g>\n";
}

} // namespace

std::string render_history_svg(const std::vector<HistoryRow>& rows) {
  if (rows.empty()) raise(ErrorCode::data, "plot: history has no rows");
  const double emin = static_cast<double>(rows.front().epoch);
  const double emax = static_cast<double>(rows.back().epoch);

  double loss_min = rows[0].train_loss, loss_max = rows[0].train_loss;
  for (const HistoryRow& r : rows) {
    loss_min = std::min({loss_min, r.train_loss, r.val_loss});
    loss_max = std::max({loss_max, r.train_loss, r.val_loss});
  }
  if (loss_max - loss_min < 1e-9) loss_max = loss_min + 1.0;

  Panel loss{kTop, loss_min, loss_max};
  Panel acc{kTop + kPanelHeight + kGap, 0.0, 1.0};
  const double total_h = kTop + 2 * kPanelHeight + kGap + kBottom;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
         fmt(total_h) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(total_h) + "\">\n";
  svg += "  <style>text{font-family:sans-serif;font-size:12px}.tick{font-size:10px;fill:#555}"
         ".axis-label{font-size:12px;fill:#111}</style>\n";
  svg += "  <g id=\"loss-curves\">\n";
  svg += "    <text x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop - 10) + "\">loss (train vs validation)</text>\n";
  axes(svg, loss, emin, emax, "loss");
  lr_change_lines(svg, loss, rows, emin, emax);
  polyline(svg, loss, rows, emin, emax, &HistoryRow::train_loss, "#1f77b4", "train-loss");
  polyline(svg, loss, rows, emin, emax, &HistoryRow::val_loss, "#ff7f0e", "val-loss");
  svg += "  </g>\n";
  svg += "  <g id=\"accuracy-curves\">\n";
  svg += "    <text x=\"" + fmt(kLeft) + "\" y=\"" + fmt(acc.y0 - 10) +
         "\">accuracy (train vs validation)</text>\n";
  axes(svg, acc, emin, emax, "accuracy");
  lr_change_lines(svg, acc, rows, emin, emax);
  polyline(svg, acc, rows, emin, emax, &HistoryRow::train_acc, "#1f77b4", "train-acc");
  polyline(svg, acc, rows, emin, emax, &HistoryRow::val_acc, "#ff7f0e", "val-acc");
  svg += "  </g>\n";
  svg += "  <g id=\"legend\">\n";
  svg += "    <rect x=\"" + fmt(kWidth - 180) + "\" y=\"6\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>"
         "<text x=\"" + fmt(kWidth - 166) + "\" y=\"15\">train</text>\n";
  svg += "    <rect x=\"" + fmt(kWidth - 120) + "\" y=\"6\" width=\"10\" height=\"10\" fill=\"#ff7f0e\"/>"
         "<text x=\"" + fmt(kWidth - 106) + "\" y=\"15\">validation</text>\n";
  svg += "  </g>\n";
  svg += "</svg>\n";
  return svg;
}

void plot_history_file(const std::string& history_csv_path, const std::string& out_svg_path) {
  std::string text;
  try {
    text = read_text_file(history_csv_path);
  } catch (const Error& e) {
    raise(ErrorCode::data, e.what());
  }
  write_text_file_atomic(out_svg_path, render_history_svg(history_from_csv(text)));
}

} // namespace scnn
