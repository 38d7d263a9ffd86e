#pragma once

#include <string>
#include <vector>

#include "core/train.hpp"

namespace scnn {

// Two stacked panels (loss on top, accuracy below), train vs validation
// curves, epochs where the scheduled rate changes marked with dashed red
// vertical lines. Pure text output with no timestamps, so equal histories
// give byte-identical files.
std::string render_history_svg(const std::vector<HistoryRow>& rows);

void plot_history_file(const std::string& history_csv_path, const std::string& out_svg_path);

} // namespace scnn
