#pragma once

#include <string>
#include <vector>

namespace multilc {

// Grouped bar chart of the response profiles in a fit document: one group of
// T bars per item, bar height = probability of a non-reference response
// (1 - phi of the first category). Standalone SVG, 960 x 640. Class labels
// default to C1..CT; when given, their count must match T. With
// `horizontal_labels` unset, item labels are rotated vertically.
std::string render_svg(const std::string& fit_json, bool horizontal_labels,
                       const std::vector<std::string>& class_labels);

}  // namespace multilc
