#pragma once

#include <string>

namespace multilc {

// Renders the human-readable model summary from a fit JSON document. The
// output is a pure function of the document, so re-rendering a saved
// artifact reproduces the originally printed report byte for byte.
std::string render_summary(const std::string& fit_json);

}  // namespace multilc
