#pragma once

#include <string>

#include "multilc/estimators.hpp"
#include "multilc/simulate.hpp"

namespace multilc {

// Serializes a fit (with the command line that produced it) as a JSON
// document, schema_version 1. With `extended`, posterior matrices, the
// coefficient covariance matrix, and the coefficient names are included.
// Rendering functions consume this document, so re-rendering a saved
// artifact reproduces the original report exactly.
std::string fit_to_json(const FitResult& fit, const std::string& call, bool extended);

// Parses a generating-model description for the simulator. Throws InputError
// on malformed documents.
TrueModel parse_true_model(const std::string& text);
TrueModel load_true_model(const std::string& path);

}  // namespace multilc
