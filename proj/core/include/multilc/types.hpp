#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace multilc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

// Bad user input: malformed files, invalid options, impossible requests.
// The command line tool maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Estimation failed numerically: singular systems that resist damping,
// non-finite likelihoods, and similar. Mapped to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A violated internal invariant. Indicates a bug, not bad input.
class InternalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace multilc
