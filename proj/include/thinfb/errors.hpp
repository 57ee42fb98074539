#pragma once

#include <stdexcept>
#include <string>

namespace thinfb {

/// Evaluation requested at a point where the quantity is undefined (r = 0 on L).
class SingularPointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A stencil leaves the lattice or touches the zero plate.
class StencilError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Root bracket without sign change.
class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares fit residual above threshold, or too few fit points.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; `path` is the offending JSON key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace thinfb
