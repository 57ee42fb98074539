#pragma once

#include <map>
#include <string>

namespace thinfb {

/// Outcome of a sampled inequality check.
struct Certificate {
  std::string id;
  std::string region;
  long samples = 0;
  double worst_margin = 0.0;
  bool pass = false;
  std::map<std::string, double> constants;
};

}  // namespace thinfb
