#pragma once

#include <cstdint>

#include "thinfb/lattice.hpp"

namespace thinfb {

struct ScanOptions {
  double grid_h = 1.0 / 64;
  std::uint64_t seed = 1;
  bool parallel = true;
};

/// c(eps) = min over sampled X in B_1 \ P of (U(X + eps e_n)/U(X) - 1)/eps.
/// `sample_count` random points are added to the tensor grid.
double measure_gap_gain(double eps, int sample_count, const ScanOptions& opt = {});

/// C(delta_bar) = max over sampled (t, z) in closed B_1 \ B_delta_bar, off P,
/// of (U(t + eps, z)/U(t, z) - 1)/eps. Requires 0 < 2 eps < delta_bar < 1.
double measure_translation_ratio(double eps, double delta_bar, int sample_count = 10000,
                                 const ScanOptions& opt = {});

struct FlatnessConversion {
  double K = 0.0;            // smallest K found (upper end of the final bracket)
  bool satisfiable = false;  // false if the sandwich fails even at K_max
  double sup_diff = 0.0;     // max |g - U| on the lattice part of B_1
};

/// Smallest K with U(X - K delta e_n) <= g <= U(X + K delta e_n) on all lattice
/// points of B_1, by bisection on [0, K_max].
FlatnessConversion verify_flatness_conversion(const GridField& g, double delta, double K_max = 64.0);

}  // namespace thinfb
