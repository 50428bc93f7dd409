#pragma once

// Reproducible random draws. The generator is pinned to mt19937_64 with
// explicit uniform-to-double and Box-Muller conversions, so a (seed, tag)
// pair yields the same stream on any conforming platform; none of the
// distribution wrappers from <random> (whose output is implementation
// defined) are used. Substreams are derived from a string tag so that
// independent experiments can share one user-facing seed without their
// draw order coupling.

#include <cstdint>
#include <random>
#include <string_view>

#include "sks/timegrid.hpp"

namespace sks {

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Independent generator for a named purpose under the same master seed.
  static Rng stream(uint64_t seed, std::string_view tag);

  // Uniform on [0, 1) with 53 significant bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (both outputs used, in order).
  double normal();

  // Interior nodal values, i.i.d. standard normal.
  Field normal_field(int n);

  // Random low-mode sine combination on the interior nodes of (0,1);
  // smooth enough that discrete derivatives stay tame.
  Field smooth_field(int n, int modes = 6);

  // Like smooth_field but with a flat modal envelope, so every sine mode
  // up to the cutoff carries comparable energy.
  Field flat_field(int n, int modes = 6);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sks
