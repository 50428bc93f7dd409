#include "sks/rng.hpp"

#include <cmath>
#include <numbers>

namespace sks {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Rng Rng::stream(uint64_t seed, std::string_view tag) {
  return Rng(splitmix64(seed ^ splitmix64(fnv1a(tag))));
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1); u1 is flipped away from zero so the log
  // is always finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

Field Rng::normal_field(int n) {
  Field f(n);
  for (int i = 0; i < n; ++i) f[i] = normal();
  return f;
}

Field Rng::smooth_field(int n, int modes) {
  Field f = Field::Zero(n);
  const double h = 1.0 / static_cast<double>(n + 1);
  for (int k = 1; k <= modes; ++k) {
    const double a = normal() / static_cast<double>(k);
    for (int i = 0; i < n; ++i)
      f[i] += a * std::sin(k * std::numbers::pi * (i + 1) * h);
  }
  return f;
}

Field Rng::flat_field(int n, int modes) {
  Field f = Field::Zero(n);
  const double h = 1.0 / static_cast<double>(n + 1);
  for (int k = 1; k <= modes; ++k) {
    const double a = normal();
    for (int i = 0; i < n; ++i)
      f[i] += a * std::sin(k * std::numbers::pi * (i + 1) * h);
  }
  return f;
}

}  // namespace sks
