#pragma once

// Run configuration: one JSON document describing the system, grids,
// weight parameters, penalty, solver options, experiment settings, and
// initial data. Every field has a default, so {} is a valid config.
// Parse errors carry the offending field path for exact diagnostics.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sks/carleman.hpp"
#include "sks/hum.hpp"
#include "sks/rng.hpp"
#include "sks/spacedisc.hpp"
#include "sks/system.hpp"

namespace sks {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct InitSpec {
  enum class Kind { Zero, Sine, Random, Noise, Power };
  Kind kind = Kind::Sine;
  double amplitude = 1.0;
  int mode = 1;         // sine wavenumber
  int modes = 6;        // mode count for the random and power kinds
  double envelope = 1.0;  // spectral decay exponent of the power kind
};

struct RunConfig {
  SystemParams params;
  int N = 49;
  double T = 1.0;
  int M = 32;

  WeightParams weights;
  bool auto_scale = false;  // derive tau and delta from (tau2, delta1, dt)
  double tau2 = 2.0;
  double delta1 = 0.25;

  PenaltyFn penalty;
  HumOptions hum;
  double T0 = 0.5;

  double C1 = 1.0;       // observability remainder rate
  int samples = 8;       // observability sample count
  int power_steps = 6;   // power-iteration refinement steps

  std::vector<int> M_sweep;           // decay study over dt at fixed penalty
  std::vector<double> phi_targets;    // decay study over phi at fixed M

  InitSpec init_u, init_v;
  uint64_t seed = 20260822;

  // The parsed document with defaults filled in, for the run manifest.
  nlohmann::json echo;
};

RunConfig parse_config_json(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

Field make_initial(const InitSpec& spec, const SpaceGrid& grid, Rng& rng);

}  // namespace sks
