#pragma once

// Observability diagnostics for the backward march: how much of the
// initial midpoint state the window observation of q sees, with an
// explicit resolution-dependent remainder; plus the terminal-norm decay
// study for the two-phase controller.

#include <cstdint>
#include <vector>

#include "sks/hum.hpp"
#include "sks/system.hpp"

namespace sks {

// One relaxed-observability quotient: squared value norms of the first
// midpoint pair over (window observation of q) + exp(-C1/dt^{1/10})
// times the metric norm of the terminal data.
struct ObsRatioReport {
  double lhs = 0.0;
  double obs = 0.0;
  double remainder = 0.0;
  double ratio = 0.0;
};

ObsRatioReport obs_ratio(const StepOperator& step, const Field& pT, const Field& qT, double C1);

// Estimate of the best (largest) quotient: random sampling followed by
// generalized power iteration on the associated Rayleigh quotient. The
// per-step values are recorded; they are monotone nondecreasing, so the
// refined estimate always dominates the sampled one.
struct CTEstimate {
  double sampled_max = 0.0;
  double refined = 0.0;  // square root of the final Rayleigh value gives C_T
  std::vector<double> sample_ratios;
  std::vector<ObsRatioReport> sample_reports;  // term breakdown per sample
  std::vector<double> trace;  // Rayleigh values along the power iteration
};

CTEstimate estimate_CT(const StepOperator& step, double C1, int samples, int power_steps,
                       uint64_t seed, double inner_tol = 1e-8);

// Terminal-norm decay under the two-phase controller, swept over penalty
// levels and/or step counts at fixed space grid and horizon. The slope of
// log(final ratio) against log(sqrt(penalty)) is fitted over the points
// that have not yet hit the saturation floor.
struct DecayJob {
  int M = 64;
  PenaltyFn penalty;
};

struct DecayPoint {
  int M = 0;
  double dt = 0.0;
  double phi = 0.0;
  double sqrt_phi = 0.0;
  double final_ratio = 0.0;
  double cost_ratio = 0.0;  // control cost over data norm
  double mid_dual_norm = 0.0;
  double smoothing_ratio = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct DecayStudy {
  std::vector<DecayPoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  int points_used = 0;
  double floor_ratio = 0.0;  // ratio at the first saturated point; 0 when none saturated
  double fitted_CT = 0.0;    // max cost ratio over converged points
  bool all_converged = false;
};

DecayStudy decay_study(const SpaceOps& ops, const SystemParams& params, double T, double T0,
                       const Field& u0, const Field& v0, const std::vector<DecayJob>& jobs,
                       double cg_tol, int max_iter, int threads = 1);

}  // namespace sks
