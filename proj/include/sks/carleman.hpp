#pragma once

// Weight functions for the weighted (observability-oriented) estimates,
// plus the audits and identity checks that keep them honest.
//
// Spatial profile: a quartic bump beta(x) = x(1-x) g(x) with g a positive
// quadratic, shaped so that beta is positive inside (0,1), vanishes at
// the ends, and has its only critical point at the midpoint of a given
// window. Being a polynomial, all derivatives used by the conjugation
// identities are exact.
//
// Temporal profile: theta(t) = ((t + delta T)(T + delta T - t))^{-m},
// finite on [0, T + dt/2] as long as dt/2 < delta T, blowing up just
// outside both ends of the horizon.
//
// Combined weights: phi(x) = exp(lambda (c2 + beta)) - exp(lambda c1)
// (negative by construction, audited), s = tau theta, r = exp(s phi),
// rho = 1/r.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sks/spacedisc.hpp"
#include "sks/timegrid.hpp"

namespace sks {

class BumpPoly {
 public:
  double eval(double x) const { return deriv(0, x); }
  double deriv(int order, double x) const;  // order 0..4, exact

  double sup() const { return sup_; }              // audited max over [0,1]
  double delta_crit() const { return delta_crit_; }  // audited min |beta'| outside the window
  const ObservationWindow& window() const { return window_; }
  const std::array<double, 5>& coefficients() const { return coef_; }

  friend BumpPoly build_bump(const ObservationWindow& w0, int audit_points);

 private:
  std::array<double, 5> coef_{};  // monomial coefficients, constant term first
  double sup_ = 0.0;
  double delta_crit_ = 0.0;
  ObservationWindow window_;
};

// Construct and audit the bump for a window strictly inside (0,1).
// Throws with a diagnostic when no admissible quadratic factor is found
// (windows squeezed against the boundary can fail).
BumpPoly build_bump(const ObservationWindow& w0, int audit_points = 10001);

struct WeightParams {
  double m = 1.0;      // blow-up exponent of theta, at least 1/3
  double k = 2.0;      // level shift factor, k > m
  double lambda = 1.0;
  double tau = 2.0;
  double delta = 0.25;  // margin of the extended time interval, in (0, 1/2]
  double T = 1.0;
  double eps0 = 1.0;  // smallness levels used by the parameter ledger
  double eps1 = 1.0;

  void validate() const;
};

class CarlemanWeights {
 public:
  CarlemanWeights(BumpPoly beta, WeightParams p);

  const BumpPoly& beta() const { return beta_; }
  const WeightParams& params() const { return p_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }

  double theta(double t) const;
  double theta_d1(double t) const;
  double theta_d2(double t) const;

  double phi(double x) const;              // negative on [0,1], audited
  double phi_exp(double x) const;          // exp(lambda (c2 + beta(x)))
  double phi_exp_deriv(int order, double x) const;  // order 0..4, exact chain rule

  double s(double t) const { return p_.tau * theta(t); }
  double r(double t, double x) const;
  double rho(double t, double x) const;

 private:
  void check_domain(double t) const;
  BumpPoly beta_;
  WeightParams p_;
  double c1_ = 0.0, c2_ = 0.0;
};

// ---------------------------------------------------------------------
// Audits and fitted-constant checks. None of these asserts a hard-coded
// constant from the underlying estimates; they fit the constant, verify
// the shape of the bound (sign, decay under refinement), and report.

struct ThetaBoundsReport {
  double slope_C = 0.0;       // smallest C with |theta'| <= C T theta^{1+1/m} on [0,T]
  double max_theta = 0.0;     // audited max over [0,T]
  double max_theta_bound = 0.0;   // (delta^m T^{2m})^{-1}
  double max_theta_ext = 0.0;     // audited max over [0, T+dt]
  double max_theta_ext_bound = 0.0;  // 2^m (delta^m T^{2m})^{-1}
  bool dt_hypothesis_ok = false;  // dt <= (delta T)^m / 2^m and dt <= delta T / 2
  bool pass = false;
};

ThetaBoundsReport check_theta_bounds(const CarlemanWeights& w, double dt,
                                     int audit_points = 1001);

struct FittedBound {
  std::string name;
  double fitted_C = 0.0;   // smallest constant making the bound hold on the grid
  double max_residual = 0.0;  // worst raw excess (0 when the bound holds with C = 0)
  bool precondition_ok = true;
};

struct WeightLemmasReport {
  // Product of the backward-shifted weight and the difference quotient of
  // its reciprocal, against the predicted leading term; the fitted factor
  // multiplies dt (tau delta^{-m-2} T^{-2m-2} + tau^2 delta^{-2m-2} T^{-4m-2}).
  FittedBound reciprocal_drift;
  double reciprocal_drift_max_abs = 0.0;
  // Difference quotients of theta powers, ell = 1..4.
  std::vector<FittedBound> power_diff;
  // Backward-vs-forward shift comparison of theta powers, ell = 1..4.
  std::vector<FittedBound> power_shift;
};

WeightLemmasReport check_discrete_weight_lemmas(const CarlemanWeights& w, const TimeGrid& tg,
                                                int x_samples = 41);

// Parameter ledger: the smallness and lower-bound conditions the weighted
// estimates need, evaluated with the actual numbers and reported line by
// line.
struct LedgerEntry {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool ok = false;
};

struct ParameterLedger {
  std::vector<LedgerEntry> entries;
  bool all_ok = false;
};

ParameterLedger parameter_ledger(const WeightParams& p, double dt, double tau1 = 1.0);

// Resolution-coupled parameter scaling: given base levels (tau2, delta1)
// and a step size, produce (tau, delta) such that the tenth-power
// smallness condition is saturated exactly and tau/(delta^m T^{2m})
// equals (eps0/dt)^{1/10}.
struct ScaledParams {
  double tau = 0.0;
  double delta = 0.0;
  double dt_ref = 0.0;  // reference step at which delta would equal delta1
};

ScaledParams scale_parameters(double T, double m, double tau2, double delta1, double eps0,
                              double dt);

// Spatial conjugation identity: the fourth difference of (rho z),
// multiplied back by r, against the expanded polynomial-in-(s, lambda)
// form, with s frozen. Discrete derivatives of z appear on both sides, so
// the residual is pure stencil error and must shrink at second order.
struct ConjugationReport {
  double max_abs = 0.0;  // worst nodal residual inside the measured band
  double scale = 0.0;    // magnitude of the largest term entering the identity
  double rel = 0.0;
  int nodes_measured = 0;
};

ConjugationReport conjugation_identity_residual(const CarlemanWeights& w, const SpaceOps& ops,
                                                double s_frozen, const Field& z,
                                                double margin = 0.05);

// Temporal conjugation: -r(t-) D(rho z) against the drift expansion in
// terms of Dz and theta'. The remainder is fitted against
// dt tau^2 delta^{-2m-2} T^{-4m-2} sup|z| and must halve with dt.
struct TimeConjugationReport {
  double max_abs_remainder = 0.0;
  double fitted_K = 0.0;
  double remainder_scale = 0.0;
};

TimeConjugationReport time_conjugation_residual(const CarlemanWeights& w, const TimeGrid& tg,
                                                const DualSeq<double>& z, double x);

// Weighted space-time functionals of a backward trajectory pair and the
// window observation term; the ratio is recorded for experiments, never
// asserted against a constant.
struct CarlemanFunctionals {
  double I_H = 0.0;
  double I_KS = 0.0;
  double W_H = 0.0;
  double W_KS = 0.0;
  double obs = 0.0;
  double ratio = 0.0;  // (I_H + I_KS) / (obs + (W_H + W_KS)/dt)
};

CarlemanFunctionals carleman_functionals(const CarlemanWeights& w, const SpaceOps& ops,
                                         const TimeGrid& tg, const DualSeq<Field>& p,
                                         const DualSeq<Field>& q,
                                         const ObservationWindow& window);

}  // namespace sks
