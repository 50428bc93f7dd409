#pragma once

// Implicit Euler march for the coupled pair on (0,1): a convected heat
// component u driven by v, and a fourth-order stabilized component v
// driven by u plus a localized control,
//
//   (u^{n+1} - u^n)/dt - Gamma u_xx^{n+1} + c u_x^{n+1}                    = v^{n+1}
//   (v^{n+1} - v^n)/dt + gamma v_xxxx^{n+1} + v_xxx^{n+1} + a v_xx^{n+1}  = u^{n+1} + mask * h^{n+1/2}
//
// with value boundary conditions on u and value-plus-slope conditions on
// v. Both equations are advanced by one sparse factorization of the block
// step matrix; the backward (adjoint) march solves with its exact
// transpose, so the discrete duality pairing closes to roundoff.

#include <cstdint>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "sks/spacedisc.hpp"
#include "sks/timegrid.hpp"

namespace sks {

struct SystemParams {
  double Gamma = 1e-2;  // diffusivity of the heat component
  double c = 1e-2;      // transport speed of the heat component
  double gamma = 1e-3;  // fourth-order coefficient
  double a = 1e-2;      // anti-diffusive second-order coefficient
  ObservationWindow omega{0.3, 0.8};

  void validate() const;
};

struct ForwardTrajectory {
  PrimalSeq<Field> u, v;
};

struct AdjointTrajectory {
  DualSeq<Field> p, q;  // indexed by midpoints; at_half(M) holds the terminal data
};

class StepOperator {
 public:
  StepOperator(const SpaceOps& ops, const TimeGrid& tg, const SystemParams& params);

  const SpaceOps& space() const { return *ops_; }
  const TimeGrid& time() const { return tg_; }
  const SystemParams& params() const { return params_; }
  const Eigen::SparseMatrix<double>& matrix() const { return A_; }
  const Field& mask() const { return mask_; }

  // One implicit step: given (u^n, v^n) and the control value on the
  // midpoint just crossed, produce (u^{n+1}, v^{n+1}).
  void forward_step(const Field& u, const Field& v, const Field& h, Field& u_next,
                    Field& v_next) const;

  // One backward step with the transposed matrix: (p,q) at t_{n+1/2}
  // down to t_{n-1/2}.
  void adjoint_step(const Field& p, const Field& q, Field& p_prev, Field& q_prev) const;

 private:
  const SpaceOps* ops_;
  TimeGrid tg_;
  SystemParams params_;
  Field mask_;
  Eigen::SparseMatrix<double> A_, At_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_, lu_t_;
};

// March over the whole grid. The control is sampled on midpoints
// 0..M-1; pass nullptr to run free. The window mask is applied inside.
ForwardTrajectory forward_solve(const StepOperator& step, const Field& u0, const Field& v0,
                                const DualSeq<Field>* control = nullptr);

// Backward march from terminal data at t_{M+1/2} filling all midpoints.
AdjointTrajectory adjoint_solve(const StepOperator& step, const Field& pT, const Field& qT);

// Residual of the pairing identity linking a controlled forward march to
// a backward march: the observed product sum against the boundary terms.
// Returned both raw and relative to the magnitude of the terms.
struct DualityResidual {
  double lhs = 0.0;  // window-restricted product sum of control and q
  double rhs = 0.0;  // terminal minus initial pairings
  double abs = 0.0;
  double rel = 0.0;
};

DualityResidual duality_residual(const StepOperator& step, const Field& u0, const Field& v0,
                                 const Field& pT, const Field& qT, const DualSeq<Field>& h);

// Backward-march growth fit. Finds the smallest rate C such that every
// observed step of every trial satisfies both
//   E(t-)  <= exp(2 C dt) E(t+)                         (plain norms)
//   F(t-)  <= exp(2 C dt) F(t+) + C dt exp(2 C dt) E(t+) (graded norms)
// where E collects the squared value norms of (p, q) and F the squared
// gradient norm of p plus the squared curvature norm of q.
struct EnergyReport {
  double fitted_C = 0.0;      // joint fit over both inequalities
  double fitted_C_plain = 0.0;  // fit of the first inequality alone
  double worst_ratio = 0.0;   // max LHS/RHS at the joint fit (<= 1 by construction)
  bool contraction_ok = false;  // 2 C dt < 1 at the joint fit
  int trials = 0;
  int steps_checked = 0;
};

EnergyReport energy_estimate_check(const StepOperator& step, int trials, uint64_t seed);

}  // namespace sks
