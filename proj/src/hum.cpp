#include "sks/hum.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sks {

double PenaltyFn::eval(double dt) const {
  if (!(dt > 0.0)) throw std::invalid_argument("PenaltyFn: dt must be positive");
  switch (kind) {
    case Kind::Exponential:
      return std::exp(-C1 / std::pow(dt, 0.1));
    case Kind::ScaledExponential:
      return dt * std::exp(-C1 / std::pow(dt, 0.1));
    case Kind::Constant:
      return value;
    case Kind::Table: {
      for (const auto& [d, phi] : table)
        if (std::abs(d - dt) <= 1e-12 * std::max(1.0, std::abs(d))) return phi;
      throw std::invalid_argument("PenaltyFn: no table entry for dt = " + std::to_string(dt));
    }
  }
  throw std::logic_error("PenaltyFn: unknown kind");
}

PenaltyFn PenaltyFn::exponential(double C1) {
  PenaltyFn p;
  p.kind = Kind::Exponential;
  p.C1 = C1;
  return p;
}

PenaltyFn PenaltyFn::scaled_exponential(double C1) {
  PenaltyFn p;
  p.kind = Kind::ScaledExponential;
  p.C1 = C1;
  return p;
}

PenaltyFn PenaltyFn::constant(double value) {
  PenaltyFn p;
  p.kind = Kind::Constant;
  p.value = value;
  return p;
}

namespace {

struct Pair {
  Field p, q;
};

// Metric inner product on terminal data: gradient form on the first
// component, curvature form on the second.
double metric_inner(const SpaceOps& ops, const Pair& a, const Pair& b) {
  return ops.h1_inner(a.p, b.p) + ops.h2_inner(a.q, b.q);
}

// Apply the penalized duality operator: backward march from xi, forward
// march from rest driven by the observed component, Riesz-lift the
// terminal state, add phi xi.
Pair apply_gramian(const StepOperator& step, double phi, const Pair& xi) {
  const SpaceOps& ops = step.space();
  const int n = ops.grid().N;
  const AdjointTrajectory adj = adjoint_solve(step, xi.p, xi.q);
  const ForwardTrajectory fwd =
      forward_solve(step, Field::Zero(n), Field::Zero(n), &adj.q);
  const int M = step.time().M;
  Pair out;
  out.p = ops.solve_neg_lap(fwd.u[M]) + phi * xi.p;
  out.q = ops.solve_biharm(fwd.v[M]) + phi * xi.q;
  return out;
}

}  // namespace

double eval_J(const StepOperator& step, const Field& u0, const Field& v0, double phi,
              const Field& pT, const Field& qT) {
  const SpaceOps& ops = step.space();
  const TimeGrid& tg = step.time();
  const AdjointTrajectory adj = adjoint_solve(step, pT, qT);

  double obs = 0.0;
  for (int m = 0; m < tg.M; ++m) {
    const Field masked = step.mask().cwiseProduct(adj.q.at_half(m));
    obs += tg.dt * ops.l2_inner(masked, adj.q.at_half(m));
  }
  const double pen = ops.h1_inner(pT, pT) + ops.h2_inner(qT, qT);
  return 0.5 * obs + 0.5 * phi * pen + ops.l2_inner(u0, adj.p.at_half(0)) +
         ops.l2_inner(v0, adj.q.at_half(0));
}

std::pair<Field, Field> grad_J(const StepOperator& step, const Field& u0, const Field& v0,
                               double phi, const Field& pT, const Field& qT) {
  const SpaceOps& ops = step.space();
  const AdjointTrajectory adj = adjoint_solve(step, pT, qT);
  const ForwardTrajectory fwd = forward_solve(step, u0, v0, &adj.q);
  const int M = step.time().M;
  return {ops.solve_neg_lap(fwd.u[M]) + phi * pT, ops.solve_biharm(fwd.v[M]) + phi * qT};
}

HumResult solve_hum(const StepOperator& step, const Field& u0, const Field& v0,
                    const HumOptions& opts) {
  if (!(opts.phi > 0.0)) throw std::invalid_argument("solve_hum: phi must be positive");
  if (!(opts.cg_tol > 0.0) || opts.max_iter < 1)
    throw std::invalid_argument("solve_hum: bad solver options");
  const SpaceOps& ops = step.space();
  const TimeGrid& tg = step.time();
  const int n = ops.grid().N;
  const int M = tg.M;

  HumResult res;
  res.data_norm = std::sqrt(ops.l2_inner(u0, u0) + ops.l2_inner(v0, v0));

  // Constant part of the gradient: Riesz lift of the freely evolved
  // terminal state. grad(xi) = G xi + b with G the penalized Gramian.
  const ForwardTrajectory free_fwd = forward_solve(step, u0, v0, nullptr);
  Pair b{ops.solve_neg_lap(free_fwd.u[M]), ops.solve_biharm(free_fwd.v[M])};

  Pair xi{Field::Zero(n), Field::Zero(n)};
  Pair r{-b.p, -b.q};
  double rr = metric_inner(ops, r, r);
  res.grad_norm0 = std::sqrt(std::max(0.0, rr));
  res.history.push_back({0, 0.0, res.grad_norm0});

  double J_track = 0.0;
  const double stop = opts.cg_tol * res.grad_norm0;
  if (res.grad_norm0 == 0.0) {
    res.converged = true;
  } else {
    Pair d = r;
    for (int it = 1; it <= opts.max_iter; ++it) {
      const Pair Ad = apply_gramian(step, opts.phi, d);
      const double dAd = metric_inner(ops, d, Ad);
      if (!(dAd > 0.0))
        throw std::runtime_error("solve_hum: duality operator lost positivity");
      const double alpha = rr / dAd;
      xi.p += alpha * d.p;
      xi.q += alpha * d.q;
      r.p -= alpha * Ad.p;
      r.q -= alpha * Ad.q;
      J_track -= 0.5 * alpha * rr;
      const double rr_new = metric_inner(ops, r, r);
      const double gn = std::sqrt(std::max(0.0, rr_new));
      res.history.push_back({it, J_track, gn});
      res.iterations = it;
      res.grad_norm = gn;
      if (gn <= stop) {
        res.converged = true;
        break;
      }
      const double beta = rr_new / rr;
      rr = rr_new;
      d.p = r.p + beta * d.p;
      d.q = r.q + beta * d.q;
    }
  }

  res.pT = xi.p;
  res.qT = xi.q;

  // Materialize the control and the controlled trajectory.
  const AdjointTrajectory adj = adjoint_solve(step, res.pT, res.qT);
  res.control = DualSeq<Field>(M, Field::Zero(n));
  for (int m = 0; m < M; ++m)
    res.control.at_half(m) = step.mask().cwiseProduct(adj.q.at_half(m));
  res.trajectory = forward_solve(step, u0, v0, &res.control);

  res.J = eval_J(step, u0, v0, opts.phi, res.pT, res.qT);
  double cost2 = 0.0;
  for (int m = 0; m < M; ++m)
    cost2 += tg.dt * ops.l2_inner(res.control.at_half(m), res.control.at_half(m));
  res.control_cost = std::sqrt(std::max(0.0, cost2));

  const Field& uM = res.trajectory.u[M];
  const Field& vM = res.trajectory.v[M];
  res.final_l2 = std::sqrt(ops.l2_inner(uM, uM) + ops.l2_inner(vM, vM));
  const double um_m1 = ops.norm(uM, SpaceNorm::Hm1);
  const double vm_m2 = ops.norm(vM, SpaceNorm::Hm2);
  res.final_dual = std::sqrt(um_m1 * um_m1 + vm_m2 * vm_m2);
  const double xi_metric =
      std::sqrt(std::max(0.0, ops.h1_inner(res.pT, res.pT) + ops.h2_inner(res.qT, res.qT)));
  res.cost_ratio = res.data_norm > 0.0 ? std::sqrt(opts.phi) * xi_metric / res.data_norm : 0.0;

  // Terminal identity, recomputed from scratch: u^M should equal
  // -phi times the gradient-form image of pT, and likewise for v^M with
  // the curvature form. Residuals are measured in the dual norms and
  // compared against the free terminal state.
  {
    const Field gu = opts.phi * (ops.d2().mat * res.pT);  // -phi (-L2) pT
    const Field gv = -opts.phi * (ops.d4().mat * res.qT);
    const Field ru = uM - gu;
    const Field rv = vM - gv;
    const double num_m1 = ops.norm(ru, SpaceNorm::Hm1);
    const double num_m2 = ops.norm(rv, SpaceNorm::Hm2);
    const double fu = ops.norm(free_fwd.u[M], SpaceNorm::Hm1);
    const double fv = ops.norm(free_fwd.v[M], SpaceNorm::Hm2);
    const double denom = std::sqrt(fu * fu + fv * fv);
    res.terminal_identity_rel =
        denom > 0.0 ? std::sqrt(num_m1 * num_m1 + num_m2 * num_m2) / denom : 0.0;

    const double num_l2 = std::sqrt(ops.l2_inner(ru, ru) + ops.l2_inner(rv, rv));
    const double scale_l2 = res.final_l2 + std::sqrt(ops.l2_inner(gu, gu) + ops.l2_inner(gv, gv));
    res.terminal_identity_rel_l2 = scale_l2 > 0.0 ? num_l2 / scale_l2 : 0.0;
  }
  return res;
}

TwoStageResult two_stage_control(const SpaceOps& ops, const TimeGrid& tg,
                                 const SystemParams& params, const Field& u0, const Field& v0,
                                 double T0, const PenaltyFn& penalty, double cg_tol,
                                 int max_iter) {
  if (!(T0 > 0.0 && T0 < tg.T))
    throw std::invalid_argument("two_stage_control: T0 must lie inside (0, T)");
  const int M0 = static_cast<int>(std::floor(T0 / tg.dt));
  if (M0 < 1 || M0 >= tg.M)
    throw std::invalid_argument("two_stage_control: control window too short for this grid");

  TwoStageResult res;
  res.M0 = M0;
  res.phi_base = penalty.eval(tg.dt);
  res.phi_scaled = tg.dt * res.phi_base;

  // Stage one: same step size, truncated horizon, step-scaled penalty.
  const TimeGrid tg1(static_cast<double>(M0) * tg.dt, M0);
  const StepOperator step1(ops, tg1, params);
  HumOptions opts;
  opts.phi = res.phi_scaled;
  opts.cg_tol = cg_tol;
  opts.max_iter = max_iter;
  res.stage1 = solve_hum(step1, u0, v0, opts);

  // Stage two: free march with the full-grid operator.
  const StepOperator step(ops, tg, params);
  const int n = ops.grid().N;
  res.trajectory =
      ForwardTrajectory{PrimalSeq<Field>(tg.M, Field::Zero(n)), PrimalSeq<Field>(tg.M, Field::Zero(n))};
  for (int m = 0; m <= M0; ++m) {
    res.trajectory.u[m] = res.stage1.trajectory.u[m];
    res.trajectory.v[m] = res.stage1.trajectory.v[m];
  }
  const Field zero = Field::Zero(n);
  for (int m = M0; m < tg.M; ++m)
    step.forward_step(res.trajectory.u[m], res.trajectory.v[m], zero, res.trajectory.u[m + 1],
                      res.trajectory.v[m + 1]);

  const Field& uh = res.trajectory.u[M0];
  const Field& vh = res.trajectory.v[M0];
  const double um = ops.norm(uh, SpaceNorm::Hm1);
  const double vm = ops.norm(vh, SpaceNorm::Hm2);
  res.mid_dual_norm = std::sqrt(um * um + vm * vm);

  const double u1 = ops.norm(res.trajectory.u[M0 + 1], SpaceNorm::H01);
  const double v1 = ops.norm(res.trajectory.v[M0 + 1], SpaceNorm::H02);
  res.smoothing_ratio = res.mid_dual_norm > 0.0
                            ? std::sqrt(tg.dt) * std::sqrt(u1 * u1 + v1 * v1) / res.mid_dual_norm
                            : 0.0;

  res.data_norm = std::sqrt(ops.l2_inner(u0, u0) + ops.l2_inner(v0, v0));
  const Field& uM = res.trajectory.u[tg.M];
  const Field& vM = res.trajectory.v[tg.M];
  res.final_l2 = std::sqrt(ops.l2_inner(uM, uM) + ops.l2_inner(vM, vM));
  res.final_ratio = res.data_norm > 0.0 ? res.final_l2 / res.data_norm : 0.0;
  return res;
}

}  // namespace sks
