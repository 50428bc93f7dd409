#include "sks/system.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sks/rng.hpp"

namespace sks {

void SystemParams::validate() const {
  if (!(Gamma > 0.0)) throw std::invalid_argument("SystemParams: Gamma must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("SystemParams: gamma must be positive");
  if (!std::isfinite(c) || !std::isfinite(a))
    throw std::invalid_argument("SystemParams: c and a must be finite");
  if (!(0.0 <= omega.a && omega.a < omega.b && omega.b <= 1.0))
    throw std::invalid_argument("SystemParams: bad observation window");
}

StepOperator::StepOperator(const SpaceOps& ops, const TimeGrid& tg, const SystemParams& params)
    : ops_(&ops), tg_(tg), params_(params) {
  params_.validate();
  mask_ = window_mask(ops.grid(), params.omega);

  const int n = ops.grid().N;
  const double dt = tg_.dt;
  using Trip = Eigen::Triplet<double>;
  std::vector<Trip> trip;

  // Upper-left block: I - dt Gamma L2 + dt c D1 acting on u.
  // Lower-right block: I + dt gamma B4 + dt D3 + dt a L2 acting on v.
  // Off-diagonal blocks: -dt I coupling each equation to the other field.
  const auto stamp_block = [&](int row0, int col0, const Eigen::SparseMatrix<double>& m,
                               double scale) {
    for (int k = 0; k < m.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
        trip.emplace_back(row0 + static_cast<int>(it.row()), col0 + static_cast<int>(it.col()),
                          scale * it.value());
  };

  Eigen::SparseMatrix<double> id(n, n);
  id.setIdentity();

  stamp_block(0, 0, id, 1.0);
  stamp_block(0, 0, ops.d2().mat, -dt * params_.Gamma);
  stamp_block(0, 0, ops.d1().mat, dt * params_.c);
  stamp_block(0, n, id, -dt);
  stamp_block(n, 0, id, -dt);
  stamp_block(n, n, id, 1.0);
  stamp_block(n, n, ops.d4().mat, dt * params_.gamma);
  stamp_block(n, n, ops.d3().mat, dt);
  stamp_block(n, n, ops.d2().mat, dt * params_.a);

  A_.resize(2 * n, 2 * n);
  A_.setFromTriplets(trip.begin(), trip.end());
  A_.makeCompressed();
  At_ = A_.transpose();
  At_.makeCompressed();

  lu_.compute(A_);
  if (lu_.info() != Eigen::Success)
    throw std::runtime_error("StepOperator: step matrix factorization failed");
  lu_t_.compute(At_);
  if (lu_t_.info() != Eigen::Success)
    throw std::runtime_error("StepOperator: transposed factorization failed");
}

void StepOperator::forward_step(const Field& u, const Field& v, const Field& h, Field& u_next,
                                Field& v_next) const {
  const int n = ops_->grid().N;
  Field rhs(2 * n);
  rhs.head(n) = u;
  rhs.tail(n) = v + tg_.dt * mask_.cwiseProduct(h);
  const Field x = lu_.solve(rhs);
  u_next = x.head(n);
  v_next = x.tail(n);
}

void StepOperator::adjoint_step(const Field& p, const Field& q, Field& p_prev,
                                Field& q_prev) const {
  const int n = ops_->grid().N;
  Field rhs(2 * n);
  rhs.head(n) = p;
  rhs.tail(n) = q;
  const Field y = lu_t_.solve(rhs);
  p_prev = y.head(n);
  q_prev = y.tail(n);
}

ForwardTrajectory forward_solve(const StepOperator& step, const Field& u0, const Field& v0,
                                const DualSeq<Field>* control) {
  const int n = step.space().grid().N;
  const int M = step.time().M;
  if (u0.size() != n || v0.size() != n)
    throw std::invalid_argument("forward_solve: initial data size mismatch");
  if (control && control->steps() != M)
    throw std::invalid_argument("forward_solve: control/grid mismatch");

  ForwardTrajectory tr{PrimalSeq<Field>(M, Field::Zero(n)), PrimalSeq<Field>(M, Field::Zero(n))};
  tr.u[0] = u0;
  tr.v[0] = v0;
  const Field zero = Field::Zero(n);
  for (int m = 0; m < M; ++m) {
    const Field& h = control ? control->at_half(m) : zero;
    step.forward_step(tr.u[m], tr.v[m], h, tr.u[m + 1], tr.v[m + 1]);
  }
  return tr;
}

AdjointTrajectory adjoint_solve(const StepOperator& step, const Field& pT, const Field& qT) {
  const int n = step.space().grid().N;
  const int M = step.time().M;
  if (pT.size() != n || qT.size() != n)
    throw std::invalid_argument("adjoint_solve: terminal data size mismatch");

  AdjointTrajectory tr{DualSeq<Field>(M, Field::Zero(n)), DualSeq<Field>(M, Field::Zero(n))};
  tr.p.at_half(M) = pT;
  tr.q.at_half(M) = qT;
  for (int m = M; m >= 1; --m)
    step.adjoint_step(tr.p.at_half(m), tr.q.at_half(m), tr.p.at_half(m - 1), tr.q.at_half(m - 1));
  return tr;
}

DualityResidual duality_residual(const StepOperator& step, const Field& u0, const Field& v0,
                                 const Field& pT, const Field& qT, const DualSeq<Field>& h) {
  const SpaceOps& ops = step.space();
  const TimeGrid& tg = step.time();
  const ForwardTrajectory fwd = forward_solve(step, u0, v0, &h);
  const AdjointTrajectory adj = adjoint_solve(step, pT, qT);

  DualityResidual r;
  for (int m = 0; m < tg.M; ++m)
    r.lhs += tg.dt * ops.l2_inner(step.mask().cwiseProduct(h.at_half(m)), adj.q.at_half(m));
  r.rhs = ops.l2_inner(fwd.u[tg.M], pT) + ops.l2_inner(fwd.v[tg.M], qT) -
          ops.l2_inner(u0, adj.p.at_half(0)) - ops.l2_inner(v0, adj.q.at_half(0));
  r.abs = std::abs(r.lhs - r.rhs);

  double scale = std::abs(r.lhs);
  scale = std::max(scale, std::abs(ops.l2_inner(fwd.u[tg.M], pT)));
  scale = std::max(scale, std::abs(ops.l2_inner(fwd.v[tg.M], qT)));
  scale = std::max(scale, std::abs(ops.l2_inner(u0, adj.p.at_half(0))));
  scale = std::max(scale, std::abs(ops.l2_inner(v0, adj.q.at_half(0))));
  r.rel = scale > 0.0 ? r.abs / scale : r.abs;
  return r;
}

EnergyReport energy_estimate_check(const StepOperator& step, int trials, uint64_t seed) {
  const SpaceOps& ops = step.space();
  const TimeGrid& tg = step.time();
  const int n = ops.grid().N;

  struct StepPair {
    double e_minus, e_plus, f_minus, f_plus;
  };
  std::vector<StepPair> pairs;
  pairs.reserve(static_cast<size_t>(trials) * tg.M);

  Rng rng = Rng::stream(seed, "energy");
  const auto sq = [](double x) { return x * x; };
  for (int t = 0; t < trials; ++t) {
    const Field pT = rng.normal_field(n);
    const Field qT = rng.normal_field(n);
    const AdjointTrajectory adj = adjoint_solve(step, pT, qT);
    for (int m = tg.M; m >= 1; --m) {
      StepPair sp{};
      sp.e_plus = sq(ops.norm(adj.p.at_half(m), SpaceNorm::L2)) +
                  sq(ops.norm(adj.q.at_half(m), SpaceNorm::L2));
      sp.e_minus = sq(ops.norm(adj.p.at_half(m - 1), SpaceNorm::L2)) +
                   sq(ops.norm(adj.q.at_half(m - 1), SpaceNorm::L2));
      sp.f_plus = sq(ops.norm(adj.p.at_half(m), SpaceNorm::H01)) +
                  sq(ops.norm(adj.q.at_half(m), SpaceNorm::H02));
      sp.f_minus = sq(ops.norm(adj.p.at_half(m - 1), SpaceNorm::H01)) +
                   sq(ops.norm(adj.q.at_half(m - 1), SpaceNorm::H02));
      pairs.push_back(sp);
    }
  }

  const double dt = tg.dt;
  const auto ok = [&](double C) {
    const double grow = std::exp(2.0 * C * dt);
    for (const StepPair& sp : pairs) {
      if (sp.e_minus > grow * sp.e_plus) return false;
      if (sp.f_minus > grow * sp.f_plus + C * dt * grow * sp.e_plus) return false;
    }
    return true;
  };

  EnergyReport rep;
  rep.trials = trials;
  rep.steps_checked = static_cast<int>(pairs.size());
  for (const StepPair& sp : pairs)
    if (sp.e_minus > 0.0 && sp.e_plus > 0.0)
      rep.fitted_C_plain =
          std::max(rep.fitted_C_plain, std::log(sp.e_minus / sp.e_plus) / (2.0 * dt));
  rep.fitted_C_plain = std::max(0.0, rep.fitted_C_plain);

  if (ok(0.0)) {
    // The march never expands either graded norm: no growth allowance needed.
    rep.fitted_C = 0.0;
  } else {
    double hi = std::max(1.0, rep.fitted_C_plain);
    while (!ok(hi)) {
      hi *= 2.0;
      if (hi > 1e16) throw std::runtime_error("energy_estimate_check: growth fit diverged");
    }
    double lo = 0.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? hi : lo) = mid;
    }
    rep.fitted_C = hi;
  }

  const double grow = std::exp(2.0 * rep.fitted_C * dt);
  for (const StepPair& sp : pairs) {
    if (sp.e_plus > 0.0)
      rep.worst_ratio = std::max(rep.worst_ratio, sp.e_minus / (grow * sp.e_plus));
    const double denom = grow * sp.f_plus + rep.fitted_C * dt * grow * sp.e_plus;
    if (denom > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, sp.f_minus / denom);
  }
  rep.contraction_ok = 2.0 * rep.fitted_C * dt < 1.0;
  return rep;
}

}  // namespace sks
