#include <doctest.h>

#include <cmath>

#include "sks/rng.hpp"
#include "sks/system.hpp"

using namespace sks;

namespace {

DualSeq<Field> random_control(const TimeGrid& tg, int N, Rng& rng) {
  DualSeq<Field> h(tg.M, Field::Zero(N));
  for (int n = 0; n < tg.M; ++n) h.at_half(n) = rng.normal_field(N);
  return h;
}

}  // namespace

TEST_CASE("free march from zero stays zero") {
  const SpaceGrid g(25);
  const SpaceOps ops(g);
  const TimeGrid tg(1.0, 16);
  const StepOperator step(ops, tg, SystemParams{});
  const auto fwd = forward_solve(step, Field::Zero(g.N), Field::Zero(g.N));
  CHECK(fwd.u[tg.M].cwiseAbs().maxCoeff() == 0.0);
  CHECK(fwd.v[tg.M].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("control outside the window has no effect") {
  const SpaceGrid g(25);
  const SpaceOps ops(g);
  const TimeGrid tg(1.0, 8);
  SystemParams params;
  params.omega = {0.3, 0.8};
  const StepOperator step(ops, tg, params);

  Rng rng = Rng::stream(3, "init-u");
  const Field u0 = rng.smooth_field(g.N);
  const Field v0 = rng.smooth_field(g.N);

  // Forcing supported strictly outside the observation window is wiped
  // by the mask, so the march coincides with the free one.
  DualSeq<Field> h(tg.M, Field::Zero(g.N));
  const Field m = step.mask();
  for (int n = 0; n < tg.M; ++n) {
    Field f = Field::Ones(g.N);
    for (int i = 0; i < g.N; ++i)
      if (m[i] != 0.0) f[i] = 0.0;
    h.at_half(n) = f;
  }

  const auto free_run = forward_solve(step, u0, v0);
  const auto forced = forward_solve(step, u0, v0, &h);
  CHECK((free_run.u[tg.M] - forced.u[tg.M]).cwiseAbs().maxCoeff() == 0.0);
  CHECK((free_run.v[tg.M] - forced.v[tg.M]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single implicit step satisfies its defining equations") {
  const SpaceGrid g(25);
  const SpaceOps ops(g);
  const TimeGrid tg(0.5, 8);
  SystemParams params;
  params.Gamma = 0.03;
  params.c = 0.02;
  params.gamma = 5e-3;
  params.a = 0.01;
  const StepOperator step(ops, tg, params);

  Rng rng = Rng::stream(17, "init-u");
  const Field u = rng.smooth_field(g.N);
  const Field v = rng.smooth_field(g.N);
  const Field h = rng.normal_field(g.N);
  Field un(g.N), vn(g.N);
  step.forward_step(u, v, h, un, vn);

  const double dt = tg.dt;
  const auto amp = [](const Field& f) { return f.cwiseAbs().maxCoeff(); };
  // Heat row: (u' - u)/dt - Gamma u'_xx + c u'_x - v' = 0.
  Field r1 = (un - u) / dt - params.Gamma * ops.d2().apply(un) + params.c * ops.d1().apply(un) - vn;
  const double s1 = amp(un) / dt + params.Gamma * amp(ops.d2().apply(un)) + amp(vn) + 1.0;
  // Fourth-order row: (v' - v)/dt + gamma v'_xxxx + v'_xxx + a v'_xx - u' - mask h = 0.
  Field r2 = (vn - v) / dt + params.gamma * ops.d4().apply(vn) + ops.d3().apply(vn) +
             params.a * ops.d2().apply(vn) - un - step.mask().cwiseProduct(h);
  const double s2 = amp(vn) / dt + params.gamma * amp(ops.d4().apply(vn)) +
                    amp(ops.d3().apply(vn)) + amp(un) + 1.0;
  CHECK(r1.cwiseAbs().maxCoeff() / s1 <= 1e-12);
  CHECK(r2.cwiseAbs().maxCoeff() / s2 <= 1e-12);
}

TEST_CASE("backward march transposes the forward one") {
  const SpaceGrid g(25);
  const SpaceOps ops(g);
  const TimeGrid tg(1.0, 8);
  const StepOperator step(ops, tg, SystemParams{});

  // One step each way: <A^{-1} x, y> must equal <x, A^{-T} y> for the
  // stacked state, probed through the public step interface with zero
  // sources so the affine parts drop.
  Rng rng = Rng::stream(23, "init-v");
  const Field xu = rng.normal_field(g.N), xv = rng.normal_field(g.N);
  const Field yp = rng.normal_field(g.N), yq = rng.normal_field(g.N);

  Field fu(g.N), fv(g.N);
  step.forward_step(xu, xv, Field::Zero(g.N), fu, fv);
  Field bp(g.N), bq(g.N);
  step.adjoint_step(yp, yq, bp, bq);

  const double lhs = fu.dot(yp) + fv.dot(yq);
  const double rhs = xu.dot(bp) + xv.dot(bq);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
}

TEST_CASE("pairing identity closes on random instances") {
  const SpaceGrid g(49);
  const SpaceOps ops(g);

  for (int M : {16, 64}) {
    const TimeGrid tg(1.0, M);
    const StepOperator step(ops, tg, SystemParams{});
    double worst = 0.0;
    for (int inst = 0; inst < 5; ++inst) {
      Rng ru = Rng::stream(100 + inst, "init-u");
      Rng rv = Rng::stream(100 + inst, "init-v");
      Rng rp = Rng::stream(100 + inst, "terminal-p");
      Rng rq = Rng::stream(100 + inst, "terminal-q");
      const Field u0 = ru.smooth_field(g.N);
      const Field v0 = rv.smooth_field(g.N);
      const Field pT = rp.normal_field(g.N);
      const Field qT = rq.normal_field(g.N);
      Rng rh = Rng::stream(100 + inst, "calculus");
      const auto h = random_control(tg, g.N, rh);
      const auto res = duality_residual(step, u0, v0, pT, qT, h);
      worst = std::max(worst, res.rel);
    }
    CAPTURE(M);
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("backward growth admits a stable fitted rate") {
  const SpaceGrid g(49);
  const SpaceOps ops(g);
  SystemParams params;

  const TimeGrid tg1(1.0, 32);
  const StepOperator s1(ops, tg1, params);
  const auto r1 = energy_estimate_check(s1, 100, 5);
  CHECK(r1.trials == 100);
  // At the default coefficients the backward march never expands either graded
  // norm: implicit stepping damps the dispersive term faster than the
  // anti-diffusive term can feed energy in, so a zero growth allowance fits.
  CHECK(r1.fitted_C == 0.0);
  CHECK(r1.worst_ratio <= 1.0 + 1e-12);
  CHECK(r1.contraction_ok);

  const TimeGrid tg2(1.0, 64);
  const StepOperator s2(ops, tg2, params);
  const auto r2 = energy_estimate_check(s2, 100, 5);
  CHECK(r2.worst_ratio <= 1.0 + 1e-12);

  // Halving the step must not move the fitted rate by more than half of
  // its coarse value.
  CHECK(r2.fitted_C >= 0.5 * r1.fitted_C);
  CHECK(r2.fitted_C <= 1.5 * r1.fitted_C);
}
