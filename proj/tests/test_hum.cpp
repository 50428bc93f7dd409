#include <doctest.h>

#include <cmath>

#include "sks/hum.hpp"
#include "sks/rng.hpp"

using namespace sks;

namespace {

struct Setup {
  SpaceGrid grid;
  SpaceOps ops;
  TimeGrid tg;
  StepOperator step;
  Field u0, v0;

  Setup(int N, int M, uint64_t seed)
      : grid(N), ops(grid), tg(1.0, M), step(ops, tg, SystemParams{}), u0(N), v0(N) {
    Rng ru = Rng::stream(seed, "init-u");
    Rng rv = Rng::stream(seed, "init-v");
    u0 = ru.smooth_field(N);
    v0 = rv.smooth_field(N);
  }

  double metric_inner(const std::pair<Field, Field>& a, const Field& dp, const Field& dq) const {
    return ops.h1_inner(a.first, dp) + ops.h2_inner(a.second, dq);
  }
};

}  // namespace

TEST_CASE("penalty families evaluate their closed forms") {
  const auto exp_pen = PenaltyFn::exponential(2.0);
  const double dt = 1.0 / 64.0;
  CHECK(exp_pen.eval(dt) ==
        doctest::Approx(std::exp(-2.0 / std::pow(dt, 0.1))).epsilon(1e-14));
  const auto scaled = PenaltyFn::scaled_exponential(2.0);
  CHECK(scaled.eval(dt) == doctest::Approx(dt * exp_pen.eval(dt)).epsilon(1e-14));
  CHECK(PenaltyFn::constant(3e-5).eval(dt) == 3e-5);
  CHECK_THROWS_AS(exp_pen.eval(0.0), std::invalid_argument);
}

TEST_CASE("metric gradient matches central differences") {
  Setup s(49, 32, 31);
  const double phi = 1e-4;

  Rng rp = Rng::stream(77, "terminal-p");
  Rng rq = Rng::stream(77, "terminal-q");
  const Field pT = rp.smooth_field(s.grid.N);
  const Field qT = rq.smooth_field(s.grid.N);
  const auto grad = grad_J(s.step, s.u0, s.v0, phi, pT, qT);

  Rng rd = Rng::stream(78, "terminal-p");
  const double eps = 1e-3;
  double worst = 0.0;
  for (int dir = 0; dir < 10; ++dir) {
    const Field dp = rd.normal_field(s.grid.N);
    const Field dq = rd.normal_field(s.grid.N);
    const double jp = eval_J(s.step, s.u0, s.v0, phi, pT + eps * dp, qT + eps * dq);
    const double jm = eval_J(s.step, s.u0, s.v0, phi, pT - eps * dp, qT - eps * dq);
    const double fd = (jp - jm) / (2.0 * eps);
    const double an = s.metric_inner(grad, dp, dq);
    worst = std::max(worst, std::abs(fd - an) / std::max(1e-30, std::abs(an)));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("objective is convex along random segments") {
  Setup s(33, 16, 5);
  const double phi = 1e-3;
  Rng r = Rng::stream(9, "terminal-q");
  for (int trial = 0; trial < 3; ++trial) {
    const Field p1 = r.smooth_field(s.grid.N), q1 = r.smooth_field(s.grid.N);
    const Field p2 = r.smooth_field(s.grid.N), q2 = r.smooth_field(s.grid.N);
    const double jm = eval_J(s.step, s.u0, s.v0, phi, 0.5 * (p1 + p2), 0.5 * (q1 + q2));
    const double ja = eval_J(s.step, s.u0, s.v0, phi, p1, q1);
    const double jb = eval_J(s.step, s.u0, s.v0, phi, p2, q2);
    CHECK(jm <= 0.5 * (ja + jb) + 1e-12 * (std::abs(ja) + std::abs(jb)));
  }
}

TEST_CASE("gradient is affine in the terminal data") {
  Setup s(33, 16, 6);
  const double phi = 1e-3;
  Rng r = Rng::stream(10, "terminal-p");
  const Field p1 = r.smooth_field(s.grid.N), q1 = r.smooth_field(s.grid.N);
  const Field p2 = r.smooth_field(s.grid.N), q2 = r.smooth_field(s.grid.N);

  const auto g12 = grad_J(s.step, s.u0, s.v0, phi, p1 + p2, q1 + q2);
  const auto g1 = grad_J(s.step, s.u0, s.v0, phi, p1, q1);
  const auto g2 = grad_J(s.step, s.u0, s.v0, phi, p2, q2);
  const auto g0 = grad_J(s.step, s.u0, s.v0, phi, Field::Zero(s.grid.N), Field::Zero(s.grid.N));

  // Superposition holds for the linear part; the data term enters every
  // evaluation once, hence the g0 correction.
  const Field rp = g12.first - g1.first - g2.first + g0.first;
  const Field rq = g12.second - g1.second - g2.second + g0.second;
  const double scale = s.ops.norm(g12.first, SpaceNorm::H01) +
                       s.ops.norm(g12.second, SpaceNorm::H02) + 1e-30;
  CHECK((s.ops.norm(rp, SpaceNorm::H01) + s.ops.norm(rq, SpaceNorm::H02)) / scale <= 1e-9);
}

TEST_CASE("zero data needs no control") {
  Setup s(25, 8, 1);
  HumOptions opts;
  const auto res = solve_hum(s.step, Field::Zero(s.grid.N), Field::Zero(s.grid.N), opts);
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.J == 0.0);
  CHECK(res.control_cost == 0.0);
}

TEST_CASE("minimizer satisfies the terminal identity at solver accuracy") {
  Setup s(49, 32, 12);
  HumOptions opts;
  opts.phi = 1e-4;

  opts.cg_tol = 1e-6;
  const auto r6 = solve_hum(s.step, s.u0, s.v0, opts);
  CHECK(r6.converged);
  CHECK(r6.terminal_identity_rel <= 10.0 * 1e-6);

  opts.cg_tol = 1e-8;
  const auto r8 = solve_hum(s.step, s.u0, s.v0, opts);
  CHECK(r8.converged);
  CHECK(r8.iterations >= r6.iterations);
  CHECK(r8.terminal_identity_rel <= 10.0 * 1e-8);

  // Tighter tolerance must not worsen the objective.
  CHECK(r8.J <= r6.J + 1e-10 * std::abs(r6.J));

  // The recorded cost ratio restates sqrt(phi) times the metric size of
  // the minimizer against the data size.
  const double metric = std::sqrt(s.ops.h1_inner(r8.pT, r8.pT) + s.ops.h2_inner(r8.qT, r8.qT));
  CHECK(r8.cost_ratio ==
        doctest::Approx(std::sqrt(opts.phi) * metric / r8.data_norm).epsilon(1e-10));
}

TEST_CASE("convergence history decreases monotonically") {
  Setup s(33, 16, 21);
  HumOptions opts;
  opts.phi = 1e-5;
  const auto res = solve_hum(s.step, s.u0, s.v0, opts);
  CHECK(res.converged);
  REQUIRE(res.history.size() >= 2);
  for (size_t i = 1; i < res.history.size(); ++i)
    CHECK(res.history[i].J <= res.history[i - 1].J + 1e-12 * std::abs(res.history[i - 1].J));
}

TEST_CASE("two stage drive hands over at the requested index") {
  const SpaceGrid grid(33);
  const SpaceOps ops(grid);
  const TimeGrid tg(1.0, 32);
  Rng ru = Rng::stream(2, "init-u");
  Rng rv = Rng::stream(2, "init-v");
  const Field u0 = ru.smooth_field(grid.N);
  const Field v0 = rv.smooth_field(grid.N);

  const auto pen = PenaltyFn::constant(1e-4);
  const auto ts = two_stage_control(ops, tg, SystemParams{}, u0, v0, 0.5, pen, 1e-8, 400);
  CHECK(ts.M0 == 16);
  CHECK(ts.stage1.converged);
  CHECK(ts.phi_base == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(ts.phi_scaled == doctest::Approx(tg.dt * 1e-4).epsilon(1e-15));
  CHECK(ts.mid_dual_norm > 0.0);
  CHECK(ts.smoothing_ratio > 0.0);
  CHECK(ts.final_ratio == doctest::Approx(ts.final_l2 / ts.data_norm).epsilon(1e-12));
  CHECK(std::isfinite(ts.final_ratio));

  // The full-horizon march starts from the data and runs free after the
  // handover: the terminal slice must match a direct free march from the
  // handover state.
  CHECK((ts.trajectory.u[0] - u0).cwiseAbs().maxCoeff() == 0.0);
  const StepOperator step(ops, tg, SystemParams{});
  Field uu = ts.trajectory.u[ts.M0], vv = ts.trajectory.v[ts.M0];
  Field un(grid.N), vn(grid.N);
  for (int n = ts.M0; n < tg.M; ++n) {
    step.forward_step(uu, vv, Field::Zero(grid.N), un, vn);
    uu = un;
    vv = vn;
  }
  const double mag = 1.0 + uu.cwiseAbs().maxCoeff() + vv.cwiseAbs().maxCoeff();
  CHECK((ts.trajectory.u[tg.M] - uu).cwiseAbs().maxCoeff() <= 1e-10 * mag);
  CHECK((ts.trajectory.v[tg.M] - vv).cwiseAbs().maxCoeff() <= 1e-10 * mag);
}

TEST_CASE("two stage drive rejects a bad handover time") {
  const SpaceGrid grid(25);
  const SpaceOps ops(grid);
  const TimeGrid tg(1.0, 8);
  const Field z = Field::Zero(grid.N);
  const auto pen = PenaltyFn::constant(1e-4);
  CHECK_THROWS_AS(two_stage_control(ops, tg, SystemParams{}, z, z, 1.0, pen, 1e-8, 50),
                  std::invalid_argument);
  CHECK_THROWS_AS(two_stage_control(ops, tg, SystemParams{}, z, z, 0.05, pen, 1e-8, 50),
                  std::invalid_argument);
}
