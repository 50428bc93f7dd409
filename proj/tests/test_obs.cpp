#include <doctest.h>

#include <cmath>

#include "sks/obs.hpp"
#include "sks/rng.hpp"

using namespace sks;

TEST_CASE("observation ratio is invariant under data scaling") {
  const SpaceGrid grid(33);
  const SpaceOps ops(grid);
  const TimeGrid tg(1.0, 16);
  const StepOperator step(ops, tg, SystemParams{});

  Rng rp = Rng::stream(4, "terminal-p");
  Rng rq = Rng::stream(4, "terminal-q");
  const Field pT = rp.smooth_field(grid.N);
  const Field qT = rq.smooth_field(grid.N);

  const auto r1 = obs_ratio(step, pT, qT, 1.0);
  const auto r2 = obs_ratio(step, 3.0 * pT, 3.0 * qT, 1.0);
  CHECK(r1.lhs > 0.0);
  CHECK(r1.obs > 0.0);
  CHECK(r1.remainder >= 0.0);
  CHECK(r2.lhs == doctest::Approx(9.0 * r1.lhs).epsilon(1e-12));
  CHECK(r2.ratio == doctest::Approx(r1.ratio).epsilon(1e-12));
}

TEST_CASE("larger remainder rate strengthens the observation ratio") {
  const SpaceGrid grid(33);
  const SpaceOps ops(grid);
  const TimeGrid tg(1.0, 16);
  const StepOperator step(ops, tg, SystemParams{});

  Rng rp = Rng::stream(8, "terminal-p");
  Rng rq = Rng::stream(8, "terminal-q");
  const Field pT = rp.smooth_field(grid.N);
  const Field qT = rq.smooth_field(grid.N);

  // The exponential remainder shrinks as its rate grows, so the same
  // data yields a larger (or equal) ratio.
  const auto lo = obs_ratio(step, pT, qT, 0.5);
  const auto hi = obs_ratio(step, pT, qT, 2.0);
  CHECK(hi.remainder < lo.remainder);
  CHECK(hi.ratio >= lo.ratio * (1.0 - 1e-12));
}

TEST_CASE("constant estimate dominates its samples and its power trace climbs") {
  const SpaceGrid grid(33);
  const SpaceOps ops(grid);
  const TimeGrid tg(1.0, 16);
  const StepOperator step(ops, tg, SystemParams{});

  const auto est = estimate_CT(step, 1.0, 6, 12, 99);
  CHECK(est.sample_ratios.size() == 6);
  double max_sample = 0.0;
  for (double r : est.sample_ratios) max_sample = std::max(max_sample, r);
  CHECK(est.sampled_max == doctest::Approx(max_sample).epsilon(1e-12));
  CHECK(est.refined >= est.sampled_max * (1.0 - 1e-10));

  REQUIRE(est.trace.size() >= 2);
  for (size_t i = 1; i < est.trace.size(); ++i)
    CHECK(est.trace[i] >= est.trace[i - 1] * (1.0 - 1e-10));
}

TEST_CASE("sampling more directions never lowers the sampled maximum") {
  const SpaceGrid grid(25);
  const SpaceOps ops(grid);
  const TimeGrid tg(1.0, 8);
  const StepOperator step(ops, tg, SystemParams{});

  // Same seed, so the first four sample directions coincide.
  const auto few = estimate_CT(step, 1.0, 4, 8, 123);
  const auto many = estimate_CT(step, 1.0, 8, 8, 123);
  CHECK(many.sampled_max >= few.sampled_max * (1.0 - 1e-14));
}

TEST_CASE("penalty sweep produces a well-formed study") {
  const SpaceGrid grid(33);
  const SpaceOps ops(grid);
  Rng ru = Rng::stream(14, "init-u");
  Rng rv = Rng::stream(14, "init-v");
  const Field u0 = ru.smooth_field(grid.N);
  const Field v0 = rv.smooth_field(grid.N);

  std::vector<DecayJob> jobs;
  for (double phi : {1e-2, 1e-3, 1e-4})
    jobs.push_back({32, PenaltyFn::constant(phi)});

  const auto study = decay_study(ops, SystemParams{}, 1.0, 0.5, u0, v0, jobs, 1e-8, 400);
  REQUIRE(study.points.size() == 3);
  CHECK(study.all_converged);
  double max_cost = 0.0;
  for (const auto& pt : study.points) {
    CHECK(pt.converged);
    CHECK(pt.M == 32);
    CHECK(pt.dt == doctest::Approx(1.0 / 32.0).epsilon(1e-15));
    CHECK(pt.final_ratio > 0.0);
    CHECK(std::isfinite(pt.cost_ratio));
    CHECK(pt.sqrt_phi == doctest::Approx(std::sqrt(pt.phi)).epsilon(1e-14));
    max_cost = std::max(max_cost, pt.cost_ratio);
  }
  CHECK(study.fitted_CT == doctest::Approx(max_cost).epsilon(1e-14));
  CHECK(study.points_used >= 0);
  CHECK(study.points_used <= 3);
  CHECK(std::isfinite(study.slope));
}

TEST_CASE("sweep results do not depend on the thread count") {
  const SpaceGrid grid(25);
  const SpaceOps ops(grid);
  Rng ru = Rng::stream(15, "init-u");
  Rng rv = Rng::stream(15, "init-v");
  const Field u0 = ru.smooth_field(grid.N);
  const Field v0 = rv.smooth_field(grid.N);

  std::vector<DecayJob> jobs;
  for (double phi : {1e-2, 1e-4}) jobs.push_back({16, PenaltyFn::constant(phi)});

  const auto a = decay_study(ops, SystemParams{}, 1.0, 0.5, u0, v0, jobs, 1e-8, 400, 1);
  const auto b = decay_study(ops, SystemParams{}, 1.0, 0.5, u0, v0, jobs, 1e-8, 400, 2);
  REQUIRE(a.points.size() == b.points.size());
  for (size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].final_ratio == b.points[i].final_ratio);
    CHECK(a.points[i].cost_ratio == b.points[i].cost_ratio);
    CHECK(a.points[i].iterations == b.points[i].iterations);
  }
  CHECK(a.slope == b.slope);
  CHECK(a.fitted_CT == b.fitted_CT);
}

TEST_CASE("unconverged points are excluded from the fit") {
  const SpaceGrid grid(25);
  const SpaceOps ops(grid);
  Rng ru = Rng::stream(16, "init-u");
  Rng rv = Rng::stream(16, "init-v");
  const Field u0 = ru.smooth_field(grid.N);
  const Field v0 = rv.smooth_field(grid.N);

  std::vector<DecayJob> jobs;
  for (double phi : {1e-3, 1e-5}) jobs.push_back({16, PenaltyFn::constant(phi)});

  // One iteration cannot reach the tolerance on this data.
  const auto study = decay_study(ops, SystemParams{}, 1.0, 0.5, u0, v0, jobs, 1e-12, 1);
  CHECK_FALSE(study.all_converged);
  for (const auto& pt : study.points) CHECK_FALSE(pt.converged);
  CHECK(study.points_used == 0);
}
