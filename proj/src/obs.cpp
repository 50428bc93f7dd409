#include "sks/obs.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <utility>

#include "sks/rng.hpp"

namespace sks {

namespace {

struct Pair {
  Field p, q;
};

double metric_inner(const SpaceOps& ops, const Pair& a, const Pair& b) {
  return ops.h1_inner(a.p, b.p) + ops.h2_inner(a.q, b.q);
}

// Window observation of the backward march launched from xi.
double observation_quad(const StepOperator& step, const AdjointTrajectory& adj) {
  const SpaceOps& ops = step.space();
  double acc = 0.0;
  for (int m = 0; m < step.time().M; ++m) {
    const Field masked = step.mask().cwiseProduct(adj.q.at_half(m));
    acc += step.time().dt * ops.l2_inner(masked, adj.q.at_half(m));
  }
  return acc;
}

// Penalized-Gramian action in the terminal-data metric, shared with the
// control solver: backward march, observed forward march, Riesz lift.
Pair gramian_apply(const StepOperator& step, double eps, const Pair& xi) {
  const SpaceOps& ops = step.space();
  const int n = ops.grid().N;
  const AdjointTrajectory adj = adjoint_solve(step, xi.p, xi.q);
  const ForwardTrajectory fwd = forward_solve(step, Field::Zero(n), Field::Zero(n), &adj.q);
  const int M = step.time().M;
  return {ops.solve_neg_lap(fwd.u[M]) + eps * xi.p, ops.solve_biharm(fwd.v[M]) + eps * xi.q};
}

// Numerator operator: squared value norm of the first midpoint pair, as a
// metric-self-adjoint map (march back, march forward free, Riesz lift).
Pair numerator_apply(const StepOperator& step, const Pair& xi) {
  const SpaceOps& ops = step.space();
  const AdjointTrajectory adj = adjoint_solve(step, xi.p, xi.q);
  const ForwardTrajectory fwd = forward_solve(step, adj.p.at_half(0), adj.q.at_half(0), nullptr);
  const int M = step.time().M;
  return {ops.solve_neg_lap(fwd.u[M]), ops.solve_biharm(fwd.v[M])};
}

// Conjugate gradients in the terminal-data metric for the penalized
// Gramian; used as the inner solve of the power iteration.
Pair gramian_solve(const StepOperator& step, double eps, const Pair& rhs, double tol,
                   int max_iter) {
  const SpaceOps& ops = step.space();
  Pair x{Field::Zero(rhs.p.size()), Field::Zero(rhs.q.size())};
  Pair r = rhs;
  double rr = metric_inner(ops, r, r);
  const double stop = tol * tol * rr;
  Pair d = r;
  for (int it = 0; it < max_iter && rr > stop && rr > 0.0; ++it) {
    const Pair Ad = gramian_apply(step, eps, d);
    const double dAd = metric_inner(ops, d, Ad);
    if (!(dAd > 0.0)) break;
    const double alpha = rr / dAd;
    x.p += alpha * d.p;
    x.q += alpha * d.q;
    r.p -= alpha * Ad.p;
    r.q -= alpha * Ad.q;
    const double rr_new = metric_inner(ops, r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    d.p = r.p + beta * d.p;
    d.q = r.q + beta * d.q;
  }
  return x;
}

double rayleigh(const StepOperator& step, double eps, const Pair& xi) {
  const SpaceOps& ops = step.space();
  const AdjointTrajectory adj = adjoint_solve(step, xi.p, xi.q);
  const double p0 = ops.norm(adj.p.at_half(0), SpaceNorm::L2);
  const double q0 = ops.norm(adj.q.at_half(0), SpaceNorm::L2);
  const double num = p0 * p0 + q0 * q0;
  const double den = observation_quad(step, adj) + eps * metric_inner(ops, xi, xi);
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace

ObsRatioReport obs_ratio(const StepOperator& step, const Field& pT, const Field& qT, double C1) {
  const SpaceOps& ops = step.space();
  const AdjointTrajectory adj = adjoint_solve(step, pT, qT);

  ObsRatioReport rep;
  const double p0 = ops.norm(adj.p.at_half(0), SpaceNorm::L2);
  const double q0 = ops.norm(adj.q.at_half(0), SpaceNorm::L2);
  rep.lhs = p0 * p0 + q0 * q0;
  rep.obs = observation_quad(step, adj);
  const double eps = std::exp(-C1 / std::pow(step.time().dt, 0.1));
  rep.remainder = eps * (ops.h1_inner(pT, pT) + ops.h2_inner(qT, qT));
  const double den = rep.obs + rep.remainder;
  rep.ratio = den > 0.0 ? rep.lhs / den : 0.0;
  return rep;
}

CTEstimate estimate_CT(const StepOperator& step, double C1, int samples, int power_steps,
                       uint64_t seed, double inner_tol) {
  if (samples < 1) throw std::invalid_argument("estimate_CT: need at least one sample");
  const SpaceOps& ops = step.space();
  const int n = ops.grid().N;
  const double eps = std::exp(-C1 / std::pow(step.time().dt, 0.1));

  CTEstimate est;
  Rng rng = Rng::stream(seed, "ct-samples");
  Pair best{Field::Zero(n), Field::Zero(n)};
  for (int k = 0; k < samples; ++k) {
    Pair xi{rng.normal_field(n), rng.normal_field(n)};
    const ObsRatioReport rep = obs_ratio(step, xi.p, xi.q, C1);
    est.sample_reports.push_back(rep);
    est.sample_ratios.push_back(rep.ratio);
    if (rep.ratio >= est.sampled_max) {
      est.sampled_max = rep.ratio;
      best = xi;
    }
  }

  // Power iteration xi <- D^{-1} N xi on the pencil (N, D); the Rayleigh
  // value is monotone nondecreasing along it for this symmetric pair.
  double value = est.sampled_max;
  Pair xi = best;
  const int inner_max = 4 * n + 20;
  for (int stepi = 0; stepi < power_steps; ++stepi) {
    const Pair w = numerator_apply(step, xi);
    Pair z = gramian_solve(step, eps, w, inner_tol, inner_max);
    const double nz = std::sqrt(std::max(1e-300, metric_inner(ops, z, z)));
    z.p /= nz;
    z.q /= nz;
    xi = z;
    value = rayleigh(step, eps, xi);
    est.trace.push_back(value);
  }
  est.refined = std::max(value, est.sampled_max);
  return est;
}

DecayStudy decay_study(const SpaceOps& ops, const SystemParams& params, double T, double T0,
                       const Field& u0, const Field& v0, const std::vector<DecayJob>& jobs,
                       double cg_tol, int max_iter, int threads) {
  if (jobs.empty()) throw std::invalid_argument("decay_study: empty sweep");

  const auto run_one = [&](const DecayJob& job) {
    const TimeGrid tg(T, job.M);
    const TwoStageResult ts =
        two_stage_control(ops, tg, params, u0, v0, T0, job.penalty, cg_tol, max_iter);
    DecayPoint pt;
    pt.M = job.M;
    pt.dt = tg.dt;
    pt.phi = job.penalty.eval(tg.dt);
    pt.sqrt_phi = std::sqrt(pt.phi);
    pt.final_ratio = ts.final_ratio;
    pt.cost_ratio = ts.data_norm > 0.0 ? ts.stage1.control_cost / ts.data_norm : 0.0;
    pt.mid_dual_norm = ts.mid_dual_norm;
    pt.smoothing_ratio = ts.smoothing_ratio;
    pt.iterations = ts.stage1.iterations;
    pt.converged = ts.stage1.converged;
    return pt;
  };

  DecayStudy study;
  if (threads > 1 && jobs.size() > 1) {
    std::vector<std::future<DecayPoint>> futs;
    futs.reserve(jobs.size());
    for (const DecayJob& job : jobs)
      futs.push_back(std::async(std::launch::async, run_one, job));
    for (auto& f : futs) study.points.push_back(f.get());
  } else {
    for (const DecayJob& job : jobs) study.points.push_back(run_one(job));
  }

  study.all_converged = true;
  for (const DecayPoint& pt : study.points) {
    study.all_converged = study.all_converged && pt.converged;
    if (pt.converged) study.fitted_CT = std::max(study.fitted_CT, pt.cost_ratio);
  }

  // Regression of log(final ratio) on log(sqrt phi), walking from the
  // largest penalty downward and stopping once the curve flattens (the
  // saturation floor): a local slope below one half ends the fit range.
  std::vector<std::pair<double, double>> pts;  // (x, y), sorted by descending phi
  {
    std::vector<const DecayPoint*> ordered;
    for (const DecayPoint& pt : study.points)
      if (pt.converged && pt.final_ratio > 0.0 && pt.sqrt_phi > 0.0) ordered.push_back(&pt);
    std::sort(ordered.begin(), ordered.end(),
              [](const DecayPoint* a, const DecayPoint* b) { return a->phi > b->phi; });
    for (size_t j = 0; j < ordered.size(); ++j) {
      const double x = std::log(ordered[j]->sqrt_phi);
      const double y = std::log(ordered[j]->final_ratio);
      if (j >= 1) {
        const double dx = x - pts.back().first;
        if (std::abs(dx) < 1e-14) continue;
        const double local = (y - pts.back().second) / dx;
        if (local < 0.5) {
          study.floor_ratio = ordered[j]->final_ratio;
          break;
        }
      }
      pts.emplace_back(x, y);
    }
  }
  study.points_used = static_cast<int>(pts.size());
  if (pts.size() >= 2) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double nn = static_cast<double>(pts.size());
    const double det = nn * sxx - sx * sx;
    if (std::abs(det) > 0.0) {
      study.slope = (nn * sxy - sx * sy) / det;
      study.intercept = (sy * sxx - sx * sxy) / det;
    }
  }
  return study;
}

}  // namespace sks
