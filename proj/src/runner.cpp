#include "sks/runner.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <utility>

#include "sks/carleman.hpp"
#include "sks/hum.hpp"
#include "sks/obs.hpp"
#include "sks/report.hpp"
#include "sks/rng.hpp"

namespace sks {

namespace {

using nlohmann::json;
using Rows = std::vector<std::vector<std::string>>;

struct Workbench {
  SpaceGrid grid;
  SpaceOps ops;
  TimeGrid tg;
  StepOperator step;

  explicit Workbench(const RunConfig& cfg)
      : grid(cfg.N), ops(grid), tg(cfg.T, cfg.M), step(ops, tg, cfg.params) {}
};

std::pair<Field, Field> initial_pair(const RunConfig& cfg, const SpaceGrid& grid,
                                     const char* tag_u, const char* tag_v) {
  Rng ru = Rng::stream(cfg.seed, tag_u);
  Rng rv = Rng::stream(cfg.seed, tag_v);
  return {make_initial(cfg.init_u, grid, ru), make_initial(cfg.init_v, grid, rv)};
}

void emit_trajectory(Emitter& em, const std::string& name, const Workbench& wb,
                     const ForwardTrajectory& fwd) {
  Rows rows;
  rows.reserve(static_cast<size_t>(wb.tg.M + 1) * wb.grid.N);
  for (int n = 0; n <= wb.tg.M; ++n)
    for (int i = 0; i < wb.grid.N; ++i)
      rows.push_back({std::to_string(n), format_full(wb.tg.primal(n)),
                      format_full(wb.grid.node(i)), format_full(fwd.u[n][i]),
                      format_full(fwd.v[n][i])});
  em.write_csv(name, {"n", "t", "x", "u", "v"}, rows);
}

int run_simulate(const RunConfig& cfg, Emitter& em, int) {
  Workbench wb(cfg);
  const auto [u0, v0] = initial_pair(cfg, wb.grid, "init-u", "init-v");
  const ForwardTrajectory fwd = forward_solve(wb.step, u0, v0, nullptr);
  emit_trajectory(em, "trajectory.csv", wb, fwd);

  const double data = std::hypot(wb.ops.norm(u0, SpaceNorm::L2), wb.ops.norm(v0, SpaceNorm::L2));
  const double fin = std::hypot(wb.ops.norm(fwd.u[wb.tg.M], SpaceNorm::L2),
                                wb.ops.norm(fwd.v[wb.tg.M], SpaceNorm::L2));
  const double fin_dual = std::hypot(wb.ops.norm(fwd.u[wb.tg.M], SpaceNorm::Hm1),
                                     wb.ops.norm(fwd.v[wb.tg.M], SpaceNorm::Hm2));
  em.write_json("summary.json", {{"N", cfg.N},
                                 {"M", cfg.M},
                                 {"T", cfg.T},
                                 {"dt", wb.tg.dt},
                                 {"data_l2", data},
                                 {"final_l2", fin},
                                 {"final_dual", fin_dual}});
  return kExitOk;
}

int run_adjoint(const RunConfig& cfg, Emitter& em, int) {
  Workbench wb(cfg);
  const auto [pT, qT] = initial_pair(cfg, wb.grid, "terminal-p", "terminal-q");
  const AdjointTrajectory adj = adjoint_solve(wb.step, pT, qT);

  Rows rows;
  rows.reserve(static_cast<size_t>(wb.tg.M) * wb.grid.N);
  for (int m = 0; m < wb.tg.M; ++m)
    for (int i = 0; i < wb.grid.N; ++i)
      rows.push_back({std::to_string(m), format_full(wb.tg.dual(m)),
                      format_full(wb.grid.node(i)), format_full(adj.p.at_half(m)[i]),
                      format_full(adj.q.at_half(m)[i])});
  em.write_csv("adjoint.csv", {"half_index", "t", "x", "p", "q"}, rows);

  const double p0 = wb.ops.norm(adj.p.at_half(0), SpaceNorm::L2);
  const double q0 = wb.ops.norm(adj.q.at_half(0), SpaceNorm::L2);
  em.write_json("summary.json",
                {{"N", cfg.N},
                 {"M", cfg.M},
                 {"dt", wb.tg.dt},
                 {"first_half_l2_sq", p0 * p0 + q0 * q0},
                 {"terminal_h1", wb.ops.norm(pT, SpaceNorm::H01)},
                 {"terminal_h2", wb.ops.norm(qT, SpaceNorm::H02)}});
  return kExitOk;
}

int run_calculus(const RunConfig& cfg, Emitter& em, int) {
  const TimeGrid tg(cfg.T, cfg.M);
  Rng rng = Rng::stream(cfg.seed, "calculus");
  const auto draw_dual = [&] {
    DualSeq<double> s(tg.M, 0.0);
    for (int n = 0; n <= tg.M; ++n) s.at_half(n) = rng.normal();
    return s;
  };
  const auto draw_primal = [&] {
    PrimalSeq<double> s(tg.M, 0.0);
    for (int n = 0; n <= tg.M; ++n) s[n] = rng.normal();
    return s;
  };

  constexpr int kInstances = 100;
  std::map<std::string, IdentityResidual> worst;
  const auto merge = [&](const CalculusReport& rep) {
    for (const IdentityResidual& r : rep.identities) {
      IdentityResidual& w = worst[r.name];
      w.name = r.name;
      w.abs = std::max(w.abs, r.abs);
      w.rel = std::max(w.rel, r.rel);
    }
  };
  for (int k = 0; k < kInstances; ++k) {
    merge(check_product_rules(tg, draw_dual(), draw_dual(), draw_dual()));
    merge(check_integration_by_parts(tg, draw_primal(), draw_dual(), draw_primal(),
                                     draw_dual()));
  }

  Rows rows;
  double max_rel = 0.0;
  for (const auto& [name, r] : worst) {
    rows.push_back({name, format_full(r.abs), format_full(r.rel)});
    max_rel = std::max(max_rel, r.rel);
  }
  em.write_csv("calculus.csv", {"identity", "max_abs", "max_rel"}, rows);

  constexpr double kTol = 1e-12;
  const bool pass = max_rel <= kTol;
  em.write_json("summary.json", {{"instances", kInstances},
                                 {"M", cfg.M},
                                 {"max_rel", max_rel},
                                 {"tolerance", kTol},
                                 {"pass", pass}});
  return pass ? kExitOk : kExitProperty;
}

int run_carleman(const RunConfig& cfg, Emitter& em, int) {
  const SpaceGrid grid(cfg.N);
  const SpaceOps ops(grid);
  const TimeGrid tg(cfg.T, cfg.M);

  WeightParams wp = cfg.weights;
  ScaledParams scaled;
  if (cfg.auto_scale) {
    scaled = scale_parameters(cfg.T, wp.m, cfg.tau2, cfg.delta1, wp.eps0, tg.dt);
    wp.tau = scaled.tau;
    wp.delta = scaled.delta;
    try {
      wp.validate();
    } catch (const std::exception& e) {
      const auto g = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return std::string(buf);
      };
      throw ConfigError("weights.auto_scale: derived delta " + g(scaled.delta) +
                        " is out of range (" + e.what() + "); the step dt " + g(tg.dt) +
                        " exceeds the reference step dt_ref " + g(scaled.dt_ref) +
                        " for these (tau2, delta1) — refine the grid or lower tau2");
    }
  }
  const BumpPoly beta = build_bump(cfg.params.omega);
  const CarlemanWeights w(beta, wp);

  const ThetaBoundsReport theta = check_theta_bounds(w, tg.dt);
  const ParameterLedger ledger = parameter_ledger(wp, tg.dt);

  // The grid-sampled lemma checks evaluate the weights at the extended dual
  // node T + dt/2, which lies in the weight domain only when the half-step
  // premise (the half_step_in_domain ledger entry) holds. When it fails the
  // audit reports the violated condition instead of evaluating out of domain.
  const bool half_step_ok = 0.5 * tg.dt < wp.delta * wp.T;
  const bool premises_ok = half_step_ok && theta.dt_hypothesis_ok;

  WeightLemmasReport lemmas;
  TimeConjugationReport tconj;
  if (premises_ok) {
    lemmas = check_discrete_weight_lemmas(w, tg);
    DualSeq<double> zt(tg.M, 0.0);
    for (int n = 0; n <= tg.M; ++n) zt.at_half(n) = std::sin(3.0 * tg.dual(n) + 0.5);
    tconj = time_conjugation_residual(w, tg, zt, 0.5);
  }

  Field z(grid.N);
  for (int i = 0; i < grid.N; ++i) z[i] = std::sin(std::numbers::pi * grid.node(i));
  const ConjugationReport conj =
      conjugation_identity_residual(w, ops, w.s(cfg.T / 2.0), z);

  Rows conds;
  const auto cond = [&](const std::string& group, const std::string& name, double value,
                        double bound, bool ok) {
    conds.push_back({group, name, format_full(value), format_full(bound), ok ? "1" : "0"});
  };
  for (const LedgerEntry& e : ledger.entries) cond("ledger", e.name, e.value, e.bound, e.ok);
  cond("theta", "max_theta", theta.max_theta, theta.max_theta_bound,
       theta.max_theta <= theta.max_theta_bound);
  cond("theta", "max_theta_extended", theta.max_theta_ext, theta.max_theta_ext_bound,
       theta.max_theta_ext <= theta.max_theta_ext_bound);
  cond("theta", "dt_hypothesis", tg.dt,
       std::min(std::pow(wp.delta * wp.T, wp.m) / std::pow(2.0, wp.m), wp.delta * wp.T / 2.0),
       theta.dt_hypothesis_ok);
  em.write_csv("conditions.csv", {"group", "name", "value", "bound", "ok"}, conds);

  Rows fits;
  const auto fit = [&](const std::string& name, double value) {
    fits.push_back({name, format_full(value)});
  };
  fit("theta_slope_C", theta.slope_C);
  if (premises_ok) {
    fit("reciprocal_drift_C", lemmas.reciprocal_drift.fitted_C);
    fit("reciprocal_drift_max_abs", lemmas.reciprocal_drift_max_abs);
    for (size_t l = 0; l < lemmas.power_diff.size(); ++l)
      fit(lemmas.power_diff[l].name, lemmas.power_diff[l].fitted_C);
    for (size_t l = 0; l < lemmas.power_shift.size(); ++l)
      fit(lemmas.power_shift[l].name, lemmas.power_shift[l].fitted_C);
  }
  fit("conjugation_rel", conj.rel);
  fit("conjugation_max_abs", conj.max_abs);
  if (premises_ok) {
    fit("time_conjugation_K", tconj.fitted_K);
    fit("time_conjugation_max_abs", tconj.max_abs_remainder);
  }
  em.write_csv("fits.csv", {"name", "value"}, fits);

  json summary = {{"m", wp.m},
                  {"k", wp.k},
                  {"lambda", wp.lambda},
                  {"tau", wp.tau},
                  {"delta", wp.delta},
                  {"auto_scale", cfg.auto_scale},
                  {"theta_pass", theta.pass},
                  {"premises_ok", premises_ok},
                  {"ledger_all_ok", ledger.all_ok},
                  {"conjugation_rel", conj.rel}};
  if (premises_ok) summary["time_conjugation_K"] = tconj.fitted_K;
  if (cfg.auto_scale) summary["dt_ref"] = scaled.dt_ref;
  em.write_json("summary.json", summary);

  return theta.pass && premises_ok ? kExitOk : kExitProperty;
}

int run_control(const RunConfig& cfg, Emitter& em, int) {
  Workbench wb(cfg);
  const auto [u0, v0] = initial_pair(cfg, wb.grid, "init-u", "init-v");
  const HumResult res = solve_hum(wb.step, u0, v0, cfg.hum);

  Rows iters;
  for (const HumIterate& it : res.history)
    iters.push_back({std::to_string(it.iter), format_full(it.J), format_full(it.grad_norm)});
  em.write_csv("hum_iterations.csv", {"iter", "J", "grad_norm"}, iters);

  Rows ctrl;
  ctrl.reserve(static_cast<size_t>(wb.tg.M) * wb.grid.N);
  for (int m = 0; m < wb.tg.M; ++m)
    for (int i = 0; i < wb.grid.N; ++i)
      ctrl.push_back({std::to_string(m), format_full(wb.tg.dual(m)),
                      format_full(wb.grid.node(i)), format_full(res.control.at_half(m)[i])});
  em.write_csv("control.csv", {"half_index", "t", "x", "h"}, ctrl);
  emit_trajectory(em, "trajectory.csv", wb, res.trajectory);

  em.write_json("summary.json", {{"converged", res.converged},
                                 {"iterations", res.iterations},
                                 {"phi", cfg.hum.phi},
                                 {"cg_tol", cfg.hum.cg_tol},
                                 {"J", res.J},
                                 {"grad_norm0", res.grad_norm0},
                                 {"grad_norm", res.grad_norm},
                                 {"data_norm", res.data_norm},
                                 {"final_l2", res.final_l2},
                                 {"final_dual", res.final_dual},
                                 {"control_cost", res.control_cost},
                                 {"cost_ratio", res.cost_ratio},
                                 {"terminal_identity_rel", res.terminal_identity_rel},
                                 {"terminal_identity_rel_l2", res.terminal_identity_rel_l2}});
  if (!res.converged) {
    std::cerr << "control: conjugate gradients stopped at iteration " << res.iterations
              << " with relative gradient " << res.grad_norm / std::max(res.grad_norm0, 1e-300)
              << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int run_two_stage(const RunConfig& cfg, Emitter& em, int) {
  Workbench wb(cfg);
  const auto [u0, v0] = initial_pair(cfg, wb.grid, "init-u", "init-v");
  const TwoStageResult ts = two_stage_control(wb.ops, wb.tg, cfg.params, u0, v0, cfg.T0,
                                              cfg.penalty, cfg.hum.cg_tol, cfg.hum.max_iter);

  Rows iters;
  for (const HumIterate& it : ts.stage1.history)
    iters.push_back({std::to_string(it.iter), format_full(it.J), format_full(it.grad_norm)});
  em.write_csv("stage1_iterations.csv", {"iter", "J", "grad_norm"}, iters);
  emit_trajectory(em, "trajectory.csv", wb, ts.trajectory);

  em.write_json("summary.json", {{"M0", ts.M0},
                                 {"T0", cfg.T0},
                                 {"phi_base", ts.phi_base},
                                 {"phi_scaled", ts.phi_scaled},
                                 {"stage1_converged", ts.stage1.converged},
                                 {"stage1_iterations", ts.stage1.iterations},
                                 {"stage1_cost", ts.stage1.control_cost},
                                 {"mid_dual_norm", ts.mid_dual_norm},
                                 {"smoothing_ratio", ts.smoothing_ratio},
                                 {"data_norm", ts.data_norm},
                                 {"final_l2", ts.final_l2},
                                 {"final_ratio", ts.final_ratio}});
  if (!ts.stage1.converged) {
    std::cerr << "two-stage: stage-1 conjugate gradients did not converge\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int run_observability(const RunConfig& cfg, Emitter& em, int) {
  Workbench wb(cfg);
  const CTEstimate est =
      estimate_CT(wb.step, cfg.C1, cfg.samples, cfg.power_steps, cfg.seed);

  Rows rows;
  for (size_t k = 0; k < est.sample_reports.size(); ++k) {
    const ObsRatioReport& r = est.sample_reports[k];
    rows.push_back({std::to_string(k), format_full(r.lhs), format_full(r.obs),
                    format_full(r.remainder), format_full(r.ratio)});
  }
  em.write_csv("obs_samples.csv", {"sample", "lhs", "obs", "remainder", "ratio"}, rows);

  Rows trace;
  for (size_t k = 0; k < est.trace.size(); ++k)
    trace.push_back({std::to_string(k), format_full(est.trace[k])});
  em.write_csv("power_trace.csv", {"step", "rayleigh"}, trace);

  em.write_json("summary.json", {{"C1", cfg.C1},
                                 {"samples", cfg.samples},
                                 {"power_steps", cfg.power_steps},
                                 {"sampled_max", est.sampled_max},
                                 {"CT_sq_estimate", est.refined},
                                 {"CT_estimate", std::sqrt(est.refined)}});
  return kExitOk;
}

int run_decay(const RunConfig& cfg, Emitter& em, int threads) {
  const SpaceGrid grid(cfg.N);
  const SpaceOps ops(grid);
  Rng ru = Rng::stream(cfg.seed, "init-u");
  Rng rv = Rng::stream(cfg.seed, "init-v");
  const Field u0 = make_initial(cfg.init_u, grid, ru);
  const Field v0 = make_initial(cfg.init_v, grid, rv);

  std::vector<DecayJob> jobs;
  for (int M : cfg.M_sweep) jobs.push_back({M, cfg.penalty});
  if (!cfg.phi_targets.empty()) {
    const double dt = cfg.T / cfg.M;
    for (double phi : cfg.phi_targets) {
      // Exponential rate hitting this level exactly at the configured step.
      const double C1 = -std::log(phi) * std::pow(dt, 0.1);
      jobs.push_back({cfg.M, PenaltyFn::exponential(C1)});
    }
  }
  if (jobs.empty()) jobs.push_back({cfg.M, cfg.penalty});

  const DecayStudy study = decay_study(ops, cfg.params, cfg.T, cfg.T0, u0, v0, jobs,
                                       cfg.hum.cg_tol, cfg.hum.max_iter, threads);

  Rows rows;
  for (const DecayPoint& pt : study.points)
    rows.push_back({std::to_string(pt.M), format_full(pt.dt), format_full(pt.phi),
                    format_full(pt.sqrt_phi), format_full(pt.final_ratio),
                    format_full(pt.cost_ratio), format_full(pt.mid_dual_norm),
                    format_full(pt.smoothing_ratio), std::to_string(pt.iterations),
                    pt.converged ? "1" : "0"});
  em.write_csv("decay.csv",
               {"M", "dt", "phi", "sqrt_phi", "final_ratio", "cost_ratio", "mid_dual_norm",
                "smoothing_ratio", "iterations", "converged"},
               rows);

  em.write_json("summary.json", {{"slope", study.slope},
                                 {"intercept", study.intercept},
                                 {"points_used", study.points_used},
                                 {"floor_ratio", study.floor_ratio},
                                 {"fitted_CT", study.fitted_CT},
                                 {"all_converged", study.all_converged}});

  bool any_converged = false;
  for (const DecayPoint& pt : study.points) any_converged = any_converged || pt.converged;
  if (!any_converged) {
    std::cerr << "decay-study: no sweep point converged\n";
    return kExitNumerical;
  }
  return kExitOk;
}

using Handler = int (*)(const RunConfig&, Emitter&, int);

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> table = {
      {"simulate", run_simulate},   {"adjoint", run_adjoint},
      {"calculus-check", run_calculus}, {"carleman-check", run_carleman},
      {"control", run_control},     {"two-stage", run_two_stage},
      {"observability", run_observability}, {"decay-study", run_decay}};
  return table;
}

}  // namespace

std::vector<std::string> subcommand_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : handlers()) names.push_back(name);
  return names;
}

int run_subcommand(const std::string& name, const RunConfig& cfg,
                   const std::filesystem::path& out_dir, int threads) {
  const auto it = handlers().find(name);
  if (it == handlers().end()) {
    std::cerr << "unknown subcommand: " << name << "\n";
    return kExitConfig;
  }
  try {
    Emitter em(out_dir);
    const int code = it->second(cfg, em, threads);
    em.write_manifest(cfg.echo, cfg.seed);
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace sks
