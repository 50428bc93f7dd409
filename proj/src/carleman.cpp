#include "sks/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sks {

namespace {

double pow_int(double b, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

double BumpPoly::deriv(int order, double x) const {
  if (order < 0 || order > 4) throw std::invalid_argument("BumpPoly::deriv: order must be 0..4");
  // Differentiate the monomial coefficients exactly, then evaluate.
  std::array<double, 5> c = coef_;
  for (int d = 0; d < order; ++d) {
    for (int j = 0; j + 1 < 5; ++j) c[static_cast<size_t>(j)] = (j + 1) * c[static_cast<size_t>(j) + 1];
    c[4] = 0.0;
  }
  double v = 0.0;
  for (int j = 4; j >= 0; --j) v = v * x + c[static_cast<size_t>(j)];
  return v;
}

BumpPoly build_bump(const ObservationWindow& w0, int audit_points) {
  if (!(0.0 < w0.a && w0.a < w0.b && w0.b < 1.0))
    throw std::invalid_argument("build_bump: window must sit strictly inside (0,1)");
  if (audit_points < 1001) throw std::invalid_argument("build_bump: audit grid too coarse");

  const double xc = 0.5 * (w0.a + w0.b);
  // beta'(xc) = 0 forces the log-slope of g at the centre; the curvature
  // is a free knob searched over until the audit passes.
  const double slope = (2.0 * xc - 1.0) / (xc * (1.0 - xc));
  std::vector<double> curvatures{0.0, 0.5 * slope * slope, slope * slope, 2.0 * slope * slope,
                                 4.0 * slope * slope};

  std::string last_failure = "no candidate tried";
  for (double curv : curvatures) {
    // g(x) = 1 + slope (x - xc) + curv (x - xc)^2, expanded to monomials.
    const double g0 = 1.0 - slope * xc + curv * xc * xc;
    const double g1 = slope - 2.0 * curv * xc;
    const double g2 = curv;

    BumpPoly b;
    b.window_ = w0;
    b.coef_ = {0.0, g0, g1 - g0, g2 - g1, -g2};

    // Audit on a uniform grid over [0,1]: bump positive inside, single
    // slope sign change located inside the window, slope bounded away
    // from zero outside it.
    bool ok = true;
    double sup = 0.0;
    double dcrit = std::numeric_limits<double>::infinity();
    int sign_changes = 0;
    double prev_slope_sign = 1.0;
    for (int i = 0; i <= audit_points - 1 && ok; ++i) {
      const double x = static_cast<double>(i) / static_cast<double>(audit_points - 1);
      const double v = b.eval(x);
      const double d = b.deriv(1, x);
      if (x > 0.0 && x < 1.0 && !(v > 0.0)) {
        last_failure = "bump not positive at x=" + std::to_string(x);
        ok = false;
        break;
      }
      sup = std::max(sup, v);
      if (x <= w0.a || x >= w0.b) {
        dcrit = std::min(dcrit, std::abs(d));
        const double want = (x <= w0.a) ? 1.0 : -1.0;
        if (d * want <= 0.0) {
          last_failure = "slope has the wrong sign outside the window at x=" + std::to_string(x);
          ok = false;
          break;
        }
      } else {
        const double sgn = (d >= 0.0) ? 1.0 : -1.0;
        if (sgn != prev_slope_sign && prev_slope_sign == 1.0 && sgn == -1.0) ++sign_changes;
        if (sgn == 1.0 && prev_slope_sign == -1.0) {
          last_failure = "slope changes sign more than once inside the window";
          ok = false;
          break;
        }
        prev_slope_sign = sgn;
      }
    }
    if (!ok) continue;
    if (sign_changes != 1) {
      last_failure = "expected exactly one slope sign change inside the window";
      continue;
    }
    if (std::abs(b.deriv(1, xc)) > 1e-12 * std::max(1.0, std::abs(slope))) {
      last_failure = "critical point drifted off the window midpoint";
      continue;
    }
    b.sup_ = sup;
    b.delta_crit_ = dcrit;
    return b;
  }

  std::ostringstream msg;
  msg << "build_bump: no admissible quadratic factor for window (" << w0.a << ", " << w0.b
      << "); last audit failure: " << last_failure;
  throw std::runtime_error(msg.str());
}

void WeightParams::validate() const {
  if (!(m >= 1.0 / 3.0 - 1e-12)) throw std::invalid_argument("WeightParams: m must be >= 1/3");
  if (!(k > m)) throw std::invalid_argument("WeightParams: need k > m");
  if (!(lambda > 0.0)) throw std::invalid_argument("WeightParams: lambda must be positive");
  if (!(tau > 0.0)) throw std::invalid_argument("WeightParams: tau must be positive");
  if (!(delta > 0.0 && delta <= 0.5))
    throw std::invalid_argument("WeightParams: delta must lie in (0, 1/2]");
  if (!(T > 0.0)) throw std::invalid_argument("WeightParams: T must be positive");
  if (!(eps0 > 0.0) || !(eps1 > 0.0))
    throw std::invalid_argument("WeightParams: smallness levels must be positive");
}

CarlemanWeights::CarlemanWeights(BumpPoly beta, WeightParams p)
    : beta_(std::move(beta)), p_(p) {
  p_.validate();
  c2_ = p_.k * beta_.sup();
  c1_ = std::exp(p_.k * (p_.m + 1.0) / p_.m * beta_.sup());
  // phi < 0 everywhere iff the shifted exponent stays below c1.
  if (!(c2_ + beta_.sup() < c1_))
    throw std::runtime_error("CarlemanWeights: profile fails to stay negative (k too large?)");
}

void CarlemanWeights::check_domain(double t) const {
  const double lo = -p_.delta * p_.T;
  const double hi = p_.T + p_.delta * p_.T;
  if (!(t > lo && t < hi)) {
    std::ostringstream msg;
    msg << "CarlemanWeights: time " << t << " outside (" << lo << ", " << hi << ")";
    throw std::domain_error(msg.str());
  }
}

double CarlemanWeights::theta(double t) const {
  check_domain(t);
  const double P = (t + p_.delta * p_.T) * (p_.T + p_.delta * p_.T - t);
  return std::pow(P, -p_.m);
}

double CarlemanWeights::theta_d1(double t) const {
  check_domain(t);
  const double P = (t + p_.delta * p_.T) * (p_.T + p_.delta * p_.T - t);
  const double P1 = p_.T - 2.0 * t;
  return -p_.m * std::pow(P, -p_.m - 1.0) * P1;
}

double CarlemanWeights::theta_d2(double t) const {
  check_domain(t);
  const double P = (t + p_.delta * p_.T) * (p_.T + p_.delta * p_.T - t);
  const double P1 = p_.T - 2.0 * t;
  return p_.m * (p_.m + 1.0) * std::pow(P, -p_.m - 2.0) * P1 * P1 +
         2.0 * p_.m * std::pow(P, -p_.m - 1.0);
}

double CarlemanWeights::phi(double x) const { return phi_exp(x) - std::exp(p_.lambda * c1_); }

double CarlemanWeights::phi_exp(double x) const {
  return std::exp(p_.lambda * (c2_ + beta_.eval(x)));
}

double CarlemanWeights::phi_exp_deriv(int order, double x) const {
  const double E = phi_exp(x);
  const double l = p_.lambda;
  const double b1 = beta_.deriv(1, x), b2 = beta_.deriv(2, x), b3 = beta_.deriv(3, x),
               b4 = beta_.deriv(4, x);
  switch (order) {
    case 0:
      return E;
    case 1:
      return l * b1 * E;
    case 2:
      return (l * b2 + l * l * b1 * b1) * E;
    case 3:
      return (l * b3 + 3.0 * l * l * b1 * b2 + pow_int(l, 3) * pow_int(b1, 3)) * E;
    case 4:
      return (l * b4 + 4.0 * l * l * b1 * b3 + 3.0 * l * l * b2 * b2 +
              6.0 * pow_int(l, 3) * b1 * b1 * b2 + pow_int(l, 4) * pow_int(b1, 4)) *
             E;
  }
  throw std::invalid_argument("phi_exp_deriv: order must be 0..4");
}

double CarlemanWeights::r(double t, double x) const { return std::exp(s(t) * phi(x)); }
double CarlemanWeights::rho(double t, double x) const { return std::exp(-s(t) * phi(x)); }

ThetaBoundsReport check_theta_bounds(const CarlemanWeights& w, double dt, int audit_points) {
  const WeightParams& p = w.params();
  ThetaBoundsReport rep;
  rep.max_theta_bound = std::pow(p.delta, -p.m) * std::pow(p.T, -2.0 * p.m);
  rep.max_theta_ext_bound = std::pow(2.0, p.m) * rep.max_theta_bound;
  rep.dt_hypothesis_ok = dt <= std::pow(p.delta * p.T, p.m) / std::pow(2.0, p.m) &&
                         dt <= 0.5 * p.delta * p.T;

  for (int i = 0; i < audit_points; ++i) {
    const double t = p.T * static_cast<double>(i) / static_cast<double>(audit_points - 1);
    const double th = w.theta(t);
    rep.max_theta = std::max(rep.max_theta, th);
    const double denom = p.T * std::pow(th, 1.0 + 1.0 / p.m);
    rep.slope_C = std::max(rep.slope_C, std::abs(w.theta_d1(t)) / denom);
  }
  if (rep.dt_hypothesis_ok) {
    for (int i = 0; i < audit_points; ++i) {
      const double t = (p.T + dt) * static_cast<double>(i) / static_cast<double>(audit_points - 1);
      rep.max_theta_ext = std::max(rep.max_theta_ext, w.theta(t));
    }
  }
  const double slack = 1.0 + 1e-12;
  rep.pass = rep.dt_hypothesis_ok && rep.max_theta <= rep.max_theta_bound * slack &&
             rep.max_theta_ext <= rep.max_theta_ext_bound * slack;
  return rep;
}

WeightLemmasReport check_discrete_weight_lemmas(const CarlemanWeights& w, const TimeGrid& tg,
                                                int x_samples) {
  const WeightParams& p = w.params();
  WeightLemmasReport rep;

  // Drift of the reciprocal weight along the grid. The premise keeps the
  // per-step change of s phi below one so the expansion regime applies.
  rep.reciprocal_drift.name = "reciprocal_drift";
  rep.reciprocal_drift.precondition_ok =
      tg.dt * p.tau / (std::pow(p.delta, p.m + 1.0) * std::pow(p.T, 2.0 * p.m + 1.0)) <= 1.0;
  const double drift_scale =
      tg.dt * (p.tau / (std::pow(p.delta, p.m + 2.0) * std::pow(p.T, 2.0 * p.m + 2.0)) +
               p.tau * p.tau /
                   (std::pow(p.delta, 2.0 * p.m + 2.0) * std::pow(p.T, 4.0 * p.m + 2.0)));
  for (int j = 1; j < x_samples - 1; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(x_samples - 1);
    const double ph = w.phi(x);
    for (int n = 1; n <= tg.M; ++n) {
      const double tm = tg.dual(n - 1), tp = tg.dual(n);
      const double drho = (w.rho(tp, x) - w.rho(tm, x)) / tg.dt;
      const double resid = w.r(tm, x) * drho + p.tau * w.theta_d1(tm) * ph;
      rep.reciprocal_drift_max_abs = std::max(rep.reciprocal_drift_max_abs, std::abs(resid));
    }
  }
  rep.reciprocal_drift.max_residual = rep.reciprocal_drift_max_abs;
  rep.reciprocal_drift.fitted_C = rep.reciprocal_drift_max_abs / drift_scale;

  for (int ell = 1; ell <= 4; ++ell) {
    FittedBound diff;
    diff.name = "power_diff_l" + std::to_string(ell);
    const double tail =
        tg.dt / (std::pow(p.delta, p.m * ell + 2.0) * std::pow(p.T, 2.0 * p.m * ell + 2.0));
    FittedBound shift;
    shift.name = "power_shift_l" + std::to_string(ell);
    const double shift_scale =
        tg.dt / (std::pow(p.delta, p.m * ell + 1.0) * std::pow(p.T, 2.0 * p.m * ell + 1.0));
    for (int n = 1; n <= tg.M; ++n) {
      const double tm = tg.dual(n - 1), tp = tg.dual(n);
      const double thm = std::pow(w.theta(tm), ell), thp = std::pow(w.theta(tp), ell);
      const double dq = std::abs((thp - thm) / tg.dt);
      const double lead = p.T * std::pow(w.theta(tm), ell + 1.0 / p.m);
      diff.fitted_C = std::max(diff.fitted_C, dq / (lead + tail));
      const double excess = thm - thp;
      shift.max_residual = std::max(shift.max_residual, excess);
      if (excess > 0.0) shift.fitted_C = std::max(shift.fitted_C, excess / shift_scale);
    }
    rep.power_diff.push_back(diff);
    rep.power_shift.push_back(shift);
  }
  return rep;
}

ParameterLedger parameter_ledger(const WeightParams& p, double dt, double tau1) {
  ParameterLedger led;
  const auto push = [&](std::string name, double value, double bound, bool le) {
    LedgerEntry e;
    e.name = std::move(name);
    e.value = value;
    e.bound = bound;
    e.ok = le ? (value <= bound) : (value >= bound);
    led.entries.push_back(e);
  };

  const double Tm = std::pow(p.T, 2.0 * p.m);
  push("heat_smallness", dt * pow_int(p.tau, 4) / (std::pow(p.delta, 4.0 * p.m) * std::pow(p.T, 6.0 * p.m)),
       p.eps0, true);
  push("fourth_order_smallness",
       dt * pow_int(p.tau, 5) / (std::pow(p.delta, 10.0 * p.m) * std::pow(p.T, 14.0 * p.m)),
       p.eps0, true);
  push("single_obs_smallness",
       dt * pow_int(p.tau, 10) / (std::pow(p.delta, 10.0 * p.m) * std::pow(p.T, 20.0 * p.m)),
       p.eps1, true);
  push("tau_lower_bound", p.tau,
       tau1 * (Tm + std::pow(p.T, 2.0 * p.m - 1.0) + std::pow(p.T, 2.0 * p.m - 1.0 / 3.0)),
       false);
  push("reciprocal_drift_premise",
       dt * p.tau / (std::pow(p.delta, p.m + 1.0) * std::pow(p.T, 2.0 * p.m + 1.0)), 1.0, true);
  push("half_step_in_domain", 0.5 * dt, p.delta * p.T, true);

  led.all_ok = true;
  for (const LedgerEntry& e : led.entries) led.all_ok = led.all_ok && e.ok;
  return led;
}

ScaledParams scale_parameters(double T, double m, double tau2, double delta1, double eps0,
                              double dt) {
  if (!(T > 0.0) || !(m > 0.0) || !(tau2 > 0.0) || !(delta1 > 0.0) || !(eps0 > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("scale_parameters: all inputs must be positive");
  ScaledParams s;
  const double poly = std::pow(T, 2.0 * m) + std::pow(T, 2.0 * m - 1.0) +
                      std::pow(T, 2.0 * m - 1.0 / 3.0);
  s.tau = tau2 * poly;
  const double shape = 1.0 + 1.0 / T + 1.0 / std::cbrt(T);
  s.dt_ref = eps0 * std::pow(delta1, 10.0 * m) / pow_int(tau2, 10) / pow_int(shape, 10);
  s.delta = std::pow(dt / s.dt_ref, 1.0 / (10.0 * m)) * delta1;
  return s;
}

ConjugationReport conjugation_identity_residual(const CarlemanWeights& w, const SpaceOps& ops,
                                                double s_frozen, const Field& z, double margin) {
  const SpaceGrid& g = ops.grid();
  if (z.size() != g.N)
    throw std::invalid_argument("conjugation_identity_residual: field size mismatch");
  const double s = s_frozen;
  const double l = w.params().lambda;

  Field rho(g.N), rmul(g.N);
  for (int i = 0; i < g.N; ++i) {
    const double ph = w.phi(g.node(i));
    rho[i] = std::exp(-s * ph);
    rmul[i] = std::exp(s * ph);
  }

  const Field z1 = ops.d1().apply(z);
  const Field z2 = ops.d2().apply(z);
  const Field z3 = ops.d3().apply(z);
  const Field z4 = ops.d4().apply(z);
  const Field lhs_core = ops.d4().apply(rho.cwiseProduct(z));

  ConjugationReport rep;
  for (int i = 0; i < g.N; ++i) {
    const double x = g.node(i);
    if (x < margin || x > 1.0 - margin) continue;

    const double E = w.phi_exp(x);
    const double b1 = w.beta().deriv(1, x), b2 = w.beta().deriv(2, x),
                 b3 = w.beta().deriv(3, x), b4 = w.beta().deriv(4, x);
    double terms[22];
    int t = 0;
    // Principal part first, then the lower-order remainder terms.
    terms[t++] = -4.0 * pow_int(s, 3) * pow_int(l, 3) * pow_int(b1, 3) * pow_int(E, 3) * z1[i];
    terms[t++] = pow_int(s, 4) * pow_int(l, 4) * pow_int(b1, 4) * pow_int(E, 4) * z[i];
    terms[t++] = 6.0 * s * s * l * l * b1 * b1 * E * E * z2[i];
    terms[t++] = -4.0 * s * l * b1 * E * z3[i];
    terms[t++] = z4[i];
    terms[t++] = 6.0 * s * s * l * l * (2.0 * b1 * b2 + 2.0 * l * pow_int(b1, 3)) * E * E * z1[i];
    terms[t++] = -6.0 * s * l * b2 * E * z2[i];
    terms[t++] = -6.0 * s * l * l * b1 * b1 * E * z2[i];
    terms[t++] = -4.0 * s * l * b3 * E * z1[i];
    terms[t++] = -12.0 * s * l * l * b1 * b2 * E * z1[i];
    terms[t++] = -4.0 * s * pow_int(l, 3) * pow_int(b1, 3) * E * z1[i];
    terms[t++] = -s * l * b4 * E * z[i];
    terms[t++] = -4.0 * s * l * l * b1 * b3 * E * z[i];
    terms[t++] = -3.0 * s * l * l * b2 * b2 * E * z[i];
    terms[t++] = -6.0 * s * pow_int(l, 3) * b1 * b1 * b2 * E * z[i];
    terms[t++] = -s * pow_int(l, 4) * pow_int(b1, 4) * E * z[i];
    terms[t++] = 3.0 * s * s * l * l * b2 * b2 * E * E * z[i];
    terms[t++] = 4.0 * s * s * l * l * b1 * b3 * E * E * z[i];
    terms[t++] = 18.0 * s * s * pow_int(l, 3) * b1 * b1 * b2 * E * E * z[i];
    terms[t++] = 7.0 * s * s * pow_int(l, 4) * pow_int(b1, 4) * E * E * z[i];
    terms[t++] = -6.0 * pow_int(s, 3) * pow_int(l, 3) * b1 * b1 * b2 * pow_int(E, 3) * z[i];
    terms[t++] = -6.0 * pow_int(s, 3) * pow_int(l, 4) * pow_int(b1, 4) * pow_int(E, 3) * z[i];

    double rhs = 0.0, mag = 0.0;
    for (int j = 0; j < t; ++j) {
      rhs += terms[j];
      mag += std::abs(terms[j]);
    }
    const double lhs = rmul[i] * lhs_core[i];
    rep.max_abs = std::max(rep.max_abs, std::abs(lhs - rhs));
    rep.scale = std::max(rep.scale, std::max(mag, std::abs(lhs)));
    ++rep.nodes_measured;
  }
  rep.rel = rep.scale > 0.0 ? rep.max_abs / rep.scale : rep.max_abs;
  return rep;
}

TimeConjugationReport time_conjugation_residual(const CarlemanWeights& w, const TimeGrid& tg,
                                                const DualSeq<double>& z, double x) {
  if (z.steps() != tg.M)
    throw std::invalid_argument("time_conjugation_residual: sequence/grid mismatch");
  const WeightParams& p = w.params();
  const double ph = w.phi(x);

  double supz = 0.0;
  for (int n = 0; n <= tg.M; ++n) supz = std::max(supz, std::abs(z.at_half(n)));

  TimeConjugationReport rep;
  rep.remainder_scale = tg.dt * p.tau * p.tau /
                        (std::pow(p.delta, 2.0 * p.m + 2.0) * std::pow(p.T, 4.0 * p.m + 2.0)) *
                        supz;
  for (int n = 1; n <= tg.M; ++n) {
    const double tm = tg.dual(n - 1), tp = tg.dual(n);
    const double zm = z.at_half(n - 1), zp = z.at_half(n);
    const double dz = (zp - zm) / tg.dt;
    const double d_rho_z = (w.rho(tp, x) * zp - w.rho(tm, x) * zm) / tg.dt;
    const double lhs = -w.r(tm, x) * d_rho_z;
    const double main = -dz + p.tau * ph * w.theta_d1(tm) * zm +
                        tg.dt * p.tau * ph * w.theta_d1(tm) * dz;
    rep.max_abs_remainder = std::max(rep.max_abs_remainder, std::abs(lhs - main));
  }
  rep.fitted_K =
      rep.remainder_scale > 0.0 ? rep.max_abs_remainder / rep.remainder_scale : 0.0;
  return rep;
}

CarlemanFunctionals carleman_functionals(const CarlemanWeights& w, const SpaceOps& ops,
                                         const TimeGrid& tg, const DualSeq<Field>& p,
                                         const DualSeq<Field>& q,
                                         const ObservationWindow& window) {
  const SpaceGrid& g = ops.grid();
  if (p.steps() != tg.M || q.steps() != tg.M)
    throw std::invalid_argument("carleman_functionals: trajectory/grid mismatch");
  const double tau = w.params().tau;
  const std::vector<int> win = window_nodes(g, window);

  CarlemanFunctionals f;
  const auto weighted_sum = [&](const Field& vals, double t, int ell) {
    // h-weighted spatial sum of exp(2 s phi) theta^ell vals^2 at time t.
    const double th = w.theta(t);
    const double thl = std::pow(th, ell);
    double acc = 0.0;
    for (int i = 0; i < g.N; ++i) {
      const double rr = w.r(t, g.node(i));
      acc += rr * rr * thl * vals[i] * vals[i];
    }
    return g.h * acc;
  };

  for (int n = 1; n <= tg.M; ++n) {
    const double tm = tg.dual(n - 1);
    const Field dp = (p.at_half(n) - p.at_half(n - 1)) / tg.dt;
    const Field dq = (q.at_half(n) - q.at_half(n - 1)) / tg.dt;
    const Field& pm = p.at_half(n - 1);
    const Field& qm = q.at_half(n - 1);

    f.I_H += tg.dt * (weighted_sum(dp, tm, -1) + weighted_sum(ops.d2().apply(pm), tm, -1)) / tau;
    f.I_H += tg.dt * tau * weighted_sum(ops.d1().apply(pm), tm, 1);
    f.I_H += tg.dt * pow_int(tau, 3) * weighted_sum(pm, tm, 3);

    f.I_KS += tg.dt * (weighted_sum(dq, tm, -1) + weighted_sum(ops.d4().apply(qm), tm, -1)) / tau;
    f.I_KS += tg.dt * tau * weighted_sum(ops.d3().apply(qm), tm, 1);
    f.I_KS += tg.dt * pow_int(tau, 3) * weighted_sum(ops.d2().apply(qm), tm, 3);
    f.I_KS += tg.dt * pow_int(tau, 5) * weighted_sum(ops.d1().apply(qm), tm, 5);
    f.I_KS += tg.dt * pow_int(tau, 7) * weighted_sum(qm, tm, 7);

    // Window observation with the high power of s = tau theta.
    const double th = w.theta(tm);
    double obs_acc = 0.0;
    for (int i : win) {
      const double rr = w.r(tm, g.node(i));
      obs_acc += rr * rr * qm[i] * qm[i];
    }
    f.obs += tg.dt * g.h * std::pow(tau * th, 39.0) * obs_acc;
  }

  // Endpoint layers: value terms at the first and last midpoints, plus
  // one extra derivative order at the terminal midpoint.
  const double t0 = tg.dual(0), tM = tg.dual(tg.M);
  const auto layer = [&](const Field& vals, double t) {
    double acc = 0.0;
    for (int i = 0; i < g.N; ++i) {
      const double rr = w.r(t, g.node(i));
      acc += rr * rr * vals[i] * vals[i];
    }
    return g.h * acc;
  };
  f.W_H = layer(p.at_half(0), t0) + layer(p.at_half(tg.M), tM) +
          layer(ops.d1().apply(p.at_half(tg.M)), tM);
  f.W_KS = layer(q.at_half(0), t0) + layer(q.at_half(tg.M), tM) +
           layer(ops.d1().apply(q.at_half(0)), t0) + layer(ops.d1().apply(q.at_half(tg.M)), tM) +
           layer(ops.d2().apply(q.at_half(tg.M)), tM);

  const double denom = f.obs + (f.W_H + f.W_KS) / tg.dt;
  f.ratio = denom > 0.0 ? (f.I_H + f.I_KS) / denom : 0.0;
  return f;
}

}  // namespace sks
