#pragma once

// Staggered time grid with exact discrete calculus.
//
// Two families of nodes on [0, T]:
//   primal nodes   t_n     = n*dt,       n = 0..M
//   dual nodes     t_{n+1/2} = (n+1/2)*dt, n = 0..M
// The last dual node t_{M+1/2} = T + dt/2 lies past the final time on
// purpose: backward (midpoint-to-midpoint) differences of dual sequences
// evaluated at t_M need it, and it is where terminal data for backward
// marches lives.
//
// All identities implemented here (product rules, summation by parts,
// translation/duality of the two quadrature sums) are exact in exact
// arithmetic; the residual checkers report floating-point roundoff only.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sks {

using Field = Eigen::VectorXd;

struct TimeGrid {
  double T = 1.0;
  int M = 1;
  double dt = 1.0;

  TimeGrid() = default;
  TimeGrid(double horizon, int steps) : T(horizon), M(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
    if (steps < 1) throw std::invalid_argument("TimeGrid: need at least one step");
    dt = T / static_cast<double>(M);
  }

  // t_n for n in [0, M]
  double primal(int n) const { return static_cast<double>(n) * dt; }
  // t_{n+1/2} for n in [0, M]; dual(M) = T + dt/2
  double dual(int n) const { return (static_cast<double>(n) + 0.5) * dt; }
};

// Payload helpers. Sequences are generic over the value type: plain
// doubles for scalar checks, Eigen vectors for space-time trajectories.
inline double zero_like(const double&) { return 0.0; }
inline Field zero_like(const Field& f) { return Field::Zero(f.size()); }

inline double pointwise(double a, double b) { return a * b; }
inline Field pointwise(const Field& a, const Field& b) { return a.cwiseProduct(b); }

// Unweighted pairing; all grid identities are bilinear so any fixed inner
// product works. Spatially weighted pairings live in the space module.
inline double inner(double a, double b) { return a * b; }
inline double inner(const Field& a, const Field& b) { return a.dot(b); }

inline double amplitude(double a) { return std::abs(a); }
inline double amplitude(const Field& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

// Sequence sampled at the primal nodes t_0..t_M (M+1 values).
template <class P>
class PrimalSeq {
 public:
  PrimalSeq() = default;
  PrimalSeq(int steps, const P& init) : vals_(static_cast<size_t>(steps) + 1, init) {}
  explicit PrimalSeq(std::vector<P> vals) : vals_(std::move(vals)) {
    if (vals_.empty()) throw std::invalid_argument("PrimalSeq: empty value list");
  }

  int steps() const { return static_cast<int>(vals_.size()) - 1; }
  P& operator[](int n) { return vals_[check(n)]; }
  const P& operator[](int n) const { return vals_[check(n)]; }

 private:
  size_t check(int n) const {
    if (n < 0 || n >= static_cast<int>(vals_.size()))
      throw std::out_of_range("PrimalSeq: index " + std::to_string(n));
    return static_cast<size_t>(n);
  }
  std::vector<P> vals_;
};

// Sequence sampled at the dual nodes t_{1/2}..t_{M+1/2} (M+1 values).
// at_half(n) is the value at t_{n+1/2}.
template <class P>
class DualSeq {
 public:
  DualSeq() = default;
  DualSeq(int steps, const P& init) : vals_(static_cast<size_t>(steps) + 1, init) {}
  explicit DualSeq(std::vector<P> vals) : vals_(std::move(vals)) {
    if (vals_.empty()) throw std::invalid_argument("DualSeq: empty value list");
  }

  int steps() const { return static_cast<int>(vals_.size()) - 1; }
  P& at_half(int n) { return vals_[check(n)]; }
  const P& at_half(int n) const { return vals_[check(n)]; }

 private:
  size_t check(int n) const {
    if (n < 0 || n >= static_cast<int>(vals_.size()))
      throw std::out_of_range("DualSeq: index " + std::to_string(n));
    return static_cast<size_t>(n);
  }
  std::vector<P> vals_;
};

// Quadratures. The primal sum runs over n = 1..M, the dual sum over
// n = 0..M-1; u^0 respectively u^{M+1/2} never enter.
template <class P>
P integral_primal(const TimeGrid& g, const PrimalSeq<P>& u) {
  if (u.steps() != g.M) throw std::invalid_argument("integral_primal: sequence/grid mismatch");
  P acc = zero_like(u[0]);
  for (int n = 1; n <= g.M; ++n) acc += u[n];
  return static_cast<P>(g.dt * acc);
}

template <class P>
P integral_dual(const TimeGrid& g, const DualSeq<P>& u) {
  if (u.steps() != g.M) throw std::invalid_argument("integral_dual: sequence/grid mismatch");
  P acc = zero_like(u.at_half(0));
  for (int n = 0; n < g.M; ++n) acc += u.at_half(n);
  return static_cast<P>(g.dt * acc);
}

// Translations between the two node families. Slots a translation cannot
// fill (the half node t_{M+1/2}, or t_0) are zeroed; the quadratures and
// identities below never read them.
template <class P>
DualSeq<P> t_plus(const PrimalSeq<P>& u) {  // (t+ u)^{n+1/2} = u^{n+1}
  const int M = u.steps();
  DualSeq<P> r(M, zero_like(u[0]));
  for (int n = 0; n < M; ++n) r.at_half(n) = u[n + 1];
  return r;
}

template <class P>
DualSeq<P> t_minus(const PrimalSeq<P>& u) {  // (t- u)^{n+1/2} = u^n
  const int M = u.steps();
  DualSeq<P> r(M, zero_like(u[0]));
  for (int n = 0; n < M; ++n) r.at_half(n) = u[n];
  return r;
}

template <class P>
PrimalSeq<P> tbar_plus(const DualSeq<P>& u) {  // (tb+ u)^n = u^{n+1/2}
  const int M = u.steps();
  PrimalSeq<P> r(M, zero_like(u.at_half(0)));
  for (int n = 1; n <= M; ++n) r[n] = u.at_half(n);
  return r;
}

template <class P>
PrimalSeq<P> tbar_minus(const DualSeq<P>& u) {  // (tb- u)^n = u^{n-1/2}
  const int M = u.steps();
  PrimalSeq<P> r(M, zero_like(u.at_half(0)));
  for (int n = 1; n <= M; ++n) r[n] = u.at_half(n - 1);
  return r;
}

// Difference quotients. diff_forward lives on the dual nodes (slope of a
// primal sequence across each interval); diff_backward lives on the
// primal nodes (slope of a dual sequence across each midpoint pair).
template <class P>
DualSeq<P> diff_forward(const TimeGrid& g, const PrimalSeq<P>& u) {
  if (u.steps() != g.M) throw std::invalid_argument("diff_forward: sequence/grid mismatch");
  DualSeq<P> r(g.M, zero_like(u[0]));
  for (int n = 0; n < g.M; ++n) r.at_half(n) = static_cast<P>((u[n + 1] - u[n]) / g.dt);
  return r;
}

template <class P>
PrimalSeq<P> diff_backward(const TimeGrid& g, const DualSeq<P>& u) {
  if (u.steps() != g.M) throw std::invalid_argument("diff_backward: sequence/grid mismatch");
  PrimalSeq<P> r(g.M, zero_like(u.at_half(0)));
  for (int n = 1; n <= g.M; ++n)
    r[n] = static_cast<P>((u.at_half(n) - u.at_half(n - 1)) / g.dt);
  return r;
}

struct IdentityResidual {
  std::string name;
  double abs = 0.0;  // worst absolute mismatch over the index range
  double rel = 0.0;  // abs divided by the magnitude of the terms involved
};

struct CalculusReport {
  std::vector<IdentityResidual> identities;
  double max_abs = 0.0;
  double max_rel = 0.0;

  void add(IdentityResidual r) {
    max_abs = std::max(max_abs, r.abs);
    max_rel = std::max(max_rel, r.rel);
    identities.push_back(std::move(r));
  }
};

namespace detail {

inline void fold(IdentityResidual& r, double mismatch, double scale) {
  r.abs = std::max(r.abs, mismatch);
  r.rel = std::max(r.rel, scale > 0.0 ? mismatch / scale : mismatch);
}

}  // namespace detail

// Product rules for midpoint sequences, checked at every interior primal
// node. Both operand orders of the Leibniz rule are covered, plus the two
// square expansions (the dt-proportional correction is what separates the
// discrete rule from its continuum limit).
template <class P>
CalculusReport check_product_rules(const TimeGrid& g, const DualSeq<P>& f,
                                   const DualSeq<P>& g1, const DualSeq<P>& g2) {
  const auto prod = [&](const DualSeq<P>& a, const DualSeq<P>& b) {
    DualSeq<P> r(g.M, zero_like(a.at_half(0)));
    for (int n = 0; n <= g.M; ++n) r.at_half(n) = pointwise(a.at_half(n), b.at_half(n));
    return r;
  };

  const DualSeq<P> g12 = prod(g1, g2);
  const DualSeq<P> ff = prod(f, f);
  const PrimalSeq<P> d_g12 = diff_backward(g, g12);
  const PrimalSeq<P> d_g1 = diff_backward(g, g1);
  const PrimalSeq<P> d_g2 = diff_backward(g, g2);
  const PrimalSeq<P> d_f = diff_backward(g, f);
  const PrimalSeq<P> d_ff = diff_backward(g, ff);
  const PrimalSeq<P> g1p = tbar_plus(g1), g1m = tbar_minus(g1);
  const PrimalSeq<P> g2p = tbar_plus(g2), g2m = tbar_minus(g2);
  const PrimalSeq<P> fp = tbar_plus(f), fm = tbar_minus(f);

  CalculusReport rep;
  IdentityResidual leib_a{"leibniz_shift_left"}, leib_b{"leibniz_shift_right"};
  IdentityResidual sq_p{"square_expand_plus"}, sq_m{"square_expand_minus"};
  for (int n = 1; n <= g.M; ++n) {
    const double scale_g =
        amplitude(g1.at_half(n)) * amplitude(d_g2[n]) + amplitude(d_g1[n]) * amplitude(g2.at_half(n - 1)) +
        amplitude(d_g12[n]);
    detail::fold(leib_a,
                 amplitude(static_cast<P>(d_g12[n] - pointwise(g1p[n], d_g2[n]) - pointwise(d_g1[n], g2m[n]))),
                 scale_g);
    detail::fold(leib_b,
                 amplitude(static_cast<P>(d_g12[n] - pointwise(g1m[n], d_g2[n]) - pointwise(d_g1[n], g2p[n]))),
                 scale_g);

    const double scale_f = amplitude(f.at_half(n)) * amplitude(d_f[n]) + amplitude(d_ff[n]);
    const P half_dff = static_cast<P>(0.5 * d_ff[n]);
    const P corr = static_cast<P>(0.5 * g.dt * pointwise(d_f[n], d_f[n]));
    detail::fold(sq_p, amplitude(static_cast<P>(pointwise(fp[n], d_f[n]) - half_dff - corr)), scale_f);
    detail::fold(sq_m, amplitude(static_cast<P>(pointwise(fm[n], d_f[n]) - half_dff + corr)), scale_f);
  }
  rep.add(leib_a);
  rep.add(leib_b);
  rep.add(sq_p);
  rep.add(sq_m);
  return rep;
}

// Summation by parts and the interchange between the two quadratures,
// checked globally (one residual per identity). u, u2 are primal, v, v2
// dual; all four enter so that the mixed identities get independent data.
template <class P>
CalculusReport check_integration_by_parts(const TimeGrid& g, const PrimalSeq<P>& u,
                                          const DualSeq<P>& v, const PrimalSeq<P>& u2,
                                          const DualSeq<P>& v2) {
  const auto pair_primal = [&](const PrimalSeq<P>& a, const PrimalSeq<P>& b) {
    PrimalSeq<double> r(g.M, 0.0);
    for (int n = 0; n <= g.M; ++n) r[n] = inner(a[n], b[n]);
    return r;
  };
  const auto pair_dual = [&](const DualSeq<P>& a, const DualSeq<P>& b) {
    DualSeq<double> r(g.M, 0.0);
    for (int n = 0; n <= g.M; ++n) r.at_half(n) = inner(a.at_half(n), b.at_half(n));
    return r;
  };

  CalculusReport rep;
  const double su = [&] {
    double m = 0.0;
    for (int n = 0; n <= g.M; ++n) m = std::max(m, amplitude(u[n]));
    return m;
  }();
  const double sv = [&] {
    double m = 0.0;
    for (int n = 0; n <= g.M; ++n) m = std::max(m, amplitude(v.at_half(n)));
    return m;
  }();
  const double scale = std::max(1e-300, su * sv * std::max(g.T, 1.0));

  {  // dual quadrature of (t+ u, v) equals primal quadrature of (u, tb- v)
    IdentityResidual r{"quad_interchange_plus"};
    const double lhs = integral_dual(g, pair_dual(t_plus(u), v));
    const double rhs = integral_primal(g, pair_primal(u, tbar_minus(v)));
    detail::fold(r, std::abs(lhs - rhs), scale);
    rep.add(r);
  }
  {  // same for t-, with the two endpoint corrections
    IdentityResidual r{"quad_interchange_minus"};
    const double lhs = integral_dual(g, pair_dual(t_minus(u), v));
    const double rhs = g.dt * inner(u[0], v.at_half(0)) - g.dt * inner(u[g.M], v.at_half(g.M)) +
                       integral_primal(g, pair_primal(u, tbar_plus(v)));
    detail::fold(r, std::abs(lhs - rhs), scale);
    rep.add(r);
  }
  {  // mixed summation by parts: forward difference against a dual weight
    IdentityResidual r{"sum_by_parts_mixed"};
    const double lhs = integral_dual(g, pair_dual(diff_forward(g, u), v));
    const double rhs = -inner(u[0], v.at_half(0)) + inner(u[g.M], v.at_half(g.M)) -
                       integral_primal(g, pair_primal(u, diff_backward(g, v)));
    detail::fold(r, std::abs(lhs - rhs), scale);
    rep.add(r);
  }
  {  // both factors dual
    IdentityResidual r{"sum_by_parts_dual_pair"};
    const double lhs = integral_primal(g, pair_primal(diff_backward(g, v), tbar_minus(v2)));
    const double rhs = -inner(v.at_half(0), v2.at_half(0)) + inner(v.at_half(g.M), v2.at_half(g.M)) -
                       integral_primal(g, pair_primal(tbar_plus(v), diff_backward(g, v2)));
    detail::fold(r, std::abs(lhs - rhs), scale);
    rep.add(r);
  }
  {  // both factors primal
    IdentityResidual r{"sum_by_parts_primal_pair"};
    const double lhs = integral_dual(g, pair_dual(diff_forward(g, u), t_plus(u2)));
    const double rhs = -inner(u[0], u2[0]) + inner(u[g.M], u2[g.M]) -
                       integral_dual(g, pair_dual(t_minus(u), diff_forward(g, u2)));
    detail::fold(r, std::abs(lhs - rhs), scale);
    rep.add(r);
  }
  return rep;
}

}  // namespace sks
