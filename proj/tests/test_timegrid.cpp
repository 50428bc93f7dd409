#include <doctest.h>

#include <cmath>
#include <vector>

#include "sks/rng.hpp"
#include "sks/timegrid.hpp"

using namespace sks;

namespace {

PrimalSeq<double> primal_from(const TimeGrid& g, double (*f)(double)) {
  PrimalSeq<double> u(g.M, 0.0);
  for (int n = 0; n <= g.M; ++n) u[n] = f(g.primal(n));
  return u;
}

DualSeq<double> dual_from(const TimeGrid& g, double (*f)(double)) {
  DualSeq<double> v(g.M, 0.0);
  for (int n = 0; n <= g.M; ++n) v.at_half(n) = f(g.dual(n));
  return v;
}

PrimalSeq<double> random_primal(const TimeGrid& g, Rng& rng) {
  PrimalSeq<double> u(g.M, 0.0);
  for (int n = 0; n <= g.M; ++n) u[n] = rng.normal();
  return u;
}

DualSeq<double> random_dual(const TimeGrid& g, Rng& rng) {
  DualSeq<double> v(g.M, 0.0);
  for (int n = 0; n <= g.M; ++n) v.at_half(n) = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("grid nodes and spacing") {
  const TimeGrid g(1.0, 4);
  CHECK(g.dt == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g.primal(0) == 0.0);
  CHECK(g.primal(4) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.primal(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g.dual(0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g.dual(3) == doctest::Approx(0.875).epsilon(1e-15));
}

TEST_CASE("quadratures on hand-checked sequences") {
  const TimeGrid g(1.0, 2);

  // Right-endpoint rule over t_n = {0, 0.5, 1}: dt (0.5 + 1.0).
  auto u = primal_from(g, [](double t) { return t; });
  CHECK(integral_primal(g, u) == doctest::Approx(0.75).epsilon(1e-15));

  // Midpoint rule over t_{n+1/2} = {0.25, 0.75}; the terminal slot t_{M+1/2}
  // never enters the sum.
  auto v = dual_from(g, [](double t) { return t; });
  CHECK(integral_dual(g, v) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("difference quotients are exact on quadratics") {
  const TimeGrid g(1.0, 2);

  auto u = primal_from(g, [](double t) { return t * t; });
  auto du = diff_forward(g, u);
  CHECK(du.at_half(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(du.at_half(1) == doctest::Approx(1.5).epsilon(1e-14));

  // Centered across midpoint pairs, so the quotient hits the derivative of
  // t^2 at the primal node exactly.
  auto v = dual_from(g, [](double t) { return t * t; });
  auto dv = diff_backward(g, v);
  CHECK(dv[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(dv[2] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("translations fill the documented slots") {
  const TimeGrid g(1.0, 2);
  PrimalSeq<double> u(2, 0.0);
  u[0] = 10.0;
  u[1] = 20.0;
  u[2] = 30.0;

  auto p = t_plus(u);
  CHECK(p.at_half(0) == 20.0);
  CHECK(p.at_half(1) == 30.0);
  CHECK(p.at_half(2) == 0.0);  // unfillable terminal slot stays zero

  auto m = t_minus(u);
  CHECK(m.at_half(0) == 10.0);
  CHECK(m.at_half(1) == 20.0);

  DualSeq<double> v(2, 0.0);
  v.at_half(0) = 1.0;
  v.at_half(1) = 2.0;
  v.at_half(2) = 3.0;

  auto bp = tbar_plus(v);
  CHECK(bp[0] == 0.0);  // unfillable initial slot stays zero
  CHECK(bp[1] == 2.0);
  CHECK(bp[2] == 3.0);

  auto bm = tbar_minus(v);
  CHECK(bm[1] == 1.0);
  CHECK(bm[2] == 2.0);
}

TEST_CASE("index guards throw") {
  const TimeGrid g(1.0, 4);
  PrimalSeq<double> u(4, 0.0);
  CHECK_THROWS_AS(u[5], std::out_of_range);
  CHECK_THROWS_AS(u[-1], std::out_of_range);
  PrimalSeq<double> short_u(3, 0.0);
  CHECK_THROWS_AS(integral_primal(g, short_u), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid(-1.0, 4), std::invalid_argument);
}

TEST_CASE("product rules hold to rounding on random data") {
  for (int M : {4, 16, 64}) {
    const TimeGrid g(1.0, M);
    for (int inst = 0; inst < 10; ++inst) {
      Rng rng = Rng::stream(900 + inst, "calculus");
      auto f = random_dual(g, rng);
      auto g1 = random_dual(g, rng);
      auto g2 = random_dual(g, rng);
      auto rep = check_product_rules(g, f, g1, g2);
      CHECK(rep.identities.size() == 4);
      CHECK(rep.max_rel <= 1e-12);
    }
  }
}

TEST_CASE("summation by parts holds to rounding on random data") {
  for (int M : {4, 16, 64}) {
    const TimeGrid g(1.0, M);
    for (int inst = 0; inst < 10; ++inst) {
      Rng rng = Rng::stream(700 + inst, "calculus");
      auto u = random_primal(g, rng);
      auto v = random_dual(g, rng);
      auto u2 = random_primal(g, rng);
      auto v2 = random_dual(g, rng);
      auto rep = check_integration_by_parts(g, u, v, u2, v2);
      CHECK(rep.identities.size() == 5);
      CHECK(rep.max_rel <= 1e-12);
    }
  }
}

TEST_CASE("identity reports carry stable names") {
  const TimeGrid g(1.0, 8);
  Rng rng = Rng::stream(11, "calculus");
  auto f = random_dual(g, rng);
  auto g1 = random_dual(g, rng);
  auto g2 = random_dual(g, rng);
  auto rep = check_product_rules(g, f, g1, g2);
  REQUIRE(rep.identities.size() == 4);
  CHECK(rep.identities[0].name == "leibniz_shift_left");
  CHECK(rep.identities[1].name == "leibniz_shift_right");
  CHECK(rep.identities[2].name == "square_expand_plus");
  CHECK(rep.identities[3].name == "square_expand_minus");

  auto u = random_primal(g, rng);
  auto v = random_dual(g, rng);
  auto u2 = random_primal(g, rng);
  auto v2 = random_dual(g, rng);
  auto rep2 = check_integration_by_parts(g, u, v, u2, v2);
  REQUIRE(rep2.identities.size() == 5);
  CHECK(rep2.identities[0].name == "quad_interchange_plus");
  CHECK(rep2.identities[1].name == "quad_interchange_minus");
  CHECK(rep2.identities[2].name == "sum_by_parts_mixed");
  CHECK(rep2.identities[3].name == "sum_by_parts_dual_pair");
  CHECK(rep2.identities[4].name == "sum_by_parts_primal_pair");
}
