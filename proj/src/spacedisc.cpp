#include "sks/spacedisc.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sks/rng.hpp"

namespace sks {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void add(Triplets& t, int row, int col, double v, int n) {
  if (col >= 0 && col < n && v != 0.0) t.emplace_back(row, col, v);
}

}  // namespace

SpaceGrid::SpaceGrid(int interior_nodes) : N(interior_nodes) {
  if (N < 5) throw std::invalid_argument("SpaceGrid: need at least 5 interior nodes");
  h = 1.0 / static_cast<double>(N + 1);
}

DiscreteOperator build_operator(const SpaceGrid& grid, int order, Bc bc) {
  if (order < 1 || order > 4) throw std::invalid_argument("build_operator: order must be 1..4");
  if ((order == 3 || order == 4) && bc != Bc::Clamped)
    throw std::invalid_argument("build_operator: orders 3 and 4 need the clamped elimination");

  const int n = grid.N;
  const double h = grid.h;
  Triplets trip;
  trip.reserve(static_cast<size_t>(5 * n));

  // Work in physical indices p = i+1; boundary values w_0 = w_{N+1} = 0
  // drop out, and for the clamped elimination the ghosts fold back:
  // w_{-1} -> w_1, w_{N+2} -> w_N.
  const auto col_of = [&](int p) -> int {
    if (p == 0 || p == n + 1) return -1;  // boundary node, value zero
    if (p == -1) return 0;                // ghost, reflected
    if (p == n + 2) return n - 1;
    return p - 1;
  };
  const auto stamp = [&](int row, int p, double v) { add(trip, row, col_of(p), v, n); };

  for (int i = 0; i < n; ++i) {
    const int p = i + 1;
    switch (order) {
      case 1: {
        const double c = 1.0 / (2.0 * h);
        stamp(i, p + 1, c);
        stamp(i, p - 1, -c);
        break;
      }
      case 2: {
        const double c = 1.0 / (h * h);
        stamp(i, p + 1, c);
        stamp(i, p, -2.0 * c);
        stamp(i, p - 1, c);
        break;
      }
      case 3: {
        const double c = 1.0 / (2.0 * h * h * h);
        stamp(i, p + 2, c);
        stamp(i, p + 1, -2.0 * c);
        stamp(i, p - 1, 2.0 * c);
        stamp(i, p - 2, -c);
        break;
      }
      case 4: {
        const double c = 1.0 / (h * h * h * h);
        stamp(i, p - 2, c);
        stamp(i, p - 1, -4.0 * c);
        stamp(i, p, 6.0 * c);
        stamp(i, p + 1, -4.0 * c);
        stamp(i, p + 2, c);
        break;
      }
    }
  }

  DiscreteOperator op;
  op.order = order;
  op.bc = (order >= 3) ? Bc::Clamped : bc;
  op.mat.resize(n, n);
  op.mat.setFromTriplets(trip.begin(), trip.end());
  op.mat.makeCompressed();
  return op;
}

std::vector<int> window_nodes(const SpaceGrid& grid, const ObservationWindow& w) {
  if (!(0.0 <= w.a && w.a < w.b && w.b <= 1.0))
    throw std::invalid_argument("window_nodes: need 0 <= a < b <= 1");
  std::vector<int> idx;
  for (int i = 0; i < grid.N; ++i) {
    const double x = grid.node(i);
    if (x > w.a && x < w.b) idx.push_back(i);
  }
  if (idx.empty()) throw std::invalid_argument("window_nodes: window contains no grid node");
  return idx;
}

Field window_mask(const SpaceGrid& grid, const ObservationWindow& w) {
  Field m = Field::Zero(grid.N);
  for (int i : window_nodes(grid, w)) m[i] = 1.0;
  return m;
}

SpaceOps::SpaceOps(const SpaceGrid& grid)
    : grid_(grid),
      d1_(build_operator(grid, 1, Bc::Dirichlet)),
      d2_(build_operator(grid, 2, Bc::Dirichlet)),
      d3_(build_operator(grid, 3, Bc::Clamped)),
      d4_(build_operator(grid, 4, Bc::Clamped)) {
  neg_l2_ = (-d2_.mat).eval();
  neg_l2_solver_.compute(neg_l2_);
  if (neg_l2_solver_.info() != Eigen::Success)
    throw std::runtime_error("SpaceOps: second-difference factorization failed");
  b4_solver_.compute(d4_.mat);
  if (b4_solver_.info() != Eigen::Success)
    throw std::runtime_error("SpaceOps: fourth-difference factorization failed");
}

double SpaceOps::l2_inner(const Field& f, const Field& g) const {
  return grid_.h * f.dot(g);
}

double SpaceOps::h1_inner(const Field& f, const Field& g) const {
  return grid_.h * f.dot(neg_l2_ * g);
}

double SpaceOps::h2_inner(const Field& f, const Field& g) const {
  return grid_.h * f.dot(d4_.mat * g);
}

double SpaceOps::norm(const Field& f, SpaceNorm which) const {
  const auto quad = [&](const Field& w, const Eigen::SparseMatrix<double>& A) {
    return std::sqrt(std::max(0.0, grid_.h * w.dot(A * w)));
  };
  switch (which) {
    case SpaceNorm::L2:
      return std::sqrt(std::max(0.0, l2_inner(f, f)));
    case SpaceNorm::H01:
      return quad(f, neg_l2_);
    case SpaceNorm::H02:
      return quad(f, d4_.mat);
    case SpaceNorm::Hm1: {
      // ||f||_{-1}^2 = h * w.f with -w'' = f; dual to the gradient form.
      const Field w = solve_neg_lap(f);
      return std::sqrt(std::max(0.0, grid_.h * w.dot(f)));
    }
    case SpaceNorm::Hm2: {
      const Field w = solve_biharm(f);
      return std::sqrt(std::max(0.0, grid_.h * w.dot(f)));
    }
  }
  throw std::logic_error("SpaceOps::norm: unknown norm tag");
}

Field SpaceOps::solve_neg_lap(const Field& f) const { return neg_l2_solver_.solve(f); }
Field SpaceOps::solve_biharm(const Field& f) const { return b4_solver_.solve(f); }

PoincareReport poincare_check(const SpaceOps& ops, int samples, uint64_t seed) {
  const SpaceGrid& g = ops.grid();
  PoincareReport rep;
  rep.continuum = 1.0 / std::numbers::pi;
  // Smallest eigenvalue of the negative second difference is known in
  // closed form; its inverse square root bounds every sampled ratio.
  const double lam1 = 4.0 / (g.h * g.h) * std::pow(std::sin(std::numbers::pi * g.h / 2.0), 2);
  rep.discrete_bound = 1.0 / std::sqrt(lam1);

  Field s(g.N);
  for (int i = 0; i < g.N; ++i) s[i] = std::sin(std::numbers::pi * g.node(i));
  rep.sine_ratio = ops.norm(s, SpaceNorm::L2) / ops.norm(s, SpaceNorm::H01);

  Rng rng = Rng::stream(seed, "poincare");
  double worst = rep.sine_ratio;
  for (int k = 0; k < samples; ++k) {
    const Field f = rng.normal_field(g.N);
    const double h01 = ops.norm(f, SpaceNorm::H01);
    if (h01 > 0.0) worst = std::max(worst, ops.norm(f, SpaceNorm::L2) / h01);
  }
  rep.max_sampled_ratio = worst;
  return rep;
}

}  // namespace sks
