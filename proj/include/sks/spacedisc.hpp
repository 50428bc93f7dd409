#pragma once

// Second-order finite differences on the interior nodes of (0, 1).
//
// A grid with N interior nodes has spacing h = 1/(N+1); x_i = (i+1)*h for
// array index i. Homogeneous boundary values are eliminated from the
// stencils. Two eliminations are supported: value-only (first and second
// derivative), and value-plus-slope via ghost reflection (third and
// fourth derivative, whose five-point stencils reach past the boundary).

#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "sks/timegrid.hpp"

namespace sks {

enum class Bc { Dirichlet, Clamped };
enum class SpaceNorm { L2, H01, H02, Hm1, Hm2 };

struct SpaceGrid {
  int N = 1;
  double h = 0.5;

  SpaceGrid() = default;
  explicit SpaceGrid(int interior_nodes);
  double node(int i) const { return (i + 1) * h; }  // i in [0, N)
};

struct DiscreteOperator {
  int order = 0;
  Bc bc = Bc::Dirichlet;
  Eigen::SparseMatrix<double> mat;  // N x N

  Field apply(const Field& w) const { return mat * w; }
};

// Derivative matrix of the given order. Orders 3 and 4 require the
// clamped elimination; orders 1 and 2 accept either flag (the matrices
// coincide because their stencils never reach past the boundary nodes).
DiscreteOperator build_operator(const SpaceGrid& grid, int order, Bc bc);

// Observation interval; a node belongs to it strictly.
struct ObservationWindow {
  double a = 0.0;
  double b = 1.0;
};

std::vector<int> window_nodes(const SpaceGrid& grid, const ObservationWindow& w);
Field window_mask(const SpaceGrid& grid, const ObservationWindow& w);

// Grid plus the operator/norm kit the solvers share. The two symmetric
// positive definite matrices (negative second difference, fourth
// difference) are factored once; the dual-space norms are defined through
// solves with them, which keeps them exactly dual to the primal norms.
class SpaceOps {
 public:
  explicit SpaceOps(const SpaceGrid& grid);

  const SpaceGrid& grid() const { return grid_; }
  const DiscreteOperator& d1() const { return d1_; }
  const DiscreteOperator& d2() const { return d2_; }
  const DiscreteOperator& d3() const { return d3_; }
  const DiscreteOperator& d4() const { return d4_; }

  double l2_inner(const Field& f, const Field& g) const;
  double h1_inner(const Field& f, const Field& g) const;  // gradient form
  double h2_inner(const Field& f, const Field& g) const;  // curvature form
  double norm(const Field& f, SpaceNorm which) const;

  // w with -w'' = f, respectively w'''' = f (clamped).
  Field solve_neg_lap(const Field& f) const;
  Field solve_biharm(const Field& f) const;

 private:
  SpaceGrid grid_;
  DiscreteOperator d1_, d2_, d3_, d4_;
  Eigen::SparseMatrix<double> neg_l2_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> neg_l2_solver_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> b4_solver_;
};

struct PoincareReport {
  double max_sampled_ratio = 0.0;  // worst ||f|| / ||f'|| over the samples
  double sine_ratio = 0.0;         // ratio for the lowest sine mode
  double discrete_bound = 0.0;     // 1/sqrt of the smallest gradient-form eigenvalue
  double continuum = 0.0;          // 1/pi
};

PoincareReport poincare_check(const SpaceOps& ops, int samples, uint64_t seed);

}  // namespace sks
