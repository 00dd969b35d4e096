#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>

#include "forge/analysis.hpp"
#include "forge/core.hpp"
#include "forge/preglue.hpp"

namespace forge {

using Vector = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// --- grids -----------------------------------------------------------------

// Nodes x(s) on s in [-1, 1]: uniform when stretch = 0, otherwise
// x = L sinh(stretch s) / sinh(stretch), clustering nodes near 0.
struct Axis {
  std::vector<double> x, jac;  // jac = dx/ds
  double ds = 0;
  bool periodic = false;  // periodic axes wrap and have no boundary nodes
  int size() const { return static_cast<int>(x.size()); }
};
Axis make_axis(int n, double half_width, double stretch = 0.0);
// n nodes on [-pi, pi) with wrap-around.
Axis make_periodic_axis(int n);

// Tensor grid of offsets from an anchor. Nodes on a non-periodic face are
// boundary nodes, where corrections are frozen to zero.
class Grid {
 public:
  Grid(Point3 anchor, Axis x, Axis y, Axis t);

  const Point3& anchor() const { return anchor_; }
  const Axis& axis(int i) const { return ax_[i]; }
  int nodes() const { return static_cast<int>(vol_.size()); }
  int interior() const { return static_cast<int>(interior_.size()); }
  int index(int i, int j, int k) const { return (i * ax_[1].size() + j) * ax_[2].size() + k; }
  std::array<int, 3> coords(int node) const;
  Vec3 offset(int node) const;
  Point3 point(int node) const { return anchor_.shifted(offset(node)); }
  double volume(int node) const { return vol_[node]; }
  // Position of a node among the unknowns, -1 on the boundary.
  int unknown(int node) const { return unknown_[node]; }
  const std::vector<int>& interior_nodes() const { return interior_; }
  // Neighbour of node along axis a in direction +1 / -1; -1 past a boundary.
  int neighbour(int node, int a, int dir) const;
  double min_spacing() const;

 private:
  Point3 anchor_;
  std::array<Axis, 3> ax_;
  std::vector<double> vol_;
  std::vector<int> unknown_, interior_;
};

// Background configuration sampled on every node of a grid.
struct Background {
  std::shared_ptr<const Grid> grid;
  std::vector<FieldValue> c;            // (A, Phi)
  std::vector<std::array<Ad, 3>> psi;   // Bogomolny error *F - d_A Phi
  std::vector<Ad> sigma;                // unit diagonal direction used by pairings
};
// f(offset) evaluates the field at anchor + offset; psi from order-4 finite
// differences with step fd_h. sigma defaults to Phi/|Phi| (e3 where Phi = 0).
Background sample_background(std::shared_ptr<const Grid> grid, const LocalField& f, double fd_h = 1e-4,
                             const std::function<Ad(const Vec3&)>& sigma = {});

// --- packing -----------------------------------------------------------------
// Interior vectors hold 12 numbers per unknown node for mixed forms
// (a_x, a_y, a_t, psi; each 3 su(2) components), 9 for 1-forms and 3 for 0-forms.

Vector pack_mixed(const Grid& g, const std::vector<MixedForm>& u);
std::vector<MixedForm> unpack_mixed(const Grid& g, const Vector& v);
Vector pack_one_form(const Grid& g, const std::vector<std::array<Ad, 3>>& f);
std::vector<std::array<Ad, 3>> unpack_one_form(const Grid& g, const Vector& v);
// All-node vector (boundary included) for operators applied to known fields.
Vector pack_mixed_all(const std::vector<MixedForm>& u);

// --- operators ---------------------------------------------------------------

// Central covariant differences d_A u = du + [A, u] at interior nodes, using
// the mapped-coordinate derivative (u_{+} - u_{-}) / (2 ds x'(s)).
// Adjoints are taken in the volume-weighted inner product, so
// <B u, v> = <u, B^* v> holds to rounding.
class LinearOperator {
 public:
  explicit LinearOperator(const Background& bg);

  const Background& background() const { return bg_; }
  const Grid& grid() const { return *bg_.grid; }
  int unknowns() const { return grid().interior(); }

  // d2(a, psi) = *d_A a - d_A psi + [Phi, a]
  Vector d2(const Vector& u) const { return d2_ * u; }
  Vector d2star(const Vector& f) const;
  // d1^*(a, psi) = div_A a + [Phi, psi]
  Vector d1star(const Vector& u) const { return d1s_ * u; }
  Vector d1(const Vector& g) const;  // -(d_A g, [Phi, g])
  // D = d2 + d1^*, mixed to mixed.
  Vector D(const Vector& u) const;
  Vector Dstar(const Vector& u) const;
  // Covariant gradient: 3 x 12 numbers per node (direction major).
  Vector grad(const Vector& u) const { return grad_ * u; }
  Vector gradstar(const Vector& g) const;
  // d2 d2^* on 1-forms.
  Vector normal(const Vector& f) const { return d2(d2star(f)); }

  // d2 of a mixed form known on every node, boundary values included.
  Vector d2_all(const Vector& u_all) const { return d2_all_ * u_all; }
  Vector D_all(const Vector& u_all) const;

  // Volume-weighted inner product of interior vectors with ncomp numbers per node.
  double inner(const Vector& a, const Vector& b) const;
  double norm(const Vector& a) const { return std::sqrt(inner(a, a)); }

  // Diagonal of d2 d2^*.
  Vector normal_diagonal() const;
  const SpMat& d2_matrix() const { return d2_; }

  // Pointwise terms of the Weitzenboeck identity on 1-forms:
  // ad(Phi)^2 f and *[Psi ^ f].
  Vector ad_phi_squared(const Vector& f) const;
  Vector psi_wedge(const Vector& f) const;

 private:
  Background bg_;
  SpMat d2_, d2_all_, d1s_, d1s_all_, grad_;
  Vector vol_;  // per unknown node
};

// --- Krylov solver -----------------------------------------------------------

struct CGResult {
  Vector x;
  int iterations = 0;
  std::vector<double> history;  // relative residual ||r|| / ||b|| per iteration
  double relative_residual = 0;
  bool converged = false;
};

struct CGError : std::runtime_error {
  std::vector<double> history;
  explicit CGError(std::vector<double> h)
      : std::runtime_error("conjugate gradient did not converge"), history(std::move(h)) {}
};

// Preconditioned CG for a self-adjoint positive operator in the inner product
// <a, b> = sum w a b. Throws CGError after max_iter iterations.
CGResult pcg(const std::function<Vector(const Vector&)>& A, const Vector& b, const Vector& inv_diag,
             const Vector& w, double tol, int max_iter, const Vector* x0 = nullptr);

// Sparse direct solve of d2 d2^* u = f (Cholesky of the symmetrised system).
Vector direct_solve(const LinearOperator& L, const Vector& f);

// --- obstruction projection ---------------------------------------------------

// pi(f) = f - sum_h c_h d2 o_h with c = G^{-1} <f, gamma_ext sigma^ dx_l>,
// G_lh = <d2 o_h, gamma_ext sigma^ dx_l>. G is the identity up to
// discretisation error; inverting it keeps pi idempotent.
class Projection {
 public:
  // o[h] (h = 0..2) sampled on all nodes; e[l] the 1-form gamma_ext sigma^ dx_l on unknowns.
  Projection(const LinearOperator& L, const std::array<std::vector<MixedForm>, 3>& o,
             const std::array<Vector, 3>& e);

  Vector apply(const Vector& f) const;
  std::array<double, 3> pairings(const Vector& f) const;      // <f, e_l>
  std::array<double, 3> coefficients(const Vector& f) const;  // c_h
  const std::array<Vector, 3>& basis() const { return b_; }
  const std::array<Vector, 3>& pairing_fields() const { return e_; }
  const Eigen::Matrix3d& gram() const { return gram_; }

 private:
  const LinearOperator* L_;
  std::array<Vector, 3> b_, e_;
  Eigen::Matrix3d gram_, inv_;
};

// Obstruction basis and pairing fields on a hedgehog-chart grid anchored at
// a centre (sigma^ = x^ about the anchor).
Projection make_projection(const LinearOperator& L, const Pregluing& c);

// --- linear solve ---------------------------------------------------------------

struct LinearSolveOptions {
  double tol = 1e-8;
  int max_iter = 20000;
  // Sources whose projection differs by more than this (relative) are rejected.
  double projected_tol = 1e-6;
};

struct UnprojectedSource : std::domain_error {
  UnprojectedSource() : std::domain_error("source is not in the range of pi") {}
};

struct LinearSolution {
  Vector u, xi;  // d2 d2^* u = f, xi = d2^* u
  CGResult cg;
};

// Q(f): solves d2 d2^* u = f and returns xi = d2^* u. With a projection,
// checks pi(f) = f first.
LinearSolution solve_linear(const LinearOperator& L, const Vector& f, const LinearSolveOptions& opt = {},
                            const Projection* P = nullptr);

// --- nonlinear deformation ---------------------------------------------------

// xi . xi = *[a ^ a]/2 - [a, psi] for mixed forms, as a 1-form.
Vector quadratic(const Grid& g, const Vector& xi);

struct DeformOptions {
  int max_iter = 5;
  double tol = 0.0;          // stop once the projected residual falls below
  double rel_tol = 1e-6;     // or below rel_tol times the initial residual (linear-solve floor)
  double max_factor = 0.9;   // stop when the contraction factor exceeds this
  double threshold = 1e30;   // reject starts with ||pi(Psi)|| above
  LinearSolveOptions linear;
};

struct ContractionFailure : std::runtime_error {
  std::vector<double> history;
  explicit ContractionFailure(std::vector<double> h)
      : std::runtime_error("contraction failure"), history(std::move(h)) {}
};

struct SolveReport {
  std::vector<double> residual;         // ||pi(Psi(c + xi_n))||, n = 0..iterations
  std::vector<double> factor;           // residual[n+1] / residual[n]
  std::vector<int> inner_iterations;
  std::vector<double> linear_residual;
  std::vector<double> xi_norm;          // L^2 norm of xi_n
  std::array<double, 3> removed{};      // obstruction coefficients of the last source
  Vector xi;                            // final correction (mixed, unknowns)
  Vector full_residual;                 // Psi + d2 xi + xi.xi at the end
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

// Picard iteration xi <- Q(-pi(Psi + xi.xi)). norm measures 1-forms.
SolveReport deform(const LinearOperator& L, const Projection& P, const Vector& psi,
                   const std::function<double(const Vector&)>& norm, const DeformOptions& opt = {});

// Weighted L^2 norm of a 1-form on a grid: samples are the unknown nodes.
double grid_weighted_norm(const Grid& g, const Vector& f, int ncomp, const WeightSpec& spec, int m);

// --- balancing ----------------------------------------------------------------

// H(x0, tau) = -sum_j x0_j / lambda_j.
Vec3 balancing_H(const GluingData& gd);

// <Psi, gamma_ext sigma^ dx_h> by quadrature over the outer annuli
// N delta_j <= rho_j <= 2 N delta_j, the only part of supp Psi where gamma_ext != 0.
Vec3 error_pairing(const Pregluing& c, int radial = 15, int polar = 15, int azimuthal = 32);

// ||pi(Psi)||_{L^2_{delta+m}} by quadrature over the annuli that carry Psi:
// delta_j/(2N) <= rho_j <= delta_j/N and N delta_j <= rho_j <= 2 N delta_j.
// pi uses the exact pairing <d2 o_h, gamma_ext sigma^ dx_l> = delta_hl.
struct ProjectedError {
  double norm = 0;
  Vec3 pairings{};
  double inner = 0, outer = 0;  // unweighted L^2 norms of pi(Psi) on the two annuli
};
ProjectedError projected_error_norm(const Pregluing& c, const WeightSpec& spec, int m, int radial = 10,
                                    int polar = 10, int azimuthal = 24);

struct BalanceStep {
  Vec3 zeta, h;
  double change = 0;
};
struct BalanceReport {
  Vec3 H{}, h{}, zeta{};
  std::vector<BalanceStep> history;
  bool converged = false;
};
struct BalanceFailure : std::runtime_error {
  std::vector<BalanceStep> history;
  explicit BalanceFailure(std::vector<BalanceStep> h)
      : std::runtime_error("balancing fixed point diverged"), history(std::move(h)) {}
};

// h_fn(x0) returns h at shifted gluing data. Iterates
// zeta <- h(x0 + zeta) / sum 1/lambda_j, which solves H(x0 + zeta) + h(x0 + zeta) = 0
// when H(x0) = 0.
BalanceReport balance(const GluingData& gd, const std::function<Vec3(const std::vector<Vec3>&)>& h_fn,
                      double tol = 1e-10, int max_iter = 10);

// --- large-distance W block ---------------------------------------------------

// Diagonal (real) forms on a grid whose third axis is periodic: the flat
// d2 d2^* restricted to the diagonal part, bordered by the log profiles
// v_j dx_h. The W component beta solves M beta = alpha(f) with
// M_(jh),(lg) = alpha(d2 d2^* v_l dx_g)_(jh), so sources that differ from the
// profile columns by compactly supported terms are resolved exactly.
struct WSolution {
  Vector u;                                // compactly supported part, 3 per node
  std::vector<std::array<double, 3>> beta; // coefficients of v_j dx_h
  Vector xi;                               // d2^*(u + sum beta v), 4 per node
  CGResult cg;
};

class WBlockSolver {
 public:
  WBlockSolver(std::shared_ptr<const Grid> grid, const WeightSpec& spec);

  const Grid& grid() const { return *grid_; }
  // Flat operators on real forms: 1-forms 3 per node, mixed 4 per node.
  Vector d2(const Vector& u) const { return d2_ * u; }
  Vector d2star(const Vector& f) const;
  Vector normal(const Vector& f) const { return d2(d2star(f)); }
  // v_j dx_h on all nodes; its d2^* (mixed, unknowns) and d2 d2^* (1-form, unknowns).
  Vector profile_field(int j, int h) const;
  const Vector& profile_xi(int j, int h) const { return xi_.at(j * 3 + h); }
  const Vector& column(int j, int h) const { return col_.at(j * 3 + h); }
  const Eigen::MatrixXd& border() const { return M_; }
  std::vector<std::array<double, 3>> alpha(const Vector& f) const;
  double inner(const Vector& a, const Vector& b) const;

  WSolution solve(const Vector& f, double tol = 1e-10, int max_iter = 20000) const;

 private:
  std::shared_ptr<const Grid> grid_;
  WeightSpec spec_;
  SpMat d2_, d2s_all_;
  Vector vol_;
  std::vector<Vector> col_, xi_;  // per (j, h)
  Eigen::MatrixXd M_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace forge
