#include <Eigen/SparseCholesky>

#include "forge/solver.hpp"

namespace forge {

namespace {

double wdot(const Vector& a, const Vector& b, const Vector& w) { return (a.array() * b.array() * w.array()).sum(); }

// Entry weights: each node's volume repeated over its components.
Vector entry_weights(const LinearOperator& L, int per) {
  const Grid& g = L.grid();
  Vector w(per * g.interior());
  for (int i = 0; i < g.interior(); ++i) w.segment(per * i, per).setConstant(g.volume(g.interior_nodes()[i]));
  return w;
}

}  // namespace

CGResult pcg(const std::function<Vector(const Vector&)>& A, const Vector& b, const Vector& inv_diag, const Vector& w,
             double tol, int max_iter, const Vector* x0) {
  CGResult res;
  res.x = x0 ? *x0 : Vector::Zero(b.size());
  double bn = std::sqrt(wdot(b, b, w));
  if (bn == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  Vector r = x0 ? Vector(b - A(res.x)) : b;
  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  double rz = wdot(r, z, w);
  double rel = std::sqrt(wdot(r, r, w)) / bn;
  while (rel > tol) {
    if (res.iterations >= max_iter) throw CGError(res.history);
    Vector Ap = A(p);
    double alpha = rz / wdot(p, Ap, w);
    res.x += alpha * p;
    r -= alpha * Ap;
    rel = std::sqrt(wdot(r, r, w)) / bn;
    res.history.push_back(rel);
    ++res.iterations;
    z = inv_diag.cwiseProduct(r);
    double rz_new = wdot(r, z, w);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.relative_residual = rel;
  res.converged = true;
  return res;
}

Vector direct_solve(const LinearOperator& L, const Vector& f) {
  // d2 d2^* = d2 V^-1 d2^T V; with S = V^{1/2} on 1-forms, S d2 d2^* S^-1 = C C^T.
  const SpMat& B = L.d2_matrix();
  Vector s1 = entry_weights(L, 9).cwiseSqrt(), s2 = entry_weights(L, 12).cwiseSqrt();
  Eigen::SparseMatrix<double> C = s1.asDiagonal() * B * s2.cwiseInverse().asDiagonal();
  Eigen::SparseMatrix<double> A = C * C.transpose();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("direct solve: factorisation failed");
  Vector y = ldlt.solve(s1.cwiseProduct(f));
  return y.cwiseQuotient(s1);
}

// --- projection ------------------------------------------------------------------

Projection::Projection(const LinearOperator& L, const std::array<std::vector<MixedForm>, 3>& o,
                       const std::array<Vector, 3>& e)
    : L_(&L), e_(e) {
  for (int h = 0; h < 3; ++h) b_[h] = L.d2_all(pack_mixed_all(o[h]));
  for (int l = 0; l < 3; ++l)
    for (int h = 0; h < 3; ++h) gram_(l, h) = L.inner(b_[h], e_[l]);
  inv_ = gram_.inverse();
}

std::array<double, 3> Projection::pairings(const Vector& f) const {
  return {L_->inner(f, e_[0]), L_->inner(f, e_[1]), L_->inner(f, e_[2])};
}

std::array<double, 3> Projection::coefficients(const Vector& f) const {
  auto p = pairings(f);
  Eigen::Vector3d c = inv_ * Eigen::Vector3d(p[0], p[1], p[2]);
  return {c[0], c[1], c[2]};
}

Vector Projection::apply(const Vector& f) const {
  auto c = coefficients(f);
  Vector r = f;
  for (int h = 0; h < 3; ++h) r -= c[h] * b_[h];
  return r;
}

Projection make_projection(const LinearOperator& L, const Pregluing& c) {
  const Grid& g = L.grid();
  std::array<std::vector<MixedForm>, 3> o;
  for (auto& v : o) v.resize(g.nodes());
  std::array<Vector, 3> e;
  for (auto& v : e) v = Vector::Zero(9 * g.interior());
  for (int node = 0; node < g.nodes(); ++node) {
    Vec3 X = g.offset(node);
    double r = norm(X);
    if (r == 0.0) continue;
    Ad n = X / r;
    for (int h = 0; h < 3; ++h) {
      ScalarForm s = c.obstruction(h + 1, g.anchor(), X);
      for (int i = 0; i < 3; ++i) o[h][node].a[i] = s.a[i] * n;
      o[h][node].psi = s.psi * n;
    }
    int u = g.unknown(node);
    if (u < 0) continue;
    double gam = c.gamma_ext(g.point(node));
    for (int l = 0; l < 3; ++l)
      for (int s = 0; s < 3; ++s) e[l][9 * u + 3 * l + s] = gam * n[s];
  }
  return Projection(L, o, e);
}

// --- linear solve ------------------------------------------------------------------

LinearSolution solve_linear(const LinearOperator& L, const Vector& f, const LinearSolveOptions& opt,
                            const Projection* P) {
  LinearSolution s;
  double fn = L.norm(f);
  if (P && fn > 0 && L.norm(P->apply(f) - f) > opt.projected_tol * fn) throw UnprojectedSource();
  Vector inv = L.normal_diagonal().cwiseInverse();
  s.cg = pcg([&](const Vector& x) { return L.normal(x); }, f, inv, entry_weights(L, 9), opt.tol, opt.max_iter);
  s.u = s.cg.x;
  s.xi = L.d2star(s.u);
  return s;
}

// --- deformation ---------------------------------------------------------------------

Vector quadratic(const Grid& g, const Vector& xi) {
  const int n = g.interior();
  Vector r(9 * n);
  for (int i = 0; i < n; ++i) {
    std::array<Ad, 3> a;
    for (int k = 0; k < 3; ++k) a[k] = Ad{xi[12 * i + 3 * k], xi[12 * i + 3 * k + 1], xi[12 * i + 3 * k + 2]};
    Ad psi{xi[12 * i + 9], xi[12 * i + 10], xi[12 * i + 11]};
    for (int k = 0; k < 3; ++k) {
      Ad w = bracket(a[(k + 1) % 3], a[(k + 2) % 3]) - bracket(a[k], psi);
      for (int s = 0; s < 3; ++s) r[9 * i + 3 * k + s] = w[s];
    }
  }
  return r;
}

SolveReport deform(const LinearOperator& L, const Projection& P, const Vector& psi,
                   const std::function<double(const Vector&)>& norm, const DeformOptions& opt) {
  SolveReport rep;
  const Grid& g = L.grid();
  rep.xi = Vector::Zero(12 * g.interior());
  rep.full_residual = psi;
  double r0 = norm(P.apply(psi));
  rep.residual.push_back(r0);
  rep.xi_norm.push_back(0.0);
  if (r0 > opt.threshold) throw ContractionFailure(rep.residual);
  if (r0 <= opt.tol || r0 == 0.0) {
    rep.converged = true;
    rep.stop_reason = "tolerance";
    return rep;
  }
  for (int it = 0; it < opt.max_iter; ++it) {
    Vector src = psi + quadratic(g, rep.xi);
    rep.removed = P.coefficients(src);
    LinearSolution s = solve_linear(L, Vector(-P.apply(src)), opt.linear);
    Vector full = psi + L.d2(s.xi) + quadratic(g, s.xi);
    double r = norm(P.apply(full));
    double factor = r / rep.residual.back();
    rep.residual.push_back(r);
    rep.factor.push_back(factor);
    rep.inner_iterations.push_back(s.cg.iterations);
    rep.linear_residual.push_back(s.cg.relative_residual);
    bool done = r <= opt.tol || r <= opt.rel_tol * r0;
    if (!done && !(factor < 1.0)) throw ContractionFailure(rep.residual);
    rep.xi = s.xi;
    rep.full_residual = full;
    rep.xi_norm.push_back(L.norm(s.xi));
    rep.iterations = it + 1;
    if (done) {
      rep.converged = true;
      rep.stop_reason = "tolerance";
      return rep;
    }
    if (factor > opt.max_factor) {
      rep.stop_reason = "stalled";
      return rep;
    }
  }
  rep.stop_reason = "max_iter";
  return rep;
}

double grid_weighted_norm(const Grid& g, const Vector& f, int ncomp, const WeightSpec& spec, int m) {
  std::vector<WeightedSample> s(g.interior());
  for (int i = 0; i < g.interior(); ++i) {
    int node = g.interior_nodes()[i];
    s[i].p = g.point(node);
    s[i].vol = g.volume(node);
    s[i].u2 = f.segment(ncomp * i, ncomp).squaredNorm();
  }
  return weighted_norm(s, spec, m);
}

}  // namespace forge
