#include "forge/parallel.hpp"
#include "forge/solver.hpp"

namespace forge {

Vec3 balancing_H(const GluingData& gd) {
  Vec3 H{};
  for (int j = 0; j < gd.k(); ++j) H -= gd.x0[j] / gd.lambda[j];
  return H;
}

Vec3 error_pairing(const Pregluing& c, int radial, int polar, int azimuthal) {
  const auto& gd = c.gluing();
  const auto& bg = c.background();
  QuadRule pr = gauss_legendre(polar, -1.0, 1.0);
  Vec3 total{};
  for (int j = 0; j < gd.k(); ++j) {
    double r0 = gd.N * gd.delta[j];
    QuadRule rr = gauss_legendre(radial, r0, 2.0 * r0);
    double hfd = 1e-3 * r0;
    const int n = radial * polar * azimuthal;
    std::vector<Vec3> part(n);
    parallel_for(n, [&](int idx) {
      int a = idx / (polar * azimuthal), b = (idx / azimuthal) % polar, m = idx % azimuthal;
      double r = rr.x[a], ct = pr.x[b], st = std::sqrt(std::max(0.0, 1 - ct * ct));
      double ph = kTwoPi * (m + 0.5) / azimuthal;
      double w = rr.w[a] * pr.w[b] * (kTwoPi / azimuthal) * r * r;
      Vec3 X{r * st * std::cos(ph), r * st * std::sin(ph), r * ct};
      Jet jet = fd_jet([&](const Vec3& o) { return c.hedgehog(j, X + o); }, hfd, 4);
      Bogomolny B = bogomolny(jet);
      double g = w * c.gamma_ext(bg.q[j].shifted(X));
      Ad n = X / r;
      for (int l = 0; l < 3; ++l) part[idx][l] = g * dot(B.psi[l], n);
    });
    for (const auto& p : part) total += p;
  }
  return total;
}

ProjectedError projected_error_norm(const Pregluing& c, const WeightSpec& spec, int m, int radial, int polar,
                                    int azimuthal) {
  ProjectedError out;
  out.pairings = error_pairing(c, radial, polar, azimuthal);
  const auto& gd = c.gluing();
  const auto& bg = c.background();
  QuadRule pr = gauss_legendre(polar, -1.0, 1.0);
  std::vector<WeightedSample> samples;
  for (int j = 0; j < gd.k(); ++j) {
    const double d = gd.delta[j], N = gd.N;
    for (int shell = 0; shell < 2; ++shell) {
      double r0 = shell == 0 ? d / (2 * N) : N * d;
      QuadRule rr = gauss_legendre(radial, r0, 2.0 * r0);
      double hfd = 1e-3 * r0;
      const int n = radial * polar * azimuthal;
      std::vector<WeightedSample> part(n);
      parallel_for(n, [&](int idx) {
        int a = idx / (polar * azimuthal), b = (idx / azimuthal) % polar, mm = idx % azimuthal;
        double r = rr.x[a], ct = pr.x[b], st = std::sqrt(std::max(0.0, 1 - ct * ct));
        double ph = kTwoPi * (mm + 0.5) / azimuthal;
        Vec3 X{r * st * std::cos(ph), r * st * std::sin(ph), r * ct};
        Bogomolny B = bogomolny(fd_jet([&](const Vec3& o) { return c.hedgehog(j, X + o); }, hfd, 4));
        Ad n = X / r;
        std::array<Ad, 3> f = B.psi;
        if (shell == 1) {
          for (int h = 1; h <= 3; ++h) {
            Vec3 d2 = abelian_d2([&](const Vec3& o) { return c.obstruction(h, bg.q[j], X + o); }, hfd, 4);
            for (int l = 0; l < 3; ++l) f[l] -= out.pairings[h - 1] * d2[l] * n;
          }
        }
        WeightedSample& s = part[idx];
        s.p = bg.q[j].shifted(X);
        s.vol = rr.w[a] * pr.w[b] * (kTwoPi / azimuthal) * r * r;
        s.u2 = norm2(f[0]) + norm2(f[1]) + norm2(f[2]);
      });
      double l2 = 0;
      for (const auto& s : part) l2 += s.vol * s.u2;
      (shell == 0 ? out.inner : out.outer) += l2;
      samples.insert(samples.end(), part.begin(), part.end());
    }
  }
  out.inner = std::sqrt(out.inner);
  out.outer = std::sqrt(out.outer);
  out.norm = weighted_norm(samples, spec, m);
  return out;
}

BalanceReport balance(const GluingData& gd, const std::function<Vec3(const std::vector<Vec3>&)>& h_fn, double tol,
                      int max_iter) {
  BalanceReport rep;
  rep.H = balancing_H(gd);
  double S = 0;
  for (double l : gd.lambda) S += 1.0 / l;
  auto shifted = [&](const Vec3& z) {
    std::vector<Vec3> x = gd.x0;
    for (auto& v : x) v += z;
    return x;
  };
  Vec3 zeta{};
  double last = std::numeric_limits<double>::infinity();
  int growth = 0;
  for (int it = 0; it < max_iter; ++it) {
    Vec3 h = h_fn(shifted(zeta));
    Vec3 next = (rep.H + h) / S;
    BalanceStep step{next, h, norm(next - zeta)};
    rep.history.push_back(step);
    zeta = next;
    if (!std::isfinite(step.change)) throw BalanceFailure(rep.history);
    growth = step.change > last ? growth + 1 : 0;
    if (growth >= 3) throw BalanceFailure(rep.history);
    last = step.change;
    if (step.change < tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged) throw BalanceFailure(rep.history);
  rep.zeta = zeta;
  rep.h = rep.history.back().h;
  return rep;
}

// --- W block -----------------------------------------------------------------------

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

double dcoef(const Grid& g, int node, int i) {
  const Axis& a = g.axis(i);
  return 1.0 / (2.0 * a.ds * a.jac[g.coords(node)[i]]);
}

}  // namespace

WBlockSolver::WBlockSolver(std::shared_ptr<const Grid> grid, const WeightSpec& spec)
    : grid_(std::move(grid)), spec_(spec) {
  const Grid& g = *grid_;
  if (!g.axis(2).periodic) throw std::invalid_argument("W block: third axis must be periodic");
  const int n = g.interior(), N = g.nodes();
  Triplets d2, d2s;
  auto add_d2 = [&](int row, int node, int comp, double v) {
    int u = g.unknown(node);
    if (u >= 0) d2.emplace_back(row, 4 * u + comp, v);
  };
  for (int i = 0; i < n; ++i) {
    int node = g.interior_nodes()[i];
    for (int k = 0; k < 3; ++k) {
      int a = (k + 1) % 3, b = (k + 2) % 3;
      // (curl u - grad psi)_k
      for (int dir : {+1, -1}) {
        add_d2(3 * i + k, g.neighbour(node, a, dir), b, dir * dcoef(g, node, a));
        add_d2(3 * i + k, g.neighbour(node, b, dir), a, -dir * dcoef(g, node, b));
        add_d2(3 * i + k, g.neighbour(node, k, dir), 3, -dir * dcoef(g, node, k));
      }
      // d2^* f = (curl f, div f) with the same stencil, on all-node input.
      for (int dir : {+1, -1}) {
        d2s.emplace_back(4 * i + k, 3 * g.neighbour(node, a, dir) + b, dir * dcoef(g, node, a));
        d2s.emplace_back(4 * i + k, 3 * g.neighbour(node, b, dir) + a, -dir * dcoef(g, node, b));
        d2s.emplace_back(4 * i + 3, 3 * g.neighbour(node, k, dir) + k, dir * dcoef(g, node, k));
      }
    }
  }
  d2_.resize(3 * n, 4 * n);
  d2_.setFromTriplets(d2.begin(), d2.end());
  d2s_all_.resize(4 * n, 3 * N);
  d2s_all_.setFromTriplets(d2s.begin(), d2s.end());
  vol_.resize(n);
  for (int i = 0; i < n; ++i) vol_[i] = g.volume(g.interior_nodes()[i]);

  const int cells = static_cast<int>(spec_.cell_centres().size());
  for (int j = 0; j < cells; ++j)
    for (int h = 0; h < 3; ++h) {
      Vector x = d2s_all_ * profile_field(j, h);
      col_.push_back(d2_ * x);
      xi_.push_back(std::move(x));
    }
  // The Dirichlet truncation couples components, so the border is the full (cell, component) map.
  M_.resize(3 * cells, 3 * cells);
  for (int l = 0; l < 3 * cells; ++l) {
    auto a = alpha(col_[l]);
    for (int j = 0; j < cells; ++j)
      for (int h = 0; h < 3; ++h) M_(3 * j + h, l) = a[j][h];
  }
  lu_.compute(M_);
}

Vector WBlockSolver::profile_field(int j, int h) const {
  const Grid& g = *grid_;
  LogProfile v{spec_.cell_centres().at(j)};
  Vector f = Vector::Zero(3 * g.nodes());
  for (int node = 0; node < g.nodes(); ++node) f[3 * node + h] = v.value(g.point(node));
  return f;
}

Vector WBlockSolver::d2star(const Vector& f) const {
  Vector w = f;
  for (int i = 0; i < vol_.size(); ++i) w.segment(3 * i, 3) *= vol_[i];
  Vector r = d2_.transpose() * w;
  for (int i = 0; i < vol_.size(); ++i) r.segment(4 * i, 4) /= vol_[i];
  return r;
}

double WBlockSolver::inner(const Vector& a, const Vector& b) const {
  const int per = static_cast<int>(a.size() / vol_.size());
  double s = 0;
  for (int i = 0; i < vol_.size(); ++i) s += vol_[i] * a.segment(per * i, per).dot(b.segment(per * i, per));
  return s;
}

std::vector<std::array<double, 3>> WBlockSolver::alpha(const Vector& f) const {
  const Grid& g = *grid_;
  const int cells = static_cast<int>(spec_.cell_centres().size());
  std::vector<std::array<double, 3>> a(cells, {0, 0, 0});
  for (int i = 0; i < g.interior(); ++i) {
    Point3 p = g.point(g.interior_nodes()[i]);
    for (int j = 0; j < cells; ++j) {
      double c = spec_.partition(j, p);
      if (c == 0.0) continue;
      for (int h = 0; h < 3; ++h) a[j][h] += vol_[i] * c * f[3 * i + h];
    }
  }
  return a;
}

WSolution WBlockSolver::solve(const Vector& f, double tol, int max_iter) const {
  WSolution s;
  const int cells = static_cast<int>(spec_.cell_centres().size());
  auto a = alpha(f);
  s.beta.assign(cells, {0, 0, 0});
  Vector rhs = f;
  Eigen::VectorXd av(3 * cells);
  for (int j = 0; j < cells; ++j)
    for (int h = 0; h < 3; ++h) av[3 * j + h] = a[j][h];
  Eigen::VectorXd b = lu_.solve(av);
  for (int j = 0; j < cells; ++j)
    for (int h = 0; h < 3; ++h) {
      s.beta[j][h] = b[3 * j + h];
      rhs -= b[3 * j + h] * column(j, h);
    }
  // Jacobi diagonal of d2 d2^*
  Vector diag = Vector::Zero(d2_.rows());
  for (int r = 0; r < d2_.outerSize(); ++r)
    for (SpMat::InnerIterator it(d2_, r); it; ++it) diag[r] += it.value() * it.value() * vol_[r / 3] / vol_[it.col() / 4];
  Vector w(3 * vol_.size());
  for (int i = 0; i < vol_.size(); ++i) w.segment(3 * i, 3).setConstant(vol_[i]);
  s.cg = pcg([&](const Vector& x) { return normal(x); }, rhs, diag.cwiseInverse(), w, tol, max_iter);
  s.u = s.cg.x;
  s.xi = d2star(s.u);
  for (int j = 0; j < cells; ++j)
    for (int h = 0; h < 3; ++h) s.xi += s.beta[j][h] * profile_xi(j, h);
  return s;
}

}  // namespace forge
