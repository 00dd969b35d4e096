#include "forge/parallel.hpp"
#include "forge/solver.hpp"

namespace forge {

// --- grids -------------------------------------------------------------------

Axis make_axis(int n, double half_width, double stretch) {
  if (n < 3) throw std::invalid_argument("axis needs at least 3 nodes");
  if (!(half_width > 0)) throw std::invalid_argument("axis half-width must be positive");
  Axis a;
  a.ds = 2.0 / (n - 1);
  for (int i = 0; i < n; ++i) {
    double s = -1.0 + a.ds * i;
    if (stretch == 0.0) {
      a.x.push_back(half_width * s);
      a.jac.push_back(half_width);
    } else {
      double sh = std::sinh(stretch);
      a.x.push_back(half_width * std::sinh(stretch * s) / sh);
      a.jac.push_back(half_width * stretch * std::cosh(stretch * s) / sh);
    }
  }
  return a;
}

Axis make_periodic_axis(int n) {
  if (n < 3) throw std::invalid_argument("axis needs at least 3 nodes");
  Axis a;
  a.periodic = true;
  a.ds = kTwoPi / n;
  for (int i = 0; i < n; ++i) {
    a.x.push_back(-kPi + a.ds * i);
    a.jac.push_back(1.0);
  }
  return a;
}

Grid::Grid(Point3 anchor, Axis x, Axis y, Axis t) : anchor_(anchor), ax_{std::move(x), std::move(y), std::move(t)} {
  int n = ax_[0].size() * ax_[1].size() * ax_[2].size();
  vol_.resize(n);
  unknown_.assign(n, -1);
  for (int node = 0; node < n; ++node) {
    auto c = coords(node);
    double v = 1.0;
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      v *= ax_[a].jac[c[a]] * ax_[a].ds;
      if (!ax_[a].periodic && (c[a] == 0 || c[a] == ax_[a].size() - 1)) inside = false;
    }
    vol_[node] = v;
    if (inside) {
      unknown_[node] = static_cast<int>(interior_.size());
      interior_.push_back(node);
    }
  }
}

std::array<int, 3> Grid::coords(int node) const {
  int nt = ax_[2].size(), ny = ax_[1].size();
  return {node / (ny * nt), (node / nt) % ny, node % nt};
}

Vec3 Grid::offset(int node) const {
  auto c = coords(node);
  return {ax_[0].x[c[0]], ax_[1].x[c[1]], ax_[2].x[c[2]]};
}

int Grid::neighbour(int node, int a, int dir) const {
  auto c = coords(node);
  int n = ax_[a].size();
  c[a] += dir;
  if (ax_[a].periodic) {
    c[a] = (c[a] + n) % n;
  } else if (c[a] < 0 || c[a] >= n) {
    return -1;
  }
  return index(c[0], c[1], c[2]);
}

double Grid::min_spacing() const {
  double h = std::numeric_limits<double>::infinity();
  for (const auto& a : ax_)
    for (int i = 0; i + 1 < a.size(); ++i) h = std::min(h, a.x[i + 1] - a.x[i]);
  return h;
}

Background sample_background(std::shared_ptr<const Grid> grid, const LocalField& f, double fd_h,
                             const std::function<Ad(const Vec3&)>& sigma) {
  Background bg;
  bg.grid = grid;
  const int n = grid->nodes();
  bg.c.resize(n);
  bg.psi.resize(n);
  bg.sigma.resize(n);
  parallel_for(n, [&](int node) {
    Vec3 X = grid->offset(node);
    Jet jet = fd_jet([&](const Vec3& o) { return f(X + o); }, fd_h, 4);
    bg.c[node] = jet.f;
    bg.psi[node] = bogomolny(jet).psi;
    if (sigma) {
      bg.sigma[node] = sigma(X);
    } else {
      double m = norm(jet.f.psi);
      bg.sigma[node] = m > 0 ? jet.f.psi / m : unit(2);
    }
  });
  return bg;
}

// --- packing -------------------------------------------------------------------

Vector pack_mixed(const Grid& g, const std::vector<MixedForm>& u) {
  Vector v(12 * g.interior());
  for (int i = 0; i < g.interior(); ++i) {
    const MixedForm& m = u.at(g.interior_nodes()[i]);
    for (int c = 0; c < 4; ++c)
      for (int s = 0; s < 3; ++s) v[12 * i + 3 * c + s] = c < 3 ? m.a[c][s] : m.psi[s];
  }
  return v;
}

std::vector<MixedForm> unpack_mixed(const Grid& g, const Vector& v) {
  std::vector<MixedForm> u(g.nodes());
  for (int i = 0; i < g.interior(); ++i) {
    MixedForm& m = u[g.interior_nodes()[i]];
    for (int c = 0; c < 4; ++c)
      for (int s = 0; s < 3; ++s) (c < 3 ? m.a[c][s] : m.psi[s]) = v[12 * i + 3 * c + s];
  }
  return u;
}

Vector pack_one_form(const Grid& g, const std::vector<std::array<Ad, 3>>& f) {
  Vector v(9 * g.interior());
  for (int i = 0; i < g.interior(); ++i) {
    const auto& a = f.at(g.interior_nodes()[i]);
    for (int c = 0; c < 3; ++c)
      for (int s = 0; s < 3; ++s) v[9 * i + 3 * c + s] = a[c][s];
  }
  return v;
}

std::vector<std::array<Ad, 3>> unpack_one_form(const Grid& g, const Vector& v) {
  std::vector<std::array<Ad, 3>> f(g.nodes());
  for (int i = 0; i < g.interior(); ++i)
    for (int c = 0; c < 3; ++c)
      for (int s = 0; s < 3; ++s) f[g.interior_nodes()[i]][c][s] = v[9 * i + 3 * c + s];
  return f;
}

Vector pack_mixed_all(const std::vector<MixedForm>& u) {
  Vector v(12 * u.size());
  for (size_t i = 0; i < u.size(); ++i)
    for (int c = 0; c < 4; ++c)
      for (int s = 0; s < 3; ++s) v[12 * i + 3 * c + s] = c < 3 ? u[i].a[c][s] : u[i].psi[s];
  return v;
}

// --- operators -----------------------------------------------------------------

namespace {

using Block = Eigen::Matrix3d;
using Triplets = std::vector<Eigen::Triplet<double>>;

// Matrix of u -> [X, u].
Block ad(const Ad& X) {
  Block m;
  m << 0, X.z, -X.y, -X.z, 0, X.x, X.y, -X.x, 0;
  return m;
}

// Assembles rows of an operator acting on mixed forms (12 per node) twice:
// with columns over unknowns only and over all nodes.
struct Assembler {
  const Grid& g;
  Triplets restricted{}, all{};

  void add(int row, int node, int comp, const Block& b) {
    int u = g.unknown(node);
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) {
        if (b(r, s) == 0.0) continue;
        all.emplace_back(row + r, 12 * node + 3 * comp + s, b(r, s));
        if (u >= 0) restricted.emplace_back(row + r, 12 * u + 3 * comp + s, b(r, s));
      }
  }
  // Rows of s * nabla_i u_comp at the given interior node.
  void covariant(int row, int node, int i, int comp, double s, const FieldValue& c) {
    const Axis& a = g.axis(i);
    double h = 1.0 / (2.0 * a.ds * a.jac[g.coords(node)[i]]);
    add(row, g.neighbour(node, i, +1), comp, s * h * Block::Identity());
    add(row, g.neighbour(node, i, -1), comp, -s * h * Block::Identity());
    add(row, node, comp, s * ad(c.a[i]));
  }
  SpMat build(const std::vector<Eigen::Triplet<double>>& t, int rows, int cols) const {
    SpMat m(rows, cols);
    m.setFromTriplets(t.begin(), t.end());
    return m;
  }
};

}  // namespace

LinearOperator::LinearOperator(const Background& bg) : bg_(bg) {
  const Grid& g = *bg_.grid;
  const int n = g.interior();
  Assembler d2{g, {}, {}}, d1s{g, {}, {}}, gr{g, {}, {}};
  for (int i = 0; i < n; ++i) {
    int node = g.interior_nodes()[i];
    const FieldValue& c = bg_.c[node];
    for (int k = 0; k < 3; ++k) {
      int a = (k + 1) % 3, b = (k + 2) % 3;
      int row = 9 * i + 3 * k;
      d2.covariant(row, node, a, b, 1.0, c);
      d2.covariant(row, node, b, a, -1.0, c);
      d2.covariant(row, node, k, 3, -1.0, c);
      d2.add(row, node, k, ad(c.psi));
      d1s.covariant(3 * i, node, k, k, 1.0, c);
    }
    d1s.add(3 * i, node, 3, ad(c.psi));
    for (int dir = 0; dir < 3; ++dir)
      for (int comp = 0; comp < 4; ++comp) gr.covariant(36 * i + 12 * dir + 3 * comp, node, dir, comp, 1.0, c);
  }
  const int N = g.nodes();
  d2_ = d2.build(d2.restricted, 9 * n, 12 * n);
  d2_all_ = d2.build(d2.all, 9 * n, 12 * N);
  d1s_ = d1s.build(d1s.restricted, 3 * n, 12 * n);
  d1s_all_ = d1s.build(d1s.all, 3 * n, 12 * N);
  grad_ = gr.build(gr.restricted, 36 * n, 12 * n);
  vol_.resize(n);
  for (int i = 0; i < n; ++i) vol_[i] = g.volume(g.interior_nodes()[i]);
}

namespace {

// Scales blocks of `per` consecutive entries by w[i]^p.
Vector scaled(const Vector& v, const Vector& w, double p) {
  const int per = static_cast<int>(v.size() / w.size());
  Vector r = v;
  for (int i = 0; i < w.size(); ++i) r.segment(per * i, per) *= std::pow(w[i], p);
  return r;
}

}  // namespace

Vector LinearOperator::d2star(const Vector& f) const {
  return scaled(d2_.transpose() * scaled(f, vol_, 1.0), vol_, -1.0);
}

Vector LinearOperator::d1(const Vector& g) const {
  return scaled(d1s_.transpose() * scaled(g, vol_, 1.0), vol_, -1.0);
}

Vector LinearOperator::gradstar(const Vector& g) const {
  return scaled(grad_.transpose() * scaled(g, vol_, 1.0), vol_, -1.0);
}

namespace {

Vector join(const Vector& one, const Vector& zero, int n) {
  Vector r(12 * n);
  for (int i = 0; i < n; ++i) {
    r.segment(12 * i, 9) = one.segment(9 * i, 9);
    r.segment(12 * i + 9, 3) = zero.segment(3 * i, 3);
  }
  return r;
}

}  // namespace

Vector LinearOperator::D(const Vector& u) const { return join(d2(u), d1star(u), unknowns()); }

Vector LinearOperator::D_all(const Vector& u_all) const {
  return join(d2_all_ * u_all, d1s_all_ * u_all, unknowns());
}

Vector LinearOperator::Dstar(const Vector& v) const {
  const int n = unknowns();
  Vector one(9 * n), zero(3 * n);
  for (int i = 0; i < n; ++i) {
    one.segment(9 * i, 9) = v.segment(12 * i, 9);
    zero.segment(3 * i, 3) = v.segment(12 * i + 9, 3);
  }
  return d2star(one) + d1(zero);
}

double LinearOperator::inner(const Vector& a, const Vector& b) const {
  const int per = static_cast<int>(a.size() / vol_.size());
  double s = 0;
  for (int i = 0; i < vol_.size(); ++i) s += vol_[i] * a.segment(per * i, per).dot(b.segment(per * i, per));
  return s;
}

Vector LinearOperator::normal_diagonal() const {
  Vector d = Vector::Zero(d2_.rows());
  for (int r = 0; r < d2_.outerSize(); ++r) {
    double vr = vol_[r / 9];
    for (SpMat::InnerIterator it(d2_, r); it; ++it) d[r] += it.value() * it.value() * vr / vol_[it.col() / 12];
  }
  return d;
}

Vector LinearOperator::ad_phi_squared(const Vector& f) const {
  Vector r(f.size());
  for (int i = 0; i < unknowns(); ++i) {
    const Ad& phi = bg_.c[grid().interior_nodes()[i]].psi;
    for (int k = 0; k < 3; ++k) {
      Ad u{f[9 * i + 3 * k], f[9 * i + 3 * k + 1], f[9 * i + 3 * k + 2]};
      Ad w = bracket(phi, bracket(phi, u));
      for (int s = 0; s < 3; ++s) r[9 * i + 3 * k + s] = w[s];
    }
  }
  return r;
}

Vector LinearOperator::psi_wedge(const Vector& f) const {
  Vector r(f.size());
  for (int i = 0; i < unknowns(); ++i) {
    const auto& P = bg_.psi[grid().interior_nodes()[i]];
    std::array<Ad, 3> u;
    for (int k = 0; k < 3; ++k) u[k] = Ad{f[9 * i + 3 * k], f[9 * i + 3 * k + 1], f[9 * i + 3 * k + 2]};
    for (int k = 0; k < 3; ++k) {
      int a = (k + 1) % 3, b = (k + 2) % 3;
      Ad w = bracket(P[a], u[b]) - bracket(P[b], u[a]);
      for (int s = 0; s < 3; ++s) r[9 * i + 3 * k + s] = w[s];
    }
  }
  return r;
}

}  // namespace forge
