#include <algorithm>
#include <limits>

#include "forge/analysis.hpp"

namespace forge {

Point3 Lattice::node(int i, int j, int k) const {
  int half = nx() / 2;
  return Point3((i - half) * h_z + offset.x, (j - half) * h_z + offset.y, kTwoPi * k / n_t + offset.z);
}

std::vector<Point3> Lattice::nodes() const {
  std::vector<Point3> out;
  const int n = nx();
  out.reserve(static_cast<size_t>(n) * n * n_t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n_t; ++k) out.push_back(node(i, j, k));
  return out;
}

void Lattice::validate(const std::vector<Point3>& singular) const {
  if (!(h_z > 0) || !(R_trunc > h_z) || n_t < 2) throw std::invalid_argument("lattice: bad dimensions");
  for (const auto& p : nodes())
    for (const auto& s : singular)
      if (distance(p, s) < 0.5 * h_z) throw std::invalid_argument("lattice: node within h_z/2 of a singular point");
}

ResidualReport residual(const ChartField& field, const std::vector<Point3>& nodes, double h, int order,
                        double min_margin) {
  ResidualReport r;
  r.nodes = nodes;
  r.value.assign(nodes.size(), std::numeric_limits<double>::quiet_NaN());
  r.chart.assign(nodes.size(), -1);
  for (size_t n = 0; n < nodes.size(); ++n) {
    int c = field.best_chart(nodes[n]);
    if (c < 0 || field.charts[c].margin(nodes[n]) < std::max(min_margin, 2.0 * h * order)) {
      ++r.excluded;
      continue;
    }
    r.chart[n] = c;
    r.value[n] = bogomolny(fd_jet(field, c, nodes[n], h, order)).residual();
    r.max = std::max(r.max, r.value[n]);
  }
  return r;
}

ResidualReport residual(const ChartField& field, const Lattice& lat, double h, int order, double min_margin) {
  return residual(field, lat.nodes(), h, order, min_margin);
}

std::vector<double> energy_density(const ChartField& field, const std::vector<Point3>& pts, double h, int order) {
  std::vector<double> e;
  e.reserve(pts.size());
  for (const auto& p : pts) {
    int c = field.best_chart(p);
    if (c < 0) throw ChartError("point not covered by any chart");
    e.push_back(bogomolny(fd_jet(field, c, p, h, order)).energy());
  }
  return e;
}

namespace {

// Diagonal component of *F . normal at p.
double normal_flux(const ChartField& field, const Point3& p, const Vec3& normal, double h) {
  int c = field.best_chart(p);
  if (c < 0) throw ChartError("point not covered by any chart");
  Jet jet = fd_jet(field, c, p, h, 4);
  Bogomolny b = bogomolny(jet);
  Ad dir = unit(2);
  if (field.charts[c].block == "interior") {
    double n = norm(jet.f.psi);
    if (!(n > 0)) throw FluxError("flux surface meets a Higgs zero");
    dir = jet.f.psi / n;
  }
  double s = 0;
  for (int k = 0; k < 3; ++k) s += dot(b.starF[k], dir) * normal[k];
  return s;
}

}  // namespace

double flux_sphere(const ChartField& field, const Point3& centre, double radius, const std::vector<Point3>& singular,
                   double h, int polar, int azimuthal) {
  for (const auto& s : singular) {
    double d = distance(centre, s);
    if (std::abs(d - radius) < 10 * h) throw FluxError("flux surface intersects a singular point");
  }
  QuadRule q = gauss_legendre(polar, -1.0, 1.0);
  double total = 0;
  for (size_t a = 0; a < q.x.size(); ++a) {
    double ct = q.x[a], st = std::sqrt(std::max(0.0, 1 - ct * ct));
    for (int m = 0; m < azimuthal; ++m) {
      double ph = kTwoPi * (m + 0.5) / azimuthal;
      Vec3 n{st * std::cos(ph), st * std::sin(ph), ct};
      total += q.w[a] * (kTwoPi / azimuthal) * radius * radius * normal_flux(field, centre.shifted(radius * n), n, h);
    }
  }
  return total;
}

double flux_torus(const ChartField& field, double R, const std::vector<Point3>& singular, double h, int azimuthal,
                  int nt) {
  for (const auto& s : singular)
    if (std::abs(std::abs(s.z()) - R) < 10 * h) throw FluxError("flux surface intersects a singular point");
  double total = 0;
  for (int m = 0; m < azimuthal; ++m) {
    double ph = kTwoPi * (m + 0.5) / azimuthal;
    Vec3 n{std::cos(ph), std::sin(ph), 0};
    for (int k = 0; k < nt; ++k) {
      double t = kTwoPi * (k + 0.5) / nt;
      total += (kTwoPi / azimuthal) * R * (kTwoPi / nt) * normal_flux(field, Point3(R * n.x, R * n.y, t), n, h);
    }
  }
  return total;
}

}  // namespace forge
