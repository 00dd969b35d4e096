#include "forge/analysis.hpp"

namespace forge {

namespace {

Jet central(const LocalField& f, double h) {
  Jet j;
  j.f = f(Vec3{});
  for (int i = 0; i < 3; ++i) {
    Vec3 e = h * unit(i);
    j.d[i] = (0.5 / h) * (f(e) - f(-e));
  }
  return j;
}

}  // namespace

Jet fd_jet(const LocalField& f, double h, int order) {
  if (order == 2) return central(f, h);
  if (order != 4) throw std::invalid_argument("fd_jet: order must be 2 or 4");
  Jet a = central(f, h), b = central(f, 2 * h);
  for (int i = 0; i < 3; ++i) a.d[i] = (4.0 / 3.0) * a.d[i] - (1.0 / 3.0) * b.d[i];
  return a;
}

Jet fd_jet(const ChartField& field, int chart, const Point3& anchor, double h, int order) {
  const Chart& c = field.charts.at(chart);
  return fd_jet([&](const Vec3& o) { return c.eval(anchor, o); }, h, order);
}

Bogomolny bogomolny(const Jet& j) {
  Bogomolny b;
  const auto& A = j.f.a;
  for (int k = 0; k < 3; ++k) {
    int i = (k + 1) % 3, l = (k + 2) % 3;
    b.starF[k] = j.d[i].a[l] - j.d[l].a[i] + bracket(A[i], A[l]);
    b.dAPhi[k] = j.d[k].psi + bracket(A[k], j.f.psi);
    b.psi[k] = b.starF[k] - b.dAPhi[k];
  }
  return b;
}

double Bogomolny::residual() const {
  return std::sqrt(norm2(psi[0]) + norm2(psi[1]) + norm2(psi[2]));
}

double Bogomolny::energy() const {
  double e = 0;
  for (int k = 0; k < 3; ++k) e += norm2(starF[k]) + norm2(dAPhi[k]);
  return e;
}

double residual_at(const ChartField& field, const Point3& p, double h, int order) {
  int c = field.best_chart(p);
  if (c < 0) throw ChartError("point not covered by any chart");
  return bogomolny(fd_jet(field, c, p, h, order)).residual();
}

}  // namespace forge
