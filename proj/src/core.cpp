#include "forge/core.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <limits>

namespace forge {

Mat3 rotation(const Vec3& axis, double angle) {
  return rotation_from_vector(angle * axis);
}

Mat3 rotation_from_vector(const Vec3& w) {
  double th2 = norm2(w);
  double th = std::sqrt(th2);
  double s, c;  // sin(th)/th, (1-cos th)/th^2
  if (th < 1e-4) {
    s = 1.0 - th2 / 6.0 + th2 * th2 / 120.0;
    c = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
  } else {
    s = std::sin(th) / th;
    c = (1.0 - std::cos(th)) / th2;
  }
  Mat3 K;
  K(0, 1) = -w.z; K(0, 2) = w.y;
  K(1, 0) = w.z;  K(1, 2) = -w.x;
  K(2, 0) = -w.y; K(2, 1) = w.x;
  Mat3 K2 = K * K;
  Mat3 R = Mat3::identity();
  for (int i = 0; i < 9; ++i) R.m[i] += s * K.m[i] + c * K2.m[i];
  return R;
}

double distance(const Point3& p, const Point3& q) {
  return norm(displacement(p, q));
}

double norm2(const MixedForm& u) {
  return norm2(u.a[0]) + norm2(u.a[1]) + norm2(u.a[2]) + norm2(u.psi);
}

double dot(const MixedForm& u, const MixedForm& v) {
  return dot(u.a[0], v.a[0]) + dot(u.a[1], v.a[1]) + dot(u.a[2], v.a[2]) + dot(u.psi, v.psi);
}

MixedForm rotate(const Mat3& g, const MixedForm& u) {
  MixedForm r;
  for (int i = 0; i < 3; ++i) r.a[i] = g * u.a[i];
  r.psi = g * u.psi;
  return r;
}

MixedForm clifford(int h, const MixedForm& u) {
  if (h < 1 || h > 3) throw std::invalid_argument("clifford: axis index must be 1, 2 or 3");
  int i = h - 1;
  int j = (i + 1) % 3, k = (i + 2) % 3;
  // contraction of *a with the h-th coordinate vector, plus psi dx_h
  MixedForm r;
  r.a[k] = -u.a[j];
  r.a[j] = u.a[k];
  r.a[i] = u.psi;
  r.psi = -u.a[i];
  return r;
}

MixedForm quaternion(int h, const MixedForm& u) {
  MixedForm v = u;
  v.psi = -v.psi;
  MixedForm r = clifford(h, v);
  r.psi = -r.psi;
  return r;
}

Split split_diag(const MixedForm& u, const Ad& direction) {
  double n2 = norm2(direction);
  if (!(n2 > 0)) throw std::domain_error("split undefined at Higgs zero");
  Split s;
  auto proj = [&](const Ad& c) { return (dot(c, direction) / n2) * direction; };
  for (int i = 0; i < 3; ++i) {
    s.diag.a[i] = proj(u.a[i]);
    s.trans.a[i] = u.a[i] - s.diag.a[i];
  }
  s.diag.psi = proj(u.psi);
  s.trans.psi = u.psi - s.diag.psi;
  return s;
}

int ChartField::best_chart(const Point3& p) const {
  int best = -1;
  double bm = 0.0;
  for (size_t c = 0; c < charts.size(); ++c) {
    double m = charts[c].margin(p);
    if (m > bm) {
      bm = m;
      best = static_cast<int>(c);
    }
  }
  return best;
}

FieldValue ChartField::eval(const Point3& p) const {
  int c = best_chart(p);
  if (c < 0) throw ChartError("point not covered by any chart");
  return charts[c].eval(p, Vec3{});
}

namespace {

template <int N>
QuadRule gl_table() {
  using G = boost::math::quadrature::gauss<double, N>;
  QuadRule r;
  const auto& xa = G::abscissa();
  const auto& wa = G::weights();
  for (size_t i = 0; i < xa.size(); ++i) {
    if (xa[i] == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(wa[i]);
      continue;
    }
    r.x.push_back(xa[i]);
    r.w.push_back(wa[i]);
    r.x.push_back(-xa[i]);
    r.w.push_back(wa[i]);
  }
  return r;
}

}  // namespace

QuadRule gauss_legendre(int n, double a, double b) {
  QuadRule r;
  switch (n) {
    case 7: r = gl_table<7>(); break;
    case 10: r = gl_table<10>(); break;
    case 15: r = gl_table<15>(); break;
    case 20: r = gl_table<20>(); break;
    case 25: r = gl_table<25>(); break;
    case 30: r = gl_table<30>(); break;
    default: throw std::invalid_argument("gauss_legendre: unsupported node count");
  }
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  for (size_t i = 0; i < r.x.size(); ++i) {
    r.x[i] = c + h * r.x[i];
    r.w[i] *= h;
  }
  return r;
}

namespace {
double bump_edge(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
double bump_edge_deriv(double x) { return x > 0.0 ? std::exp(-1.0 / x) / (x * x) : 0.0; }
}  // namespace

double smooth_step(double s) {
  if (s <= 1.0) return 1.0;
  if (s >= 2.0) return 0.0;
  double u = 2.0 - s, a = bump_edge(u), b = bump_edge(1.0 - u);
  return a / (a + b);
}

double smooth_step_deriv(double s) {
  if (s <= 1.0 || s >= 2.0) return 0.0;
  double u = 2.0 - s, a = bump_edge(u), b = bump_edge(1.0 - u);
  double da = bump_edge_deriv(u), db = -bump_edge_deriv(1.0 - u);
  // d/ds = -d/du
  return -(da * (a + b) - a * (da + db)) / ((a + b) * (a + b));
}

}  // namespace forge
