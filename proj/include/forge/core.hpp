#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace forge {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  bool operator==(const Vec3&) const = default;
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, Vec3 a) { return a *= s; }
inline Vec3 operator*(Vec3 a, double s) { return a *= s; }
inline Vec3 operator/(Vec3 a, double s) { return a *= 1.0 / s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 unit(int i) { Vec3 e; e[i] = 1.0; return e; }

// su(2) in the orthonormal basis sigma_j = (i/2) tau_j, so [sigma_1, sigma_2] = -sigma_3.
// A rotation R acting on Ad is a Lie algebra automorphism; the gauge action on
// a connection is A -> R A + vec(dR R^T) with vec([w]_x) = w.
using Ad = Vec3;
inline Ad bracket(const Ad& u, const Ad& v) { return cross(v, u); }

struct Mat3 {
  std::array<double, 9> m{};  // row-major

  static Mat3 identity() { Mat3 r; r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1}; return r; }
  double& operator()(int i, int j) { return m[3 * i + j]; }
  double operator()(int i, int j) const { return m[3 * i + j]; }
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transpose() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
};

// Rotation by angle about a unit axis (adjoint action of exp(angle * axis)).
Mat3 rotation(const Vec3& axis, double angle);
// Rotation vector (axis * angle) -> matrix; smooth through zero.
Mat3 rotation_from_vector(const Vec3& w);

// Cut-off profile: 1 for s <= 1, 0 for s >= 2, C^2 quintic in between.
inline double cutoff(double s) {
  if (s <= 1.0) return 1.0;
  if (s >= 2.0) return 0.0;
  double u = 2.0 - s;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}
inline double cutoff_deriv(double s) {
  if (s <= 1.0 || s >= 2.0) return 0.0;
  double u = 2.0 - s;
  return -30.0 * u * u * (1.0 - u) * (1.0 - u);
}
inline double cutoff_deriv2(double s) {
  if (s <= 1.0 || s >= 2.0) return 0.0;
  double u = 2.0 - s;
  return 60.0 * u * (1.0 + u * (-3.0 + 2.0 * u));
}

// Smooth (C-infinity) step with the same supports as cutoff. Used for gauge
// switches, whose connection term carries one derivative of the profile.
double smooth_step(double s);
double smooth_step_deriv(double s);

// Reduce an angle to [0, 2pi).
inline double wrap_angle(double t) {
  double r = std::fmod(t, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}
// Reduce an angle to [-pi, pi).
inline double wrap_signed(double t) {
  double r = wrap_angle(t + kPi) - kPi;
  return r;
}

struct Point3 {
  double x = 0, y = 0;
  double t = 0;  // reduced to [0, 2pi)

  Point3() = default;
  Point3(double x_, double y_, double t_) : x(x_), y(y_), t(wrap_angle(t_)) {}
  Point3(std::complex<double> z, double t_) : x(z.real()), y(z.imag()), t(wrap_angle(t_)) {}

  std::complex<double> z() const { return {x, y}; }
  Point3 shifted(const Vec3& d) const { return Point3(x + d.x, y + d.y, t + d.z); }
};

// Shortest displacement q - p, with the circle component in [-pi, pi).
inline Vec3 displacement(const Point3& p, const Point3& q) {
  return {q.x - p.x, q.y - p.y, wrap_signed(q.t - p.t)};
}
double distance(const Point3& p, const Point3& q);

struct MixedForm {
  std::array<Ad, 3> a{};  // a_x, a_y, a_t
  Ad psi{};

  MixedForm& operator+=(const MixedForm& o) {
    for (int i = 0; i < 3; ++i) a[i] += o.a[i];
    psi += o.psi;
    return *this;
  }
  MixedForm& operator-=(const MixedForm& o) {
    for (int i = 0; i < 3; ++i) a[i] -= o.a[i];
    psi -= o.psi;
    return *this;
  }
  MixedForm& operator*=(double s) {
    for (auto& c : a) c *= s;
    psi *= s;
    return *this;
  }
};
inline MixedForm operator+(MixedForm u, const MixedForm& v) { return u += v; }
inline MixedForm operator-(MixedForm u, const MixedForm& v) { return u -= v; }
inline MixedForm operator*(double s, MixedForm u) { return u *= s; }
double norm2(const MixedForm& u);
inline double norm(const MixedForm& u) { return std::sqrt(norm2(u)); }
double dot(const MixedForm& u, const MixedForm& v);
MixedForm rotate(const Mat3& g, const MixedForm& u);

// gamma(dx_h), h in {1,2,3}; orientation dx^dy^dt.
MixedForm clifford(int h, const MixedForm& u);
// P gamma(dx_h) P with P(a, psi) = (a, -psi): the quaternionic structure that
// commutes with d_2 + d_1^*. Zero-form part +a_h.
MixedForm quaternion(int h, const MixedForm& u);

struct Split {
  MixedForm diag, trans;
};
Split split_diag(const MixedForm& u, const Ad& direction);

// A configuration (A, Phi) at a point is stored as a MixedForm: a = A, psi = Phi.
using FieldValue = MixedForm;

// Smooth local description of a field. The evaluator receives an anchor point
// (which fixes branch choices such as the Dirac-string sheet) and a Euclidean
// offset (dx, dy, dt) that is never re-reduced, so finite differences taken
// around the anchor see a smooth function.
struct Chart {
  std::string name;
  std::string block;
  std::function<double(const Point3&)> margin;  // > 0 inside the domain
  std::function<FieldValue(const Point3& anchor, const Vec3& offset)> eval;
};

// Gauge transition on an overlap: adjoint rotation g_{ab}(p) with
// field_b = g . field_a (up to the connection term, checked via invariants).
struct Transition {
  int from = 0, to = 0;
  std::function<Mat3(const Point3&)> g;
};

class ChartField {
 public:
  std::vector<Chart> charts;
  std::vector<Transition> transitions;

  int add(Chart c) {
    charts.push_back(std::move(c));
    return static_cast<int>(charts.size()) - 1;
  }
  // Chart with the largest margin; -1 if p lies in no chart.
  int best_chart(const Point3& p) const;
  FieldValue eval(const Point3& p) const;
  FieldValue eval(int chart, const Point3& anchor, const Vec3& offset) const {
    return charts.at(chart).eval(anchor, offset);
  }
};

// Gauss-Legendre rule on [a, b]; n in {7, 10, 15, 20, 25, 30}.
struct QuadRule {
  std::vector<double> x, w;
};
QuadRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

struct ChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace forge
