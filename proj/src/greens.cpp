#include "forge/greens.hpp"

#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>

namespace forge {

double bessel_k0(double x) { return boost::math::cyl_bessel_k(0, x); }
double bessel_k1(double x) { return boost::math::cyl_bessel_k(1, x); }

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kEM1 = kTwoPi / 24.0;
constexpr double kEM3 = -7.0 / 5760.0 * kTwoPi * kTwoPi * kTwoPi;

// Euler-Maclaurin tail pieces for F(s) = -1/(2 sqrt(r^2 + s^2)), evaluated at
// the half-integer cut s.
double em_tail(double r, double s) {
  double u = r * r + s * s;
  double Fs = 0.5 * s * std::pow(u, -1.5);
  double Fsss = 0.5 * (-9.0 * s * std::pow(u, -2.5) + 15.0 * s * s * s * std::pow(u, -3.5));
  return kEM1 * Fs + kEM3 * Fsss;
}

RT em_tail_grad(double r, double s) {
  double u = r * r + s * s;
  double dFs_r = -1.5 * r * s * std::pow(u, -2.5);
  double Fss = 0.5 * (std::pow(u, -1.5) - 3.0 * s * s * std::pow(u, -2.5));
  double dFsss_r = 0.5 * (45.0 * r * s * std::pow(u, -3.5) - 105.0 * r * s * s * s * std::pow(u, -4.5));
  double Fssss = 0.5 * (-9.0 * std::pow(u, -2.5) + 90.0 * s * s * std::pow(u, -3.5) -
                        105.0 * s * s * s * s * std::pow(u, -4.5));
  return {kEM1 * dFs_r + kEM3 * dFsss_r, kEM1 * Fss + kEM3 * Fssss};
}

// (1/4pi) log(s + sqrt(r^2 + s^2)): the integrated tail together with the
// log r counterterm.
double log_tail(double r, double s) {
  return std::log(s + std::sqrt(r * r + s * s)) / (4.0 * kPi);
}

RT log_tail_grad(double r, double s) {
  double q = std::sqrt(r * r + s * s);
  return {r / (q * (s + q)) / (4.0 * kPi), 1.0 / q / (4.0 * kPi)};
}

// Tail of the axial potential for m > M: g(s) = (1/2)(1 - s/sqrt(r^2+s^2)).
double axial_tail(double r, double s) {
  double u = r * r + s * s;
  double q = std::sqrt(u);
  double integral = r * r / (q + s) / (4.0 * kPi);
  double g1 = -0.5 * r * r * std::pow(u, -1.5);
  double g3 = 1.5 * r * r * (std::pow(u, -2.5) - 5.0 * s * s * std::pow(u, -3.5));
  return integral + kEM1 * g1 + kEM3 * g3;
}

}  // namespace

GreensFunction::GreensFunction(GreensParams p) : p_(p) {
  if (p_.image_count < 8) throw std::invalid_argument("image_count must be >= 8");
  if (p_.fourier_count < 16) throw std::invalid_argument("fourier_count must be >= 16");
  if (!(p_.crossover_radius > 0.5)) throw std::invalid_argument("crossover_radius too small");
}

int GreensFunction::far_terms(double r) const {
  return std::max(p_.fourier_count, static_cast<int>(std::ceil(40.0 / r)));
}

double GreensFunction::far(double r, double t) const {
  if (!(r > 0)) throw PoleError();
  double s = 0;
  int n_max = far_terms(r);
  for (int n = n_max; n >= 1; --n) s += bessel_k0(n * r) * std::cos(n * t);
  return std::log(r) / kTwoPi - s / kPi;
}

RT GreensFunction::far_grad(double r, double t) const {
  if (!(r > 0)) throw PoleError();
  double sr = 0, st = 0;
  int n_max = far_terms(r);
  for (int n = n_max; n >= 1; --n) {
    sr += n * bessel_k1(n * r) * std::cos(n * t);
    st += n * bessel_k0(n * r) * std::sin(n * t);
  }
  return {1.0 / (kTwoPi * r) + sr / kPi, st / kPi};
}

double GreensFunction::near_regular(double r, double t) const {
  t = wrap_signed(t);
  const int M = p_.image_count;
  double s = 0;
  for (int m = M; m >= 1; --m) {
    double a = t + kTwoPi * m, b = t - kTwoPi * m;
    s -= 0.5 / std::sqrt(r * r + a * a) + 0.5 / std::sqrt(r * r + b * b);
  }
  double sp = kTwoPi * (M + 0.5) + t, sm = kTwoPi * (M + 0.5) - t;
  s += log_tail(r, sp) + log_tail(r, sm);
  s += em_tail(r, sp) + em_tail(r, sm);
  return s;
}

RT GreensFunction::near_regular_grad(double r, double t) const {
  t = wrap_signed(t);
  const int M = p_.image_count;
  RT g;
  for (int m = M; m >= 1; --m) {
    for (double s : {t + kTwoPi * m, t - kTwoPi * m}) {
      double q3 = std::pow(r * r + s * s, 1.5);
      g.r += 0.5 * r / q3;
      g.t += 0.5 * s / q3;
    }
  }
  double sp = kTwoPi * (M + 0.5) + t, sm = kTwoPi * (M + 0.5) - t;
  RT lp = log_tail_grad(r, sp), lm = log_tail_grad(r, sm);
  RT ep = em_tail_grad(r, sp), em = em_tail_grad(r, sm);
  g.r += lp.r + lm.r + ep.r + em.r;
  g.t += lp.t - lm.t + ep.t - em.t;
  return g;
}

double GreensFunction::near(double r, double t) const {
  t = wrap_signed(t);
  double rho = std::sqrt(r * r + t * t);
  if (!(rho > 0)) throw PoleError();
  return near_regular(r, t) - 0.5 / rho;
}

RT GreensFunction::near_grad(double r, double t) const {
  t = wrap_signed(t);
  double rho = std::sqrt(r * r + t * t);
  if (!(rho > 0)) throw PoleError();
  RT g = near_regular_grad(r, t);
  double q3 = rho * rho * rho;
  g.r += 0.5 * r / q3;
  g.t += 0.5 * t / q3;
  return g;
}

double GreensFunction::operator()(const Vec3& d) const {
  double r = std::hypot(d.x, d.y);
  return r >= p_.crossover_radius ? far(r, d.z) : near(r, d.z);
}

Vec3 GreensFunction::grad(const Vec3& d) const {
  double r = std::hypot(d.x, d.y);
  RT g = r >= p_.crossover_radius ? far_grad(r, d.z) : near_grad(r, d.z);
  if (r == 0) return {0, 0, g.t};
  return {g.r * d.x / r, g.r * d.y / r, g.t};
}

double GreensFunction::regular(const Vec3& d) const {
  double r = std::hypot(d.x, d.y);
  if (r >= p_.crossover_radius) {
    double t = wrap_signed(d.z);
    return far(r, t) + 0.5 / std::sqrt(r * r + t * t);
  }
  return near_regular(r, d.z);
}

Vec3 GreensFunction::grad_regular(const Vec3& d) const {
  double r = std::hypot(d.x, d.y);
  RT g;
  if (r >= p_.crossover_radius) {
    double t = wrap_signed(d.z);
    g = far_grad(r, t);
    double q3 = std::pow(r * r + t * t, 1.5);
    g.r -= 0.5 * r / q3;
    g.t -= 0.5 * t / q3;
  } else {
    g = near_regular_grad(r, d.z);
  }
  if (r == 0) return {0, 0, g.t};
  return {g.r * d.x / r, g.r * d.y / r, g.t};
}

double GreensFunction::a0_closed_form() {
  return (std::log(4.0 * kPi) - kEulerGamma) / kPi;
}

double GreensFunction::a0() const { return 2.0 * near_regular(0.0, 0.0); }

// Richardson extrapolation in rho^2 of G + 1/(2 rho) along the t-axis.
double GreensFunction::a0_extrapolated_near() const {
  const double h[3] = {0.2, 0.1, 0.05};
  double f[3];
  for (int i = 0; i < 3; ++i) f[i] = near(0.0, h[i]) + 0.5 / h[i];
  double f01 = (4.0 * f[1] - f[0]) / 3.0, f12 = (4.0 * f[2] - f[1]) / 3.0;
  return 2.0 * (16.0 * f12 - f01) / 15.0;
}

// The Fourier-Bessel series only converges fast for r bounded away from 0, so
// extrapolate the regular part from the overlap annulus: sample along the
// planar ray at r in [1, 2.5] and fit a polynomial in r^2.
double GreensFunction::a0_extrapolated_far() const {
  constexpr int n = 8;
  double rs[n], fs[n];
  for (int i = 0; i < n; ++i) {
    rs[i] = 0.9 + 0.2 * i;
    fs[i] = far(rs[i], 0.0) + 0.5 / rs[i];
  }
  // Neville interpolation in x = r^2, evaluated at x = 0.
  double P[n];
  for (int i = 0; i < n; ++i) P[i] = fs[i];
  for (int m = 1; m < n; ++m)
    for (int i = 0; i < n - m; ++i) {
      double xi = rs[i] * rs[i], xj = rs[i + m] * rs[i + m];
      P[i] = (xj * P[i] - xi * P[i + 1]) / (xj - xi);
    }
  return 2.0 * P[0];
}

double GreensFunction::axial_potential_far(double r, double s) const {
  if (!(r > 0)) throw PoleError();
  double J = 0;
  int n_max = far_terms(r);
  for (int n = n_max; n >= 1; --n) J += bessel_k1(n * r) * std::sin(n * s);
  J *= r / kPi;
  return 0.5 - s / kTwoPi - J;
}

double GreensFunction::axial_potential_near(double r, double s) const {
  double shift = std::floor((s + kPi) / kTwoPi);
  double sr = s - kTwoPi * shift;  // in [-pi, pi)
  const int M = p_.image_count;
  double I = 0;
  double r2 = r * r;
  for (int m = M; m >= -M; --m) {
    double sm = sr + kTwoPi * m;
    double q = std::sqrt(r2 + sm * sm);
    if (sm >= 0)
      I += 0.5 * r2 / (q * (q + sm));
    else
      I -= 0.5 * r2 / (q * (q - sm));
  }
  double sp = kTwoPi * (M + 0.5) + sr, sn = kTwoPi * (M + 0.5) - sr;
  I += axial_tail(r, sp) - axial_tail(r, sn);
  // the m = 0 image contributes a unit step below the pole in the sheet [-pi, pi)
  double base = sr < 0 ? 1.0 : 0.0;
  if (sr == 0 && r == 0) throw PoleError();
  return base + I - shift;
}

double GreensFunction::axial_potential(double r, double s) const {
  return r >= p_.crossover_radius ? axial_potential_far(r, s) : axial_potential_near(r, s);
}

}  // namespace forge
