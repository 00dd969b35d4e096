#pragma once

#include "forge/core.hpp"

namespace forge {

double bessel_k0(double x);
double bessel_k1(double x);

struct GreensParams {
  double crossover_radius = 2.0;  // planar radius above which the Fourier-Bessel series is used
  int image_count = 24;           // M >= 8
  int fourier_count = 16;         // minimum number of Bessel terms, N_f >= 16
};

// Derivatives of an axisymmetric function in cylindrical variables.
struct RT {
  double r = 0, t = 0;
};

// Green's function of R^2 x S^1 with Laplacian 2*pi*delta, normalised so that
// G - (1/2pi) log r -> 0 at infinity. Arguments are displacements (x, y, t)
// from the singularity; t is taken mod 2pi.
class GreensFunction {
 public:
  explicit GreensFunction(GreensParams p = {});

  const GreensParams& params() const { return p_; }

  double operator()(const Vec3& d) const;
  Vec3 grad(const Vec3& d) const;

  // G + 1/(2 rho), rho the distance to the nearest image; smooth near the pole.
  double regular(const Vec3& d) const;
  Vec3 grad_regular(const Vec3& d) const;

  // Both representations, exposed for cross-validation. t is reduced internally.
  double far(double r, double t) const;
  RT far_grad(double r, double t) const;
  double near(double r, double t) const;
  RT near_grad(double r, double t) const;
  double near_regular(double r, double t) const;  // near branch without the m = 0 image
  RT near_regular_grad(double r, double t) const;

  // a_0 = 2 lim (G + 1/(2 rho)).
  double a0() const;
  static double a0_closed_form();
  double a0_extrapolated_near() const;
  double a0_extrapolated_far() const;

  // Axial potential of a unit Dirac charge: u(r, s) with d(u dtheta) = *dG,
  // continuous in s (not reduced), u(0, s) = 0 for 0 < s < 2pi.
  double axial_potential(double r, double s) const;
  double axial_potential_far(double r, double s) const;
  double axial_potential_near(double r, double s) const;

 private:
  int far_terms(double r) const;
  GreensParams p_;
};

struct PoleError : std::domain_error {
  PoleError() : std::domain_error("pole") {}
};

}  // namespace forge
