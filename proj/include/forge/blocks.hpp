#pragma once

#include <memory>
#include <optional>

#include "forge/core.hpp"
#include "forge/greens.hpp"

namespace forge {

struct BackgroundData {
  double v = 0;
  double b = 0;                  // flat twist, mod 1
  std::vector<Point3> p;         // singularities, charge -1 each
  std::vector<Point3> q;         // centres, charge 2 each

  int k() const { return static_cast<int>(q.size()); }
  int n() const { return static_cast<int>(p.size()); }
  int charge_at_infinity() const { return 2 * k() - n(); }
  double min_distance() const;   // d
  double max_distance() const;   // d-bar (pairs q-q and q-p)
  // Throws std::invalid_argument naming the violated precondition.
  void validate(double d_min = 5.0) const;
};

struct LocalMasses {
  std::vector<double> lambda;         // closed form
  std::vector<double> lambda_direct;  // regular part of Phi_ext at q_j
  double lambda_min = 0, lambda_max = 0;
  double d = 0;
  double predicted_slope = 0;         // (1/pi)(k - 1 - n/2)
};

LocalMasses local_masses(const GreensFunction& G, const BackgroundData& bg);

struct AdmissibilityReport {
  bool distance_ok = false;      // (i)  d >= d0
  bool mass_ok = false;          // (ii) min lambda_j > lambda0
  bool ratio_ok = false;         // (iii) max lambda_j <= K min lambda_j
  bool sign_ok = false;          // (iv) v > 0 if n = 2k
  bool large_distance_ok = false;  // d-bar <= K' d
  bool admissible() const { return distance_ok && mass_ok && ratio_ok && sign_ok; }
};

AdmissibilityReport check_admissible(const GreensFunction& G, const BackgroundData& bg, double lambda0,
                                     double d0, double K, double K_prime = 4.0);

double dirac_higgs(const GreensFunction& G, const Point3& p, const Point3& singularity, int charge, double mass);

enum class StringChart { North, South };  // North: string below the point (s < 0); South: above

struct StringError : std::domain_error {
  StringError() : std::domain_error("string") {}
};

// Real 1-form (a_x, a_y, a_t) of the periodic Dirac potential, evaluated at
// anchor + offset with the sheet fixed by the anchor.
Vec3 dirac_potential(const GreensFunction& G, StringChart chart, const Point3& anchor, const Vec3& offset,
                     const Point3& singularity, int charge, double b);
inline Vec3 dirac_potential(const GreensFunction& G, StringChart chart, const Point3& p, const Point3& singularity,
                            int charge, double b) {
  return dirac_potential(G, chart, p, Vec3{}, singularity, charge, b);
}
// Chart whose excluded ray is farther from the anchor.
StringChart preferred_chart(const Point3& anchor, const Point3& singularity);

// Sum of periodic Dirac monopoles with optional dipole corrections
// -2 s_j ⌟ (*dG_{q_j}, dG_{q_j}); all values along sigma_3.
struct AbelianSource {
  Point3 pos;
  int charge = 0;
  Vec3 dipole{};  // s_j (only meaningful at centres)
};

class AbelianField {
 public:
  AbelianField(std::shared_ptr<const GreensFunction> G, double v, double b, std::vector<AbelianSource> sources);

  // Scalar phi and real 1-form a (diagonal components).
  void eval(const Point3& anchor, const Vec3& offset, double& phi, Vec3& a) const;
  FieldValue value(const Point3& anchor, const Vec3& offset) const;
  double phi(const Point3& p) const;
  Vec3 grad_phi(const Point3& p) const;

  const std::vector<AbelianSource>& sources() const { return src_; }
  const GreensFunction& greens() const { return *G_; }
  double v() const { return v_; }
  double b() const { return b_; }

 private:
  std::shared_ptr<const GreensFunction> G_;
  double v_, b_;
  std::vector<AbelianSource> src_;
};

// c_ext as a chart field: one abelian chart, string sheets chosen per anchor.
ChartField build_c_ext(std::shared_ptr<const GreensFunction> G, const BackgroundData& bg);
AbelianField c_ext_field(std::shared_ptr<const GreensFunction> G, const BackgroundData& bg,
                         const std::vector<Vec3>& dipoles = {});

// --- Prasad-Sommerfield monopole -------------------------------------------

struct PSMonopole {
  double scale = 1.0;   // lambda
  Vec3 x0{};            // centre offset in rescaled coordinates
  double tau = 0.0;     // phase (rotation about the Higgs direction)
};

// Unit-mass profiles phi(r)/r and f(r)/r with Phi = phi x^, A = f (x^ x sigma).dx.
double ps_phi_over_r(double r);
double ps_f_over_r(double r);

// (A, Phi) at a point x of R^3 (x measured from the gluing centre in
// unrescaled units): lambda * (PS_1)(lambda x - x0).
FieldValue ps_eval(const PSMonopole& m, const Vec3& x);
// Pullback location of the Higgs zero.
inline Vec3 ps_zero(const PSMonopole& m) { return m.x0 / m.scale; }

// Smooth SO(3)-valued gauge given by a rotation vector w(x) and its partial
// derivatives; acts by Phi -> R Phi, A_i -> R A_i + J_L(w) d_i w.
struct RotationGauge {
  Mat3 R = Mat3::identity();
  std::array<Vec3, 3> conn{};  // vec(d_i R R^T)
};
RotationGauge rotation_gauge(const Vec3& w, const std::array<Vec3, 3>& dw);
FieldValue apply_gauge(const RotationGauge& g, const FieldValue& f);

// Rotation vector of the minimal rotation taking unit u to unit v, with
// derivatives given du, dv. Requires u . v > -1.
Vec3 minimal_rotation(const Vec3& u, const std::array<Vec3, 3>& du, const Vec3& v, const std::array<Vec3, 3>& dv,
                      std::array<Vec3, 3>& dw);

// Euclidean abelian Dirac monopole along sigma_3: Phi = mass - charge/(2 rho),
// A = (charge/2)(1 - cos theta) dphi (string on the negative third axis).
FieldValue euclidean_dirac(const Vec3& x, double charge, double mass);

struct AbelianGaugeResult {
  FieldValue remainder;   // eta(A, Phi) - (A0, Phi0) sigma_3
  FieldValue gauged;      // eta(A, Phi)
};
// Hedgehog-straightening gauge (x^ -> sigma_3) of the unit PS monopole at x.
AbelianGaugeResult ps_abelian_gauge(const PSMonopole& m, const Vec3& x);
// Same gauge applied to an arbitrary hedgehog-frame field value.
FieldValue straighten(const Vec3& x, const FieldValue& f);

}  // namespace forge
