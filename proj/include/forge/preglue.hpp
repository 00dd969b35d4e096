#pragma once

#include <memory>

#include "forge/blocks.hpp"
#include "forge/core.hpp"
#include "forge/greens.hpp"

namespace forge {

struct GluingData {
  std::vector<Vec3> x0;       // PS centre offsets, |x0_j| < kappa
  std::vector<double> tau;    // phases
  double N = 8.0;             // neck ratio
  double kappa = 0.5;
  std::vector<double> lambda;  // local masses
  std::vector<double> delta;   // lambda_j^{-1/2}
  Vec3 zeta{};                 // -sum x0_j / lambda_j
  // Skip the 2N delta_j < 1/2 check (low-mass test runs only).
  bool allow_infeasible_neck = false;

  int k() const { return static_cast<int>(lambda.size()); }
  void validate() const;
};

Vec3 centre_of_mass(const std::vector<Vec3>& x0, const std::vector<double>& lambda);

// x0 and tau default to zero when empty.
GluingData make_gluing_data(const LocalMasses& lm, std::vector<Vec3> x0 = {}, std::vector<double> tau = {},
                            double N = 8.0, double kappa = 0.5, bool allow_infeasible_neck = false);

// Radial cut-offs around one centre; all functions of rho_j.
struct Cutoffs {
  double delta = 0, N = 8.0;

  double chi_int(double rho) const { return cutoff(2.0 * N * rho / delta); }
  double chi_int_deriv(double rho) const { return (2.0 * N / delta) * cutoff_deriv(2.0 * N * rho / delta); }
  double chi_ext(double rho) const { return 1.0 - cutoff(rho / (N * delta)); }
  double chi_ext_deriv(double rho) const { return -cutoff_deriv(rho / (N * delta)) / (N * delta); }
  // 1 on B_{delta/2}, 0 outside B_{2 delta}; cut-off in log rho.
  double gamma(double rho) const;
  double gamma_deriv(double rho) const;
  // 1 - gamma, valid on B_1(q_j) where no other gamma_l is supported.
  double gamma_ext(double rho) const { return 1.0 - gamma(rho); }
  // 1 for rho <= delta, 0 for rho >= N delta, linear in log rho with rounded ends.
  double beta(double rho) const;
  double beta_deriv(double rho) const;
  // 0 for rho <= delta/N, 1 for rho >= delta, same profile.
  double beta_ext(double rho) const;
  double beta_ext_deriv(double rho) const;
};

Cutoffs make_cutoffs(const GluingData& gd, int j);

// Real-valued mixed form, multiplied by the Higgs direction where used.
struct ScalarForm {
  Vec3 a{};
  double psi = 0;
};

struct PregluingOptions {
  double chart_radius = 1.0;    // hedgehog charts live on B_R(q_j)
  double exterior_inner = 0.6;  // global abelian chart needs rho_j > this for all j
  int radial_nodes = 10;        // Gauss-Legendre nodes for the radial-gauge integral
};

// The approximate solution c(x0, tau) with its gluing data.
//
// Charts: H_j (hedgehog frame on B_R(q_j)), E_j (H_j straightened to the
// abelian frame, on B_R(q_j) minus B_{delta/N} and the ray below q_j), and
// E (the global abelian gauge away from all centres).
class Pregluing {
 public:
  Pregluing(std::shared_ptr<const GreensFunction> G, BackgroundData bg, GluingData gd, PregluingOptions opt = {});

  const ChartField& field() const { return field_; }
  const GluingData& gluing() const { return gd_; }
  const BackgroundData& background() const { return bg_; }
  const GreensFunction& greens() const { return *G_; }
  const Cutoffs& cutoffs(int j) const { return cut_.at(j); }
  const PregluingOptions& options() const { return opt_; }

  int hedgehog_chart(int j) const { return j; }
  int abelian_chart(int j) const { return gd_.k() + j; }
  int exterior_chart() const { return 2 * gd_.k(); }

  // Field in the hedgehog chart at offset X from q_j.
  FieldValue hedgehog(int j, const Vec3& X, bool with_zeta = true) const;
  // Field in the global abelian chart.
  FieldValue exterior(const Point3& anchor, const Vec3& offset, bool with_zeta = true) const;

  // Building blocks in the hedgehog chart.
  FieldValue c0(int j, const Vec3& X) const;        // Dirac charge 2 at q_j plus dipole term
  FieldValue interior(int j, const Vec3& X) const;  // rescaled, translated PS aligned with c0
  // Exterior minus c0 in the radial gauge about q_j, along the Higgs direction.
  ScalarForm mismatch(int j, const Vec3& X) const;

  // o_h, h = 1..4, at anchor + offset (real part; multiplies sigma^).
  ScalarForm obstruction(int h, const Point3& anchor, const Vec3& offset = {}) const;
  // sum_h zeta_h o_h times 4 pi.
  ScalarForm zeta_correction(const Point3& anchor, const Vec3& offset = {}) const;
  // Product of the exterior cut-offs over all centres.
  double chi_ext(const Point3& p) const;
  double gamma_ext(const Point3& p) const;

  // Offset of p from q_j and its length.
  Vec3 offset_from(int j, const Point3& p) const { return displacement(bg_.q[j], p); }

 private:
  void build_charts();

  std::shared_ptr<const GreensFunction> G_;
  BackgroundData bg_;
  GluingData gd_;
  PregluingOptions opt_;
  std::vector<Cutoffs> cut_;
  std::shared_ptr<AbelianField> ext_;
  ChartField field_;
};

// Bogomolny error of the assembled field and the abelian part 4 pi d_2(sum zeta_h o_h).
struct ErrorSample {
  int chart = -1;
  std::array<Ad, 3> psi{};      // *F - d_A Phi in the chart
  Vec3 psi_zeta{};              // real 1-form, multiplies sigma^
  Ad higgs{};
  double norm_psi = 0, norm_zeta = 0, norm_diff = 0;
  double dphi = 0;              // |d_A Phi|
};
ErrorSample error_at(const Pregluing& c, const Point3& p, double h, int order = 4);

// d_2 of a real abelian form: *da - d psi, by finite differences.
Vec3 abelian_d2(const std::function<ScalarForm(const Vec3&)>& f, double h, int order = 4);
// d^* a = -div a, by finite differences.
double abelian_codiff(const std::function<ScalarForm(const Vec3&)>& f, double h, int order = 4);

struct ObstructionPairing {
  std::array<std::array<double, 3>, 3> d2{};  // <d_2 o_h, sigma^ dx_l>
  double flat_dirac = 0;                       // <D o_4, sigma^>
};
// Quadrature over the annuli B_{2N delta_j} \ B_{N delta_j}, where d_2 o_h is supported.
ObstructionPairing obstruction_pairing(const Pregluing& c, int radial = 20, int polar = 20, int azimuthal = 48);

}  // namespace forge
