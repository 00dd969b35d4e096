#pragma once

#include <cstdint>
#include <memory>
#include <random>

#include "forge/analysis.hpp"
#include "forge/blocks.hpp"
#include "forge/greens.hpp"
#include "forge/preglue.hpp"
#include "forge/solver.hpp"

// Measurements shared by the CLI commands and the acceptance tests. Each
// function returns raw numbers; thresholds are applied by the callers.
namespace forge {

using Rng = std::mt19937_64;

// --- Green's function ----------------------------------------------------------

// max |far - near| over a grid of 1 <= rho <= 3, t in [0, 2pi), plus random points.
double greens_branch_agreement(const GreensFunction& G, Rng& rng, int random_points = 20);

struct PoleLimit {
  double rho1 = 1e-2, rho2 = 1e-3;
  double f1 = 0, f2 = 0;     // rho G at rho1, rho2
  double extrapolated = 0;   // linear extrapolation to rho = 0
};
PoleLimit greens_pole_limit(const GreensFunction& G, const Vec3& direction);

struct FarDecay {
  std::array<double, 3> r{6, 8, 10};
  std::array<double, 3> deviation{};  // max over t of |G - log(r)/2pi|
  std::array<double, 2> factor{};     // deviation(r_i) / deviation(r_{i+1})
  double rate_per_unit = 0;           // log of the mean factor per unit r
};
FarDecay greens_far_decay(const GreensFunction& G, int nt = 64);

// max |G - a0/2 + 1/(2 rho)| / rho^2 over random directions at the given radii.
double greens_near_constant(const GreensFunction& G, const std::vector<double>& radii, Rng& rng, int dirs = 8);

// --- exact-solution residuals ----------------------------------------------------

struct OrderSample {
  Point3 p;
  std::array<double, 3> h{4e-3, 2e-3, 1e-3};
  std::array<double, 3> residual{};
  double order = 0;  // log2(residual(2e-3) / residual(1e-3))
};
std::vector<OrderSample> residual_order(const ChartField& field, const std::vector<Point3>& pts);

// The unit PS monopole (or any local field) as a single-chart field on R^2 x R.
ChartField local_chart_field(std::string name, LocalField f);

// Random points at least min_dist from every p_i, q_j and at most max_dist from some q_j.
std::vector<Point3> sample_regular_points(const BackgroundData& bg, int count, double min_dist, double max_dist,
                                          Rng& rng);

struct FluxRow {
  std::string where;
  double value = 0, expected = 0;
  double rel_error() const { return std::abs(value - expected) / std::abs(expected); }
};
// Spheres around each q_j and p_i and the torus at R_big.
std::vector<FluxRow> flux_table(const ChartField& field, const BackgroundData& bg, double R_big);

// --- pregluing -----------------------------------------------------------------------

// Shift v so that the smallest local mass equals lambda.
BackgroundData with_min_mass(const GreensFunction& G, BackgroundData bg, double lambda);

struct PregluingEstimates {
  double off_support = 0;  // max |Psi| outside the annuli, rho_j < 0.95
  double diff = 0;         // max |Psi - Psi_zeta|
  double r2_zeta = 0;      // max rho_j^2 |Psi_zeta|
  double curvature = 0;    // max (lambda_j^-2 + rho_j^2) |d_A Phi|
  double phi_min = 0;      // min |Phi| on U_ext
  int samples = 0;
};
// Samples 41 log-spaced radii from delta/(8N) to 0.95 around every centre
// (12 directions each) and 400 points of U_ext.
PregluingEstimates pregluing_estimates(const Pregluing& c, Rng& rng);

// --- solver -------------------------------------------------------------------------------

struct DeformSetup {
  int points = 32;
  double half_width = 0.8;
  double stretch = 3.3;
  double fd_h = 1e-5;
  WeightMode mode = WeightMode::HighMass;
  double delta = 0.25;
  double sigma = 0.5;
  DeformOptions options;
};

// Sinh stretch that makes the central spacing of an n-node axis equal h.
double stretch_for_spacing(int n, double half_width, double h);
// Setup whose central spacing times lambda matches base at lambda_ref.
DeformSetup scaled_setup(DeformSetup base, double lambda_ref, double lambda);

struct CentreDeform {
  std::shared_ptr<const Grid> grid;
  SolveReport report;
  Vector psi;                  // 1-form Bogomolny error on unknowns
  Eigen::Matrix3d gram;        // grid Gram matrix of the projection
  Vec3 obstruction{};          // <full residual - Psi, gamma_ext sigma^ dx_h> / 4 pi
  double psi_norm = 0, projected_norm = 0;
  double adjointness = 0;      // relative <d2 u, f> - <u, d2^* f> on random vectors
};
CentreDeform deform_centre(const Pregluing& c, int j, const DeformSetup& s, Rng& rng);
// h = sum over centres of the obstruction components of the deformation terms.
Vec3 deformation_h(const std::vector<CentreDeform>& runs);

// Initial ||pi(Psi)|| by quadrature at each lambda, plus the least-squares log-log slope.
struct ScalingScan {
  std::vector<double> lambda, norm;
  double slope = 0;
};
ScalingScan projected_error_scan(const GreensFunction& G, const BackgroundData& bg, const GluingData& like,
                                 const std::vector<double>& lambdas, double delta, double sigma);
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct DKernel {
  double h = 0;
  std::array<double, 4> ratio{};  // ||D k|| / ||k||
  std::array<double, 4> gram_eigen{};
};
// The four kernel elements (d_A Phi, 0) and quaternion(h, .) of it for the
// unit PS monopole on a uniform n^3 grid of half-width L.
DKernel ps_dkernel(int n, double L);

struct WeitzenboeckCheck {
  double h = 0;
  double rel_error = 0;  // ||d2 d2^* f - (nabla^* nabla - ad(Phi)^2 + *[Psi ^]) f|| / ||d2 d2^* f||
};
// Unit PS monopole with its Higgs field scaled by (1 + perturb), so Psi != 0.
WeitzenboeckCheck weitzenboeck_check(int n, double L, double perturb, std::uint64_t seed);

struct CGDirect {
  int iterations = 0;
  double rel_diff = 0;
};
// PCG (tol 1e-12) against the sparse direct solve on the unit PS background.
CGDirect cg_vs_direct(int nx, int ny, int nt, double L, std::uint64_t seed);

// Manufactured xi* = d2^* u* with pi(d2 d2^* u*) = d2 d2^* u*; returns the
// weighted relative error of the recovered xi.
double manufactured_recovery(const Pregluing& c, const DeformSetup& s, Rng& rng);

// --- large distance ---------------------------------------------------------------------

struct WManufactured {
  double rel_error = 0, beta_error = 0;
  int iterations = 0;
};
WManufactured w_manufactured(const BackgroundData& bg, const std::vector<double>& lambda, double delta,
                             double spacing, double margin, int nt, Rng& rng);

struct MassSlope {
  std::vector<double> d, lambda;  // mean local mass at each scaled configuration
  double slope = 0, predicted = 0;
};
// Local masses as all positions are scaled by the given factors (t unchanged).
MassSlope mass_slope(const GreensFunction& G, const BackgroundData& bg, const std::vector<double>& factors);

}  // namespace forge
