#pragma once

#include <functional>
#include <optional>

#include "forge/blocks.hpp"
#include "forge/core.hpp"

namespace forge {

// --- pointwise finite differences ------------------------------------------

using LocalField = std::function<FieldValue(const Vec3& offset)>;

struct Jet {
  FieldValue f;
  std::array<FieldValue, 3> d;  // partial derivatives along x, y, t
};

// order 2: central differences; order 4: Richardson combination of steps h, 2h.
Jet fd_jet(const LocalField& f, double h, int order = 2);
Jet fd_jet(const ChartField& field, int chart, const Point3& anchor, double h, int order = 2);

struct Bogomolny {
  std::array<Ad, 3> starF{};
  std::array<Ad, 3> dAPhi{};
  std::array<Ad, 3> psi{};  // *F - d_A Phi
  double residual() const;  // |psi|
  double energy() const;    // |F|^2 + |d_A Phi|^2
};
Bogomolny bogomolny(const Jet& j);

// Gauge-invariant residual |*F - d_A Phi| at p in the best chart.
double residual_at(const ChartField& field, const Point3& p, double h, int order = 2);

// --- lattices and sampled diagnostics -------------------------------------

struct Lattice {
  double R_trunc = 8.0;   // planar half-width
  double h_z = 0.5;       // planar spacing
  int n_t = 16;           // circle divisions
  Vec3 offset{0.1234, 0.0711, 0.0517};  // stagger (x, y, t)

  int nx() const { return 2 * static_cast<int>(std::floor(R_trunc / h_z)) + 1; }
  Point3 node(int i, int j, int k) const;
  std::vector<Point3> nodes() const;
  // Throws if a node lies within h_z/2 of a singular point or centre.
  void validate(const std::vector<Point3>& singular) const;
};

struct ResidualReport {
  std::vector<Point3> nodes;
  std::vector<double> value;  // NaN for excluded nodes
  std::vector<int> chart;
  int excluded = 0;
  double max = 0;
};
// Nodes whose best chart margin is below min_margin are excluded and counted.
ResidualReport residual(const ChartField& field, const std::vector<Point3>& nodes, double h = 1e-3, int order = 2,
                        double min_margin = 2e-3);
ResidualReport residual(const ChartField& field, const Lattice& lat, double h = 1e-3, int order = 2,
                        double min_margin = 2e-3);

// |F|^2 + |d_A Phi|^2 at each point.
std::vector<double> energy_density(const ChartField& field, const std::vector<Point3>& pts, double h = 1e-3,
                                   int order = 2);

// Flux of the diagonal curvature component: e3 in abelian charts, Phi^ in
// charts whose block is "interior".
struct FluxError : std::domain_error {
  using std::domain_error::domain_error;
};
double flux_sphere(const ChartField& field, const Point3& centre, double radius,
                   const std::vector<Point3>& singular, double h = 1e-4, int polar = 20, int azimuthal = 40);
double flux_torus(const ChartField& field, double R, const std::vector<Point3>& singular, double h = 1e-4,
                  int azimuthal = 64, int nt = 32);

// --- weights ---------------------------------------------------------------

enum class WeightMode { HighMass, LargeDistance };

// Weight functions for the triple-weighted spaces L^2_{delta+m}: semi-norms
// ||omega^{delta-m-1} u|| on U_sigma, ||rho^_i^{-delta-m-3/2} u|| on B_{2 sigma}(p_i),
// ||w_j^{delta-m-3/2} u|| on B_1(q_j); the norm is their maximum.
class WeightSpec {
 public:
  WeightSpec(WeightMode mode, double delta, const BackgroundData& bg, std::vector<double> lambda,
             double sigma = 0.5, double softmin_power = 8.0);

  WeightMode mode() const { return mode_; }
  double delta() const { return delta_; }
  double sigma() const { return sigma_; }
  double d() const { return d_; }

  double w(int j, double rho) const;      // sqrt(lambda^-2 + rho^2) inside 1/2, 1 beyond 1
  double rho_hat(double rho) const;       // rho on B_sigma, 1 beyond 2 sigma
  double omega(const Point3& p) const;
  Vec3 grad_omega(const Point3& p) const;
  double laplacian_omega(const Point3& p) const;  // analyst's sum of second derivatives
  double r_tilde(std::complex<double> zeta) const;  // soft minimum of distances to z_j / d

  // Voronoi cells about z_0 = 0, z_1..z_k (LargeDistance); chi_j sums to 1.
  const std::vector<std::complex<double>>& cell_centres() const { return cells_; }
  double partition(int j, const Point3& p) const;

  struct Region {
    enum Kind { Exterior, Singular, Centre } kind;
    int index;
  };
  // Regions whose semi-norm sees p, with the weight for L^2_{delta+m}.
  void weights(const Point3& p, int m, std::vector<std::pair<Region, double>>& out) const;

 private:
  WeightMode mode_;
  double delta_, sigma_, power_, d_ = 1.0;
  BackgroundData bg_;
  std::vector<double> lambda_;
  std::vector<std::complex<double>> cells_;
};

// One quadrature sample of a field: squared pointwise norms of u, grad_A u, [Phi, u].
struct WeightedSample {
  Point3 p;
  double vol = 0;
  double u2 = 0, grad2 = 0, bracket2 = 0;
};
// L^2_{delta+m} norm (max of the semi-norms).
double weighted_norm(const std::vector<WeightedSample>& s, const WeightSpec& spec, int m);
// W^{1,2}_{delta+m}: per region (|u|^2_{delta+m} + |grad u|^2_{delta+m-1} + |[Phi,u]|^2_{delta+m-1})^{1/2}, then max.
double weighted_sobolev_norm(const std::vector<WeightedSample>& s, const WeightSpec& spec, int m);

// --- large-distance W space ------------------------------------------------

// v_j = -(1/4 pi^2) psi_j log|z - z_j| with psi_j switching on over 1 <= |z - z_j| <= 2.
struct LogProfile {
  std::complex<double> centre;
  double value(const Point3& p) const;
  Vec3 grad(const Point3& p) const;
  double laplacian(const Point3& p) const;  // -(d_x^2 + d_y^2) v, the positive Laplacian
};

struct UnbalancedSource : std::domain_error {
  UnbalancedSource() : std::domain_error("unbalanced source") {}
};
// f given by samples of its diagonal real 1-form components. Returns
// alpha[j][h] = int chi_j f_h; throws UnbalancedSource if |int f_h| > tol.
struct DiagonalSample {
  Point3 p;
  double vol = 0;
  Vec3 f{};
};
std::vector<std::array<double, 3>> alpha_map(const std::vector<DiagonalSample>& f, const WeightSpec& spec,
                                             double tol = 1e-3);

}  // namespace forge
