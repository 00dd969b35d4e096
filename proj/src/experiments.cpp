#include "forge/experiments.hpp"

#include <algorithm>
#include <numeric>

#include "forge/parallel.hpp"

namespace forge {

namespace {

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> N;
  Vec3 v{N(rng), N(rng), N(rng)};
  return v / norm(v);
}

std::vector<Point3> singular_points(const BackgroundData& bg) {
  std::vector<Point3> s = bg.q;
  s.insert(s.end(), bg.p.begin(), bg.p.end());
  return s;
}

double min_distance_to(const std::vector<Point3>& s, const Point3& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& x : s) d = std::min(d, distance(x, p));
  return d;
}

}  // namespace

// --- Green's function ----------------------------------------------------------

double greens_branch_agreement(const GreensFunction& G, Rng& rng, int random_points) {
  double worst = 0;
  for (int i = 0; i <= 20; ++i)
    for (int m = 0; m < 16; ++m) {
      double r = 1.0 + 0.1 * i, t = kTwoPi * m / 16;
      worst = std::max(worst, std::abs(G.far(r, t) - G.near(r, t)));
    }
  std::uniform_real_distribution<double> R(1.0, 3.0), T(0.0, kTwoPi);
  for (int i = 0; i < random_points; ++i) {
    double r = R(rng), t = T(rng);
    worst = std::max(worst, std::abs(G.far(r, t) - G.near(r, t)));
  }
  return worst;
}

PoleLimit greens_pole_limit(const GreensFunction& G, const Vec3& direction) {
  PoleLimit p;
  Vec3 u = direction / norm(direction);
  p.f1 = p.rho1 * G(p.rho1 * u);
  p.f2 = p.rho2 * G(p.rho2 * u);
  p.extrapolated = (p.rho1 * p.f2 - p.rho2 * p.f1) / (p.rho1 - p.rho2);
  return p;
}

FarDecay greens_far_decay(const GreensFunction& G, int nt) {
  FarDecay f;
  for (int i = 0; i < 3; ++i) {
    double r = f.r[i], dev = 0;
    for (int m = 0; m < nt; ++m) dev = std::max(dev, std::abs(G(Vec3{r, 0, kTwoPi * m / nt}) - std::log(r) / kTwoPi));
    f.deviation[i] = dev;
  }
  for (int i = 0; i < 2; ++i) f.factor[i] = f.deviation[i] / f.deviation[i + 1];
  f.rate_per_unit = std::log(f.deviation[0] / f.deviation[2]) / (f.r[2] - f.r[0]);
  return f;
}

double greens_near_constant(const GreensFunction& G, const std::vector<double>& radii, Rng& rng, int dirs) {
  double worst = 0, a0 = G.a0();
  for (double rho : radii)
    for (int i = 0; i < dirs; ++i) {
      Vec3 u = random_unit(rng);
      worst = std::max(worst, std::abs(G(rho * u) - a0 / 2 + 1 / (2 * rho)) / (rho * rho));
    }
  return worst;
}

// --- exact-solution residuals ----------------------------------------------------

std::vector<OrderSample> residual_order(const ChartField& field, const std::vector<Point3>& pts) {
  std::vector<OrderSample> out;
  for (const auto& p : pts) {
    OrderSample s;
    s.p = p;
    int c = field.best_chart(p);
    if (c < 0) throw ChartError("point not covered by any chart");
    for (int i = 0; i < 3; ++i) s.residual[i] = bogomolny(fd_jet(field, c, p, s.h[i], 2)).residual();
    s.order = std::log2(s.residual[1] / s.residual[2]);
    out.push_back(s);
  }
  return out;
}

ChartField local_chart_field(std::string name, LocalField f) {
  ChartField cf;
  Chart c;
  c.name = std::move(name);
  c.block = "interior";
  c.margin = [](const Point3&) { return 1e9; };
  c.eval = [f = std::move(f)](const Point3& anchor, const Vec3& off) {
    return f(Vec3{anchor.x + off.x, anchor.y + off.y, wrap_signed(anchor.t) + off.z});
  };
  cf.add(std::move(c));
  return cf;
}

std::vector<Point3> sample_regular_points(const BackgroundData& bg, int count, double min_dist, double max_dist,
                                          Rng& rng) {
  auto sing = singular_points(bg);
  std::uniform_int_distribution<int> J(0, bg.k() - 1);
  std::uniform_real_distribution<double> R(min_dist, max_dist);
  std::vector<Point3> pts;
  while (static_cast<int>(pts.size()) < count) {
    const Point3& q = bg.q[J(rng)];
    Vec3 u = random_unit(rng);
    double r = R(rng);
    Point3 p = q.shifted(r * u);
    if (min_distance_to(sing, p) >= min_dist) pts.push_back(p);
  }
  return pts;
}

std::vector<FluxRow> flux_table(const ChartField& field, const BackgroundData& bg, double R_big) {
  auto sing = singular_points(bg);
  std::vector<FluxRow> rows;
  for (int j = 0; j < bg.k(); ++j)
    rows.push_back({"q" + std::to_string(j), flux_sphere(field, bg.q[j], 0.5, sing), 4 * kPi});
  for (int i = 0; i < bg.n(); ++i)
    rows.push_back({"p" + std::to_string(i), flux_sphere(field, bg.p[i], 0.5, sing), -2 * kPi});
  rows.push_back({"torus", flux_torus(field, R_big, sing), kTwoPi * bg.charge_at_infinity()});
  return rows;
}

// --- pregluing -----------------------------------------------------------------------

BackgroundData with_min_mass(const GreensFunction& G, BackgroundData bg, double lambda) {
  bg.v = 0;
  auto lm = local_masses(G, bg);
  bg.v = lambda - *std::min_element(lm.lambda.begin(), lm.lambda.end());
  return bg;
}

PregluingEstimates pregluing_estimates(const Pregluing& c, Rng& rng) {
  const auto& bg = c.background();
  const auto& gd = c.gluing();
  std::uniform_real_distribution<double> U(-1, 1);
  PregluingEstimates e;
  e.phi_min = std::numeric_limits<double>::infinity();
  for (int j = 0; j < gd.k(); ++j) {
    double d = gd.delta[j], N = gd.N, lam = gd.lambda[j];
    double lo = std::log(d / (8 * N)), hi = std::log(0.95);
    for (int i = 0; i <= 40; ++i) {
      double r = std::exp(lo + i * (hi - lo) / 40);
      bool on_annulus = (r > d / (2 * N) && r < d / N) || (r > N * d && r < 2 * N * d);
      for (int s = 0; s < 12; ++s) {
        Vec3 X{U(rng), U(rng), U(rng)};
        X = r * X / norm(X);
        auto es = error_at(c, bg.q[j].shifted(X), 1e-4 * std::min(r, 1.0 / lam), 4);
        if (!on_annulus) e.off_support = std::max(e.off_support, es.norm_psi);
        e.diff = std::max(e.diff, es.norm_diff);
        e.r2_zeta = std::max(e.r2_zeta, r * r * es.norm_zeta);
        e.curvature = std::max(e.curvature, (1 / (lam * lam) + r * r) * es.dphi);
        ++e.samples;
      }
    }
  }
  double box = 10;
  for (const auto& q : bg.q) box = std::max(box, std::abs(q.z()) + 10);
  for (int s = 0; s < 400; ++s) {
    Point3 p(box * U(rng), box * U(rng), kPi * U(rng));
    bool ok = true;
    for (const auto& q : bg.q) ok = ok && distance(q, p) >= 1.0;
    for (const auto& pp : bg.p) ok = ok && distance(pp, p) >= 0.5;
    if (!ok) continue;
    e.phi_min = std::min(e.phi_min, norm(c.field().eval(p).psi));
    ++e.samples;
  }
  return e;
}

// --- solver -------------------------------------------------------------------------------

double stretch_for_spacing(int n, double half_width, double h) {
  double ds = 2.0 / (n - 1);
  if (h >= half_width * ds) return 0.0;
  // spacing of the pair of nodes next to s = 0 (straddling it when n is even)
  double s0 = -1.0 + ds * ((n - 1) / 2);
  auto central = [&](double st) {
    return half_width * (std::sinh(st * (s0 + ds)) - std::sinh(st * s0)) / std::sinh(st);
  };
  double a = 1e-9, b = 50;
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (a + b);
    (central(m) > h ? a : b) = m;
  }
  return 0.5 * (a + b);
}

DeformSetup scaled_setup(DeformSetup base, double lambda_ref, double lambda) {
  double ds = 2.0 / (base.points - 1);
  double h = base.stretch == 0 ? base.half_width * ds
                               : base.half_width * std::sinh(base.stretch * ds) / std::sinh(base.stretch);
  base.stretch = stretch_for_spacing(base.points, base.half_width, h * lambda_ref / lambda);
  return base;
}

CentreDeform deform_centre(const Pregluing& c, int j, const DeformSetup& s, Rng& rng) {
  const auto& bg = c.background();
  CentreDeform out;
  auto g = std::make_shared<Grid>(bg.q[j], make_axis(s.points, s.half_width, s.stretch),
                                  make_axis(s.points, s.half_width, s.stretch),
                                  make_axis(s.points, s.half_width, s.stretch));
  out.grid = g;
  auto B = sample_background(g, [&](const Vec3& o) { return c.hedgehog(j, o); }, s.fd_h);
  LinearOperator L(B);
  Projection P = make_projection(L, c);
  out.gram = P.gram();

  std::normal_distribution<double> N;
  Vector u(12 * g->interior()), f(9 * g->interior());
  for (auto& x : u) x = N(rng);
  for (auto& x : f) x = N(rng);
  out.adjointness = std::abs(L.inner(L.d2(u), f) - L.inner(u, L.d2star(f))) / (L.norm(u) * L.norm(f));

  out.psi = pack_one_form(*g, B.psi);
  WeightSpec ws(s.mode, s.delta, bg, c.gluing().lambda, s.sigma);
  auto nrm = [&](const Vector& v) { return grid_weighted_norm(*g, v, 9, ws, -2); };
  out.psi_norm = nrm(out.psi);
  out.projected_norm = nrm(P.apply(out.psi));
  out.report = deform(L, P, out.psi, nrm, s.options);
  auto pc = P.pairings(out.report.full_residual - out.psi);
  out.obstruction = Vec3{pc[0], pc[1], pc[2]} / (4 * kPi);
  return out;
}

Vec3 deformation_h(const std::vector<CentreDeform>& runs) {
  Vec3 h{};
  for (const auto& r : runs) h += r.obstruction;
  return h;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

ScalingScan projected_error_scan(const GreensFunction& G, const BackgroundData& bg, const GluingData& like,
                                 const std::vector<double>& lambdas, double delta, double sigma) {
  ScalingScan s;
  auto Gp = std::make_shared<GreensFunction>(G.params());
  for (double lam : lambdas) {
    auto b = with_min_mass(G, bg, lam);
    auto gd = make_gluing_data(local_masses(G, b), like.x0, like.tau, like.N, like.kappa, true);
    Pregluing c(Gp, b, gd);
    WeightSpec ws(WeightMode::HighMass, delta, b, gd.lambda, sigma);
    s.lambda.push_back(lam);
    s.norm.push_back(projected_error_norm(c, ws, -2).norm);
  }
  s.slope = loglog_slope(s.lambda, s.norm);
  return s;
}

DKernel ps_dkernel(int n, double L) {
  PSMonopole m;
  auto g = std::make_shared<Grid>(Point3(0, 0, 0), make_axis(n, L), make_axis(n, L), make_axis(n, L));
  auto bg = sample_background(g, [&](const Vec3& o) { return ps_eval(m, o); });
  LinearOperator Lop(bg);
  DKernel out;
  out.h = 2 * L / (n - 1);
  std::array<std::vector<MixedForm>, 4> k;
  for (auto& v : k) v.resize(g->nodes());
  parallel_for(g->nodes(), [&](int node) {
    Jet j = fd_jet([&](const Vec3& o) { return ps_eval(m, g->offset(node) + o); }, 1e-4, 4);
    Bogomolny B = bogomolny(j);
    MixedForm u;
    for (int i = 0; i < 3; ++i) u.a[i] = B.dAPhi[i];
    k[0][node] = u;
    for (int h = 1; h <= 3; ++h) k[h][node] = quaternion(h, u);
  });
  std::array<Vector, 4> interior;
  for (int q = 0; q < 4; ++q) {
    Vector all = pack_mixed_all(k[q]);
    Vector Dv = Lop.D_all(all);
    Vector vi(12 * g->interior());
    for (int i = 0; i < g->interior(); ++i) vi.segment(12 * i, 12) = all.segment(12 * g->interior_nodes()[i], 12);
    out.ratio[q] = Lop.norm(Dv) / Lop.norm(vi);
    interior[q] = vi;
  }
  Eigen::Matrix4d gram;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) gram(a, b) = Lop.inner(interior[a], interior[b]);
  Eigen::Vector4d dinv = gram.diagonal().cwiseSqrt().cwiseInverse();
  gram = dinv.asDiagonal() * gram * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(gram);
  for (int i = 0; i < 4; ++i) out.gram_eigen[i] = es.eigenvalues()[i];
  return out;
}

namespace {

// Smooth compactly supported 1-form with random coefficients.
Vector bump_one_form(const Grid& g, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> N;
  double c[9];
  for (auto& x : c) x = N(rng);
  Vec3 ctr{0.3 * N(rng), 0.3 * N(rng), 0.3 * N(rng)};
  std::vector<std::array<Ad, 3>> f(g.nodes());
  for (int n = 0; n < g.nodes(); ++n) {
    Vec3 X = g.offset(n) - ctr;
    double r2 = norm2(X);
    double b = std::exp(-3 * r2) * (1 - cutoff(r2 / 2 + 1));
    for (int k = 0; k < 3; ++k)
      for (int s = 0; s < 3; ++s) f[n][k][s] = b * c[3 * k + s] * (1 + 0.3 * X[k]);
  }
  return pack_one_form(g, f);
}

}  // namespace

WeitzenboeckCheck weitzenboeck_check(int n, double L, double perturb, std::uint64_t seed) {
  PSMonopole m;
  auto g = std::make_shared<Grid>(Point3(0, 0, 0), make_axis(n, L), make_axis(n, L), make_axis(n, L));
  LocalField lf = [&](const Vec3& o) {
    auto v = ps_eval(m, o);
    v.psi *= 1 + perturb;
    return v;
  };
  LinearOperator Lop(sample_background(g, lf, 1e-4));
  Vector f = bump_one_form(*g, seed);
  Vector lhs = Lop.normal(f);
  Vector fm = Vector::Zero(12 * g->interior());
  for (int i = 0; i < g->interior(); ++i) fm.segment(12 * i, 9) = f.segment(9 * i, 9);
  Vector gg = Lop.gradstar(Lop.grad(fm));
  Vector rough(9 * g->interior());
  for (int i = 0; i < g->interior(); ++i) rough.segment(9 * i, 9) = gg.segment(12 * i, 9);
  Vector rhs = rough - Lop.ad_phi_squared(f) + Lop.psi_wedge(f);
  return {2 * L / (n - 1), Lop.norm(lhs - rhs) / Lop.norm(lhs)};
}

CGDirect cg_vs_direct(int nx, int ny, int nt, double L, std::uint64_t seed) {
  PSMonopole m;
  auto g = std::make_shared<Grid>(Point3(0, 0, 0), make_axis(nx, L), make_axis(ny, L), make_axis(nt, L));
  LinearOperator Lop(sample_background(g, [&](const Vec3& o) { return ps_eval(m, o); }, 1e-4));
  Vector f = bump_one_form(*g, seed);
  LinearSolveOptions o;
  o.tol = 1e-12;
  auto s = solve_linear(Lop, f, o);
  Vector d = direct_solve(Lop, f);
  return {s.cg.iterations, (s.u - d).norm() / d.norm()};
}

double manufactured_recovery(const Pregluing& c, const DeformSetup& s, Rng& rng) {
  const auto& bg = c.background();
  auto g = std::make_shared<Grid>(bg.q[0], make_axis(s.points, s.half_width, s.stretch),
                                  make_axis(s.points, s.half_width, s.stretch),
                                  make_axis(s.points, s.half_width, s.stretch));
  auto B = sample_background(g, [&](const Vec3& o) { return c.hedgehog(0, o); }, s.fd_h);
  LinearOperator L(B);
  Projection P = make_projection(L, c);
  WeightSpec ws(s.mode, s.delta, bg, c.gluing().lambda, s.sigma);
  std::normal_distribution<double> N;
  auto bump = [&](Vec3 c0, double r0) {
    Vector u = Vector::Zero(9 * g->interior());
    double cf[9];
    for (double& x : cf) x = N(rng);
    for (int i = 0; i < g->interior(); ++i) {
      double b = cutoff(norm(g->offset(g->interior_nodes()[i]) - c0) / r0);
      for (int k = 0; k < 9; ++k) u[9 * i + k] = cf[k] * b;
    }
    return u;
  };
  // u* = u0 + sum c_h b_h with the c_h chosen so that d2 d2^* u* has no obstruction component.
  Vector u0 = bump(Vec3{0.1, 0.05, -0.1}, 0.2);
  std::array<Vector, 3> bh = {bump(Vec3{-0.3, 0.2, 0.1}, 0.15), bump(Vec3{0.2, -0.3, 0.2}, 0.15),
                              bump(Vec3{0, 0.3, -0.3}, 0.15)};
  Eigen::Matrix3d A;
  Eigen::Vector3d rhs;
  auto p0 = P.pairings(L.normal(u0));
  for (int h = 0; h < 3; ++h) {
    auto ph = P.pairings(L.normal(bh[h]));
    for (int l = 0; l < 3; ++l) A(l, h) = ph[l];
    rhs[h] = -p0[h];
  }
  Eigen::Vector3d cc = A.lu().solve(rhs);
  Vector us = u0;
  for (int h = 0; h < 3; ++h) us += cc[h] * bh[h];
  Vector f = P.apply(L.normal(us));
  LinearSolveOptions o = s.options.linear;
  o.tol = 1e-10;
  auto sol = solve_linear(L, f, o, &P);
  Vector xs = L.d2star(us);
  return grid_weighted_norm(*g, sol.xi - xs, 12, ws, -1) / grid_weighted_norm(*g, xs, 12, ws, -1);
}

// --- large distance ---------------------------------------------------------------------

WManufactured w_manufactured(const BackgroundData& bg, const std::vector<double>& lambda, double delta,
                             double spacing, double margin, int nt, Rng& rng) {
  WeightSpec ws(WeightMode::LargeDistance, delta, bg, lambda);
  double R = 0;
  for (const auto& q : bg.q) R = std::max(R, std::abs(q.z()));
  for (const auto& p : bg.p) R = std::max(R, std::abs(p.z()));
  double L = R + margin;
  int n = static_cast<int>(2 * L / spacing) + 1;
  auto g = std::make_shared<Grid>(Point3(0, 0, 0), make_axis(n, L), make_axis(n, L), make_periodic_axis(nt));
  WBlockSolver W(g, ws);
  const int cells = static_cast<int>(ws.cell_centres().size());

  std::normal_distribution<double> N;
  auto zc = ws.cell_centres()[std::min(1, cells - 1)];
  std::complex<double> c0 = std::abs(zc) > 0 ? zc + 3.0 * zc / std::abs(zc) : zc + 3.0;
  double cf[3] = {N(rng), N(rng), N(rng)};
  Vector us = Vector::Zero(3 * g->interior());
  for (int i = 0; i < g->interior(); ++i) {
    Point3 p = g->point(g->interior_nodes()[i]);
    double b = cutoff(std::abs(p.z() - c0)) * (1 + 0.3 * std::cos(p.t));
    for (int h = 0; h < 3; ++h) us[3 * i + h] = cf[h] * b;
  }
  // beta* with zero total per component, so the source is balanced.
  std::vector<std::array<double, 3>> bs(cells);
  for (int h = 0; h < 3; ++h) {
    double s = 0;
    for (int j = 0; j + 1 < cells; ++j) {
      bs[j][h] = N(rng);
      s += bs[j][h];
    }
    bs[cells - 1][h] = -s;
  }
  Vector f = W.normal(us), xs = W.d2star(us);
  for (int j = 0; j < cells; ++j)
    for (int h = 0; h < 3; ++h) {
      f += bs[j][h] * W.column(j, h);
      xs += bs[j][h] * W.profile_xi(j, h);
    }
  auto sol = W.solve(f);
  WManufactured out;
  out.rel_error = grid_weighted_norm(*g, sol.xi - xs, 4, ws, -1) / grid_weighted_norm(*g, xs, 4, ws, -1);
  for (int j = 0; j < cells; ++j)
    for (int h = 0; h < 3; ++h) out.beta_error = std::max(out.beta_error, std::abs(sol.beta[j][h] - bs[j][h]));
  out.iterations = sol.cg.iterations;
  return out;
}

MassSlope mass_slope(const GreensFunction& G, const BackgroundData& bg, const std::vector<double>& factors) {
  MassSlope s;
  std::vector<double> logd;
  for (double f : factors) {
    BackgroundData b = bg;
    for (auto& q : b.q) q = Point3(f * q.x, f * q.y, q.t);
    for (auto& p : b.p) p = Point3(f * p.x, f * p.y, p.t);
    auto lm = local_masses(G, b);
    s.d.push_back(lm.d);
    s.lambda.push_back(std::accumulate(lm.lambda_direct.begin(), lm.lambda_direct.end(), 0.0) / b.k());
    logd.push_back(std::log(lm.d));
    s.predicted = lm.predicted_slope;
  }
  double mx = std::accumulate(logd.begin(), logd.end(), 0.0) / logd.size();
  double my = std::accumulate(s.lambda.begin(), s.lambda.end(), 0.0) / s.lambda.size();
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < logd.size(); ++i) {
    sxy += (logd[i] - mx) * (s.lambda[i] - my);
    sxx += (logd[i] - mx) * (logd[i] - mx);
  }
  s.slope = sxy / sxx;
  return s;
}

}  // namespace forge
