#include <fstream>
#include <iomanip>
#include <ostream>

#include "forge/cli.hpp"
#include "forge/experiments.hpp"

namespace forge {

namespace {

namespace fs = std::filesystem;

// Pinned acceptance tolerances.
constexpr double kBranchTol = 1e-10;
constexpr double kPoleTol = 1e-4;
constexpr double kDecayFactor = 6.6858944422792685;  // e^1.9
constexpr double kA0Tol = 1e-8;
constexpr double kResidualTol = 1e-6;
constexpr double kMinOrder = 1.9;
constexpr double kFluxRel = 5e-3;
constexpr double kOffSupport = 1e-6;
constexpr double kPairingTol = 1e-3;
constexpr double kAdjointTol = 1e-8;
constexpr double kRecoveryTol = 1e-4;
constexpr double kSlopeRel = 0.2;
constexpr double kMassSlopeRel = 0.05;
constexpr double kExponentLo = -1.8, kExponentHi = -1.2;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Context {
  RunConfig cfg;
  RunOptions opt;
  fs::path dir;
  std::ostream& out;
  std::shared_ptr<GreensFunction> G = std::make_shared<GreensFunction>();
  Rng rng;
  std::vector<Row> rows;

  Context(RunConfig c, RunOptions o, fs::path d, std::ostream& os)
      : cfg(std::move(c)), opt(std::move(o)), dir(std::move(d)), out(os), rng(opt.seed) {}

  void check(std::string module, std::string op, int criterion, std::string region, std::string quantity,
             double value, double lower, double upper) {
    rows.push_back(forge::check(std::move(module), std::move(op), criterion, std::move(region), std::move(quantity),
                                value, lower, upper, opt.tol_scale));
  }
  void info(std::string module, std::string op, int criterion, std::string region, std::string quantity,
            double value) {
    rows.push_back(forge::info(std::move(module), std::move(op), criterion, std::move(region), std::move(quantity),
                               value));
  }
};

// Failure diagnostics carry a residual or step history.
struct NumericalFailure {
  std::string what;
  std::vector<double> history;
};

BackgroundData background_of(const RunConfig& c) {
  BackgroundData bg;
  bg.v = c.background.v;
  bg.b = c.background.b;
  for (const auto& p : c.background.p) bg.p.emplace_back(p.x, p.y, p.z);
  for (const auto& q : c.background.q) bg.q.emplace_back(q.x, q.y, q.z);
  return bg;
}

GluingData gluing_of(const RunConfig& c, const LocalMasses& lm, std::vector<Vec3> x0) {
  return make_gluing_data(lm, std::move(x0), c.gluing.tau, c.gluing.N, c.gluing.kappa,
                          c.gluing.allow_infeasible_neck);
}

GluingData gluing_of(const RunConfig& c, const LocalMasses& lm) { return gluing_of(c, lm, c.gluing.x0); }

WeightMode weight_mode(Mode m) { return m == Mode::HighMass ? WeightMode::HighMass : WeightMode::LargeDistance; }

DeformSetup deform_setup(const RunConfig& c) {
  const auto& n = c.numerics;
  DeformSetup s;
  s.points = n.grid_points;
  s.half_width = n.grid_half_width;
  s.stretch = n.grid_stretch;
  s.mode = weight_mode(n.mode);
  s.delta = n.delta;
  s.sigma = n.sigma;
  s.options.max_iter = n.deform_max_iter;
  s.options.rel_tol = n.deform_rel_tol;
  s.options.threshold = c.calibration.contraction_threshold;
  s.options.linear.tol = n.linear_tol;
  s.options.linear.max_iter = n.linear_max_iter;
  return s;
}

Lattice lattice_of(const RunConfig& c) {
  Lattice lat;
  lat.R_trunc = c.numerics.lattice_half_width;
  lat.h_z = c.numerics.lattice_spacing;
  lat.n_t = c.numerics.lattice_circle;
  lat.offset = c.numerics.lattice_offset;
  return lat;
}

std::vector<Point3> singular_of(const BackgroundData& bg) {
  std::vector<Point3> s = bg.q;
  s.insert(s.end(), bg.p.begin(), bg.p.end());
  return s;
}

// Lattice nodes at least r from every singular point; the rest are NaN in the dump.
std::vector<bool> lattice_mask(const std::vector<Point3>& nodes, const std::vector<Point3>& sing, double r) {
  std::vector<bool> keep(nodes.size(), true);
  for (size_t i = 0; i < nodes.size(); ++i)
    for (const auto& s : sing)
      if (distance(s, nodes[i]) < r) keep[i] = false;
  return keep;
}

double lattice_scan(Context& ctx, const ChartField& field, const BackgroundData& bg, int order,
                    const std::string& dump_name) {
  Lattice lat = lattice_of(ctx.cfg);
  auto sing = singular_of(bg);
  lat.validate(sing);
  auto nodes = lat.nodes();
  auto keep = lattice_mask(nodes, sing, ctx.cfg.numerics.exclusion_radius);
  std::vector<Point3> kept;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (keep[i]) kept.push_back(nodes[i]);
  auto rep = residual(field, kept, 1e-3, order);
  FieldDump d;
  d.nx = d.ny = static_cast<std::uint32_t>(lat.nx());
  d.nt = static_cast<std::uint32_t>(lat.n_t);
  d.ncomp = 1;
  d.data.assign(nodes.size(), kNaN);
  for (size_t i = 0, m = 0; i < nodes.size(); ++i)
    if (keep[i]) d.data[i] = rep.value[m++];
  write_dump(ctx.dir / dump_name, d);
  ctx.info("analysis", "residual", 0, "lattice", "excluded nodes",
           static_cast<double>(nodes.size() - kept.size() + rep.excluded));
  return rep.max;
}

// --- greens-check --------------------------------------------------------------

void greens_check(Context& ctx) {
  const auto& G = *ctx.G;
  double a0 = G.a0(), closed = GreensFunction::a0_closed_form();
  double an = G.a0_extrapolated_near(), af = G.a0_extrapolated_far();
  ctx.info("greens", "a0", 0, "pole", "a0", a0);
  ctx.check("greens", "a0", 0, "pole", "|a0 near extrapolation - closed form|", std::abs(an - closed), kNaN, kA0Tol);
  ctx.check("greens", "a0", 0, "pole", "|a0 far extrapolation - closed form|", std::abs(af - closed), kNaN, kA0Tol);

  double branch = greens_branch_agreement(G, ctx.rng);
  ctx.check("greens", "far/near", 1, "1<=rho<=3", "max |far - near|", branch, kNaN, kBranchTol);
  std::normal_distribution<double> N;
  Vec3 dir{N(ctx.rng), N(ctx.rng), N(ctx.rng)};
  auto pole = greens_pole_limit(G, dir);
  ctx.info("greens", "evaluate", 1, "pole", "rho G at rho=0.01", pole.f1);
  ctx.info("greens", "evaluate", 1, "pole", "rho G at rho=0.001", pole.f2);
  ctx.check("greens", "evaluate", 1, "pole", "|extrapolated rho G + 1/2|", std::abs(pole.extrapolated + 0.5), kNaN,
            kPoleTol);
  auto decay = greens_far_decay(G);
  for (int i = 0; i < 3; ++i)
    ctx.info("greens", "evaluate", 1, "far", "max_t |G - log r/2pi| at r=" + format_double(decay.r[i]),
             decay.deviation[i]);
  for (int i = 0; i < 2; ++i)
    ctx.check("greens", "evaluate", 1, "far",
              "decay factor r=" + format_double(decay.r[i]) + " to " + format_double(decay.r[i + 1]),
              decay.factor[i], kDecayFactor, kNaN);
  ctx.info("greens", "evaluate", 1, "far", "decay rate per unit r", decay.rate_per_unit);
  double c2 = greens_near_constant(G, {0.1, 0.05, 0.02}, ctx.rng);
  ctx.check("greens", "regular", 0, "near", "max |G - a0/2 + 1/(2 rho)| / rho^2", c2, kNaN,
            ctx.cfg.calibration.greens_c2);

  ctx.out << "a0 = " << format_double(a0) << "\n";
  ctx.out << "regime,rho_or_r,bound,observed\n";
  ctx.out << "branch,1..3," << format_double(kBranchTol) << ',' << format_double(branch) << "\n";
  ctx.out << "pole,0," << format_double(kPoleTol) << ',' << format_double(std::abs(pole.extrapolated + 0.5)) << "\n";
  for (double rho : {0.1, 0.05, 0.02}) {
    ctx.out << "near," << format_double(rho) << ',' << format_double(ctx.cfg.calibration.greens_c2 * rho * rho)
            << ',' << format_double(std::abs(G(Vec3{rho, 0, 0}) - a0 / 2 + 1 / (2 * rho))) << "\n";
  }
  for (int i = 0; i < 3; ++i)
    ctx.out << "far," << format_double(decay.r[i]) << ",," << format_double(decay.deviation[i]) << "\n";
}

// --- blocks-check ----------------------------------------------------------------

void blocks_check(Context& ctx) {
  auto bg = background_of(ctx.cfg);
  auto lm = local_masses(*ctx.G, bg);
  for (int j = 0; j < bg.k(); ++j) {
    std::string c = "q" + std::to_string(j);
    ctx.info("blocks", "local_masses", 0, c, "lambda closed form", lm.lambda[j]);
    ctx.info("blocks", "local_masses", 0, c, "lambda direct", lm.lambda_direct[j]);
  }
  if (bg.k() > 1) ctx.info("blocks", "local_masses", 0, "all", "d", lm.d);

  auto cf = build_c_ext(ctx.G, bg);
  double rmax = lattice_scan(ctx, cf, bg, 2, "blocks_residual.mnpl");
  ctx.check("blocks", "c_ext", 2, "rho>=" + format_double(ctx.cfg.numerics.exclusion_radius),
            "max residual h=1e-3", rmax, kNaN, kResidualTol);

  double ex = ctx.cfg.numerics.exclusion_radius;
  auto order_rows = [&](const std::string& block, const std::vector<OrderSample>& s) {
    double mo = std::numeric_limits<double>::infinity(), mr = 0;
    for (const auto& o : s) {
      mo = std::min(mo, o.order);
      mr = std::max(mr, o.residual[2]);
    }
    ctx.check("blocks", block, 2, "regular points", "min measured order", mo, kMinOrder, kNaN);
    ctx.check("blocks", block, 2, "regular points", "max residual h=1e-3", mr, kNaN, kResidualTol);
  };
  order_rows("c_ext", residual_order(cf, sample_regular_points(bg, 10, ex, ex + 1.5, ctx.rng)));
  PSMonopole m;
  auto ps = local_chart_field("ps", [m](const Vec3& x) { return ps_eval(m, x); });
  BackgroundData unit;
  unit.q = {Point3(0, 0, 0)};
  order_rows("ps_monopole", residual_order(ps, sample_regular_points(unit, 10, 0.3, 3.0, ctx.rng)));

  double R = 0;
  for (const auto& q : bg.q) R = std::max(R, std::abs(q.z()));
  for (const auto& p : bg.p) R = std::max(R, std::abs(p.z()));
  for (const auto& f : flux_table(cf, bg, R + 20)) {
    ctx.info("analysis", "flux", 3, f.where, "flux", f.value);
    ctx.check("analysis", "flux", 3, f.where, "relative flux error", f.rel_error(), kNaN, kFluxRel);
  }
}

// --- build -------------------------------------------------------------------------

void build(Context& ctx) {
  auto bg = background_of(ctx.cfg);
  auto lm = local_masses(*ctx.G, bg);
  auto adm = check_admissible(*ctx.G, bg, 0.0, ctx.cfg.numerics.d_min, 1e30);
  ctx.info("blocks", "check_admissible", 0, "all", "distance ok", adm.distance_ok);
  ctx.info("blocks", "check_admissible", 0, "all", "sign ok", adm.sign_ok);
  ctx.info("blocks", "check_admissible", 0, "all", "large distance ok", adm.large_distance_ok);
  ctx.info("blocks", "local_masses", 0, "all", "lambda min", lm.lambda_min);
  ctx.info("blocks", "local_masses", 0, "all", "lambda max", lm.lambda_max);
  auto gd = gluing_of(ctx.cfg, lm);
  Pregluing c(ctx.G, bg, gd);
  for (int j = 0; j < gd.k(); ++j) ctx.info("preglue", "gluing", 0, "q" + std::to_string(j), "delta", gd.delta[j]);
  Vec3 H = balancing_H(gd);
  for (int h = 0; h < 3; ++h) ctx.info("solver", "balancing_H", 0, "all", "H_" + std::to_string(h + 1), H[h]);

  auto P = obstruction_pairing(c);
  for (int h = 0; h < 3; ++h)
    for (int l = 0; l < 3; ++l)
      ctx.check("preglue", "obstruction_pairing", 5, "annuli",
                "|<d2 o_" + std::to_string(h + 1) + ", sigma dx_" + std::to_string(l + 1) + "> - delta|",
                std::abs(P.d2[h][l] - (h == l ? 1.0 : 0.0)), kNaN, kPairingTol);
  ctx.check("preglue", "obstruction_pairing", 5, "annuli", "|<D o_4, sigma> - 1|", std::abs(P.flat_dirac - 1.0),
            kNaN, kPairingTol);

  std::ofstream(ctx.dir / "config.used", std::ios::binary) << serialize_config(ctx.cfg);
}

// --- residual ----------------------------------------------------------------------

void residual_cmd(Context& ctx) {
  auto bg = background_of(ctx.cfg);
  auto lm = local_masses(*ctx.G, bg);
  double lam = *std::min_element(lm.lambda.begin(), lm.lambda.end());

  // Estimates at lambda/4 and lambda.
  std::array<PregluingEstimates, 2> est;
  std::array<double, 2> lams{lam / 4, lam};
  for (int i = 0; i < 2; ++i) {
    auto b = with_min_mass(*ctx.G, bg, lams[i]);
    auto gd = gluing_of(ctx.cfg, local_masses(*ctx.G, b));
    Pregluing c(ctx.G, b, gd);
    est[i] = pregluing_estimates(c, ctx.rng);
    std::string region = "lambda=" + format_double(lams[i]);
    ctx.check("preglue", "error_at", 4, region, "max |Psi| off the annuli", est[i].off_support, kNaN, kOffSupport);
    ctx.info("preglue", "error_at", 4, region, "max |Psi - Psi_zeta|", est[i].diff);
    ctx.info("preglue", "error_at", 4, region, "max rho^2 |Psi_zeta|", est[i].r2_zeta);
    ctx.check("preglue", "error_at", 4, region, "max (lambda^-2 + rho^2) |d_A Phi|", est[i].curvature, kNaN,
              ctx.cfg.calibration.curvature_bound);
    ctx.check("preglue", "field", 4, region, "min |Phi| on U_ext", est[i].phi_min, 0.5, kNaN);
  }
  ctx.check("preglue", "error_at", 4, "lambda/4 to lambda", "max |Psi - Psi_zeta| ratio", est[1].diff / est[0].diff,
            kNaN, 1.0);
  ctx.check("preglue", "error_at", 4, "lambda/4 to lambda", "max rho^2 |Psi_zeta| ratio",
            est[1].r2_zeta / est[0].r2_zeta, 0.375, 0.625);

  auto gd = gluing_of(ctx.cfg, lm);
  Pregluing c(ctx.G, bg, gd);
  double rmax = lattice_scan(ctx, c.field(), bg, 4, "residual_lattice.mnpl");
  ctx.check("preglue", "error_at", 4, "lattice rho>=" + format_double(ctx.cfg.numerics.exclusion_radius),
            "max |Psi| h=1e-3", rmax, kNaN, kOffSupport);

  WeightSpec ws(WeightMode::HighMass, ctx.cfg.numerics.delta, bg, gd.lambda, ctx.cfg.numerics.sigma);
  auto pe = projected_error_norm(c, ws, -2);
  ctx.info("solver", "projected_error_norm", 7, "annuli", "||pi(Psi)|| weighted", pe.norm);
  ctx.info("solver", "projected_error_norm", 7, "inner annulus", "||pi(Psi)|| L2", pe.inner);
  ctx.info("solver", "projected_error_norm", 7, "outer annulus", "||pi(Psi)|| L2", pe.outer);

  auto scan = projected_error_scan(*ctx.G, bg, gd, ctx.cfg.numerics.scan_lambda, ctx.cfg.numerics.delta,
                                   ctx.cfg.numerics.sigma);
  for (size_t i = 0; i < scan.lambda.size(); ++i)
    ctx.info("solver", "projected_error_norm", 7, "lambda=" + format_double(scan.lambda[i]), "||pi(Psi)|| weighted",
             scan.norm[i]);
  double target = -(1 + ctx.cfg.numerics.delta / 2);
  ctx.check("solver", "projected_error_norm", 7, "scan", "log-log slope", scan.slope, target * (1 + kSlopeRel),
            target * (1 - kSlopeRel));
}

// --- deform ------------------------------------------------------------------------

FieldDump grid_dump(const Grid& g, const Vector& v, int ncomp) {
  FieldDump d;
  d.nx = g.axis(0).size();
  d.ny = g.axis(1).size();
  d.nt = g.axis(2).size();
  d.ncomp = ncomp;
  d.data.assign(static_cast<size_t>(g.nodes()) * ncomp, 0.0);
  for (int i = 0; i < g.interior(); ++i)
    for (int c = 0; c < ncomp; ++c) d.data[static_cast<size_t>(g.interior_nodes()[i]) * ncomp + c] = v[ncomp * i + c];
  return d;
}

std::vector<CentreDeform> run_deform(Context& ctx, const Pregluing& c, const DeformSetup& s, bool report) {
  std::vector<CentreDeform> runs;
  for (int j = 0; j < c.gluing().k(); ++j) {
    try {
      runs.push_back(deform_centre(c, j, s, ctx.rng));
    } catch (const ContractionFailure& e) {
      throw NumericalFailure{"contraction failure at centre " + std::to_string(j), e.history};
    } catch (const CGError& e) {
      throw NumericalFailure{"conjugate gradient failure at centre " + std::to_string(j), e.history};
    }
    if (!report) continue;
    const auto& r = runs.back();
    const auto& rep = r.report;
    std::string region = "q" + std::to_string(j);
    ctx.info("solver", "deform", 7, region, "||Psi||", r.psi_norm);
    for (size_t n = 0; n < rep.residual.size(); ++n) {
      std::string it = " it " + std::to_string(n);
      ctx.info("solver", "deform", 7, region, "||pi(Psi)||" + it, rep.residual[n]);
      if (n > 0) {
        ctx.info("solver", "deform", 7, region, "factor" + it, rep.factor[n - 1]);
        ctx.info("solver", "deform", 6, region, "cg iterations" + it, rep.inner_iterations[n - 1]);
      }
    }
    double worst = 0;
    for (double f : rep.factor) worst = std::max(worst, f);
    ctx.check("solver", "deform", 7, region, "decrease factor", rep.residual.front() / rep.residual.back(),
              ctx.cfg.calibration.deform_factor_drop, kNaN);
    ctx.check("solver", "deform", 7, region, "iterations", rep.iterations, kNaN, ctx.cfg.numerics.deform_max_iter);
    ctx.check("solver", "deform", 7, region, "max contraction factor", worst, kNaN, ctx.cfg.calibration.contraction_q);
    ctx.check("solver", "linear_operator", 6, region, "relative adjointness defect", r.adjointness, kNaN,
              kAdjointTol);
    for (int h = 0; h < 3; ++h)
      ctx.info("solver", "deform", 8, region, "deformation obstruction h_" + std::to_string(h + 1), r.obstruction[h]);

    double fmax = 0;
    for (int i = 0; i < rep.full_residual.size(); ++i) fmax = std::max(fmax, std::abs(rep.full_residual[i]));
    ctx.info("solver", "deform", 0, region, "max |full residual component| (dump)", fmax);
    write_dump(ctx.dir / ("deform_xi_" + std::to_string(j) + ".mnpl"), grid_dump(*r.grid, rep.xi, 12));
    write_dump(ctx.dir / ("deform_residual_" + std::to_string(j) + ".mnpl"),
               grid_dump(*r.grid, rep.full_residual, 9));
  }
  return runs;
}

void deform_cmd(Context& ctx) {
  auto bg = background_of(ctx.cfg);
  auto lm = local_masses(*ctx.G, bg);
  auto gd = gluing_of(ctx.cfg, lm);
  Pregluing c(ctx.G, bg, gd);
  run_deform(ctx, c, deform_setup(ctx.cfg), true);

  if (ctx.cfg.numerics.mode == Mode::LargeDistance) {
    const auto& n = ctx.cfg.numerics;
    auto w = w_manufactured(bg, lm.lambda, n.delta, n.planar_spacing, n.planar_margin, n.planar_circle, ctx.rng);
    ctx.check("solver", "w_block", 9, "planar grid", "manufactured relative error", w.rel_error, kNaN, kRecoveryTol);
    ctx.info("solver", "w_block", 9, "planar grid", "max beta error", w.beta_error);
    auto ms = mass_slope(*ctx.G, bg, {1.0, 2.0});
    for (size_t i = 0; i < ms.d.size(); ++i)
      ctx.info("blocks", "local_masses", 9, "d=" + format_double(ms.d[i]), "mean lambda", ms.lambda[i]);
    if (ms.predicted != 0)
      ctx.check("blocks", "local_masses", 9, "d to 2d", "slope / predicted", ms.slope / ms.predicted,
                1 - kMassSlopeRel, 1 + kMassSlopeRel);
    else
      ctx.info("blocks", "local_masses", 9, "d to 2d", "slope (predicted 0)", ms.slope);
  }
}

// --- balance -----------------------------------------------------------------------

void balance_cmd(Context& ctx) {
  auto bg = background_of(ctx.cfg);
  auto lm = local_masses(*ctx.G, bg);
  auto gd0 = gluing_of(ctx.cfg, lm, {});
  ctx.check("solver", "balancing_H", 8, "x0=0", "|H(0, tau)|", norm(balancing_H(gd0)), 0.0, 0.0);

  auto gd = gluing_of(ctx.cfg, lm);
  Vec3 H = balancing_H(gd);
  for (int h = 0; h < 3; ++h) ctx.info("solver", "balancing_H", 8, "config", "H_" + std::to_string(h + 1), H[h]);

  // |h| at lambda and factor * lambda.
  double lam = *std::min_element(lm.lambda.begin(), lm.lambda.end());
  double factor = ctx.cfg.numerics.exponent_lambda_factor;
  DeformSetup base = deform_setup(ctx.cfg);
  std::array<double, 2> hn{};
  for (int i = 0; i < 2; ++i) {
    double l = i == 0 ? lam : lam * factor;
    auto b = with_min_mass(*ctx.G, bg, l);
    Pregluing c(ctx.G, b, gluing_of(ctx.cfg, local_masses(*ctx.G, b)));
    hn[i] = norm(deformation_h(run_deform(ctx, c, scaled_setup(base, lam, l), false)));
    ctx.info("solver", "balance", 8, "lambda=" + format_double(l), "|h|", hn[i]);
  }
  ctx.check("solver", "balance", 8, "lambda scan", "exponent of |h|", std::log(hn[1] / hn[0]) / std::log(factor),
            kExponentLo, kExponentHi);

  // Fixed point from the balanced point x0 + H / sum(1/lambda).
  double S = 0;
  for (double l : gd.lambda) S += 1.0 / l;
  GluingData bal = gd;
  for (auto& x : bal.x0) x += H / S;
  ctx.info("solver", "balance", 8, "config", "|H(x0)| / sum(1/lambda)", norm(H) / S);
  auto h_fn = [&](const std::vector<Vec3>& x) {
    Pregluing c(ctx.G, bg, gluing_of(ctx.cfg, lm, x));
    return deformation_h(run_deform(ctx, c, base, false));
  };
  BalanceReport rep;
  try {
    rep = balance(bal, h_fn, ctx.cfg.numerics.balance_tol, ctx.cfg.numerics.balance_max_iter);
  } catch (const BalanceFailure& e) {
    std::vector<double> hist;
    for (const auto& s : e.history) hist.push_back(s.change);
    throw NumericalFailure{"balancing fixed point failed", hist};
  }
  for (size_t i = 0; i < rep.history.size(); ++i) {
    const auto& s = rep.history[i];
    std::string it = "it " + std::to_string(i + 1);
    for (int h = 0; h < 3; ++h) ctx.info("solver", "balance", 8, it, "zeta_" + std::to_string(h + 1), s.zeta[h]);
    ctx.info("solver", "balance", 8, it, "|h|", norm(s.h));
    ctx.info("solver", "balance", 8, it, "change", s.change);
  }
  ctx.check("solver", "balance", 8, "fixed point", "iterations", static_cast<double>(rep.history.size()), kNaN,
            ctx.cfg.numerics.balance_max_iter);
  ctx.check("solver", "balance", 8, "fixed point", "|zeta| sqrt(lambda)", norm(rep.zeta) * std::sqrt(lam), kNaN,
            ctx.cfg.calibration.zeta_constant);
}

// --- report ------------------------------------------------------------------------

int report(const fs::path& dir, std::ostream& out, std::ostream& err) {
  std::vector<CriterionSummary> s;
  try {
    s = summarize(dir);
  } catch (const NothingToAggregate& e) {
    err << "forge: " << e.what() << "\n";
    return 2;
  }
  std::ofstream f(dir / "summary.csv", std::ios::binary);
  f << "criterion,rows,failed,verdict\n";
  bool ok = true;
  for (const auto& c : s) {
    f << c.criterion << ',' << c.rows << ',' << c.failed << ',' << (c.pass() ? "pass" : "fail") << '\n';
    out << "criterion " << c.criterion << ": " << (c.pass() ? "PASS" : "FAIL") << " (" << c.rows - c.failed << '/'
        << c.rows << " checks)\n";
    ok = ok && c.pass();
  }
  return ok ? 0 : 1;
}

void echo_calibration(Context& ctx) {
  const auto& c = ctx.cfg.calibration;
  ctx.info("cli", "calibration", 10, "config", "curvature_bound", c.curvature_bound);
  ctx.info("cli", "calibration", 10, "config", "contraction_threshold", c.contraction_threshold);
  ctx.info("cli", "calibration", 10, "config", "contraction_q", c.contraction_q);
  ctx.info("cli", "calibration", 10, "config", "deform_factor_drop", c.deform_factor_drop);
  ctx.info("cli", "calibration", 10, "config", "zeta_constant", c.zeta_constant);
  ctx.info("cli", "calibration", 10, "config", "greens_c2", c.greens_c2);
  ctx.info("cli", "run", 0, "config", "seed", static_cast<double>(ctx.opt.seed));
  ctx.info("cli", "run", 0, "config", "tol_scale", ctx.opt.tol_scale);
}

void write_failure(const fs::path& dir, const std::string& command, const std::string& what,
                   const std::vector<double>& history) {
  std::vector<Row> rows;
  rows.push_back(info("cli", command, 0, "failure", what, kNaN));
  for (size_t i = 0; i < history.size(); ++i)
    rows.push_back(info("cli", command, 0, "history", "step " + std::to_string(i), history[i]));
  write_csv(dir / "failure.csv", rows);
}

}  // namespace

int run_command(const std::string& command, const RunOptions& opt, std::ostream& out, std::ostream& err) {
  static const std::vector<std::string> known = {"greens-check", "blocks-check", "build",  "residual",
                                                 "deform",       "balance",      "report"};
  if (std::find(known.begin(), known.end(), command) == known.end()) {
    err << "forge: unknown command '" << command << "'\n";
    return 2;
  }
  RunConfig cfg;
  try {
    if (opt.config) cfg = load_config(*opt.config);
    if (opt.mode) cfg.numerics.mode = *opt.mode;
    validate_config(cfg);
  } catch (const ConfigError& e) {
    err << "forge: " << e.what() << "\n";
    return 2;
  }
  fs::path dir = opt.out ? *opt.out : fs::path(cfg.output_dir);
  if (command == "report") return report(dir, out, err);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    err << "forge: cannot create output directory " << dir << "\n";
    return 2;
  }

  Context ctx(cfg, opt, dir, out);
  echo_calibration(ctx);
  try {
    if (command == "greens-check") greens_check(ctx);
    else if (command == "blocks-check") blocks_check(ctx);
    else if (command == "build") build(ctx);
    else if (command == "residual") residual_cmd(ctx);
    else if (command == "deform") deform_cmd(ctx);
    else if (command == "balance") balance_cmd(ctx);
  } catch (const ConfigError& e) {
    err << "forge: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "forge: invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    write_failure(dir, command, e.what, e.history);
    err << "forge: numerical failure: " << e.what << " (see " << (dir / "failure.csv").string() << ")\n";
    return 3;
  } catch (const std::exception& e) {
    write_failure(dir, command, e.what(), {});
    err << "forge: numerical failure: " << e.what() << " (see " << (dir / "failure.csv").string() << ")\n";
    return 3;
  }

  write_csv(dir / (command + ".csv"), ctx.rows);
  int checks = 0, failed = 0;
  for (const auto& r : ctx.rows) {
    if (r.verdict == Verdict::Info) continue;
    ++checks;
    if (r.verdict == Verdict::Fail) {
      ++failed;
      out << "FAIL [" << r.criterion << "] " << r.module << '.' << r.op << ' ' << r.region << ": " << r.quantity
          << " = " << format_double(r.value) << "\n";
    }
  }
  out << command << ": " << checks - failed << '/' << checks << " checks passed -> "
      << (dir / (command + ".csv")).string() << "\n";
  return failed ? 1 : 0;
}

}  // namespace forge
