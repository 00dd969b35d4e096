// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--verbose] [--only 1,2,...] [--expect-fail 4,8]
//
// Without --expect-fail the exit status is 0 iff every selected criterion
// passes; with it, 0 iff the failing set equals the given set.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "forge/cli.hpp"
#include "forge/experiments.hpp"

using namespace forge;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kSeed = 20240611;

struct Criterion {
  int id = 0;
  std::string title;
  std::vector<Row> rows;

  void check(const std::string& what, double value, double lower, double upper) {
    rows.push_back(forge::check("acceptance", title, id, "", what, value, lower, upper));
  }
  void info(const std::string& what, double value) { rows.push_back(forge::info("acceptance", title, id, "", what, value)); }
  bool pass() const {
    for (const auto& r : rows)
      if (r.verdict == Verdict::Fail) return false;
    return !rows.empty();
  }
};

std::shared_ptr<GreensFunction> greens() {
  static auto G = std::make_shared<GreensFunction>();
  return G;
}

// (k, n) families used by the pregluing estimates and the exact-solution checks.
BackgroundData family(int k, int n) {
  BackgroundData bg;
  bg.v = 1;
  if (k == 1) bg.q = {Point3(0, 0, 0)};
  if (k == 2) bg.q = {Point3(-4, 0, 0.5), Point3(4, 0, -0.5)};
  if (n == 1) bg.p = {Point3(0, 6, 1.0)};
  return bg;
}

std::vector<Vec3> family_x0(int k) {
  if (k == 1) return {Vec3{0.3, 0, 0}};
  return {Vec3{0.3, 0, 0}, Vec3{-0.2, 0.1, 0}};
}

std::vector<double> family_tau(int k) { return k == 1 ? std::vector<double>{0.7} : std::vector<double>{0.7, 0.2}; }

Pregluing pregluing_at(int k, int n, double lambda, const RunConfig& cfg) {
  auto bg = with_min_mass(*greens(), family(k, n), lambda);
  auto gd = make_gluing_data(local_masses(*greens(), bg), family_x0(k), family_tau(k), cfg.gluing.N, cfg.gluing.kappa,
                             cfg.gluing.allow_infeasible_neck);
  return Pregluing(greens(), bg, gd);
}

Pregluing default_pregluing(const RunConfig& cfg) {
  BackgroundData bg;
  bg.v = cfg.background.v;
  for (const auto& q : cfg.background.q) bg.q.emplace_back(q.x, q.y, q.z);
  auto gd = make_gluing_data(local_masses(*greens(), bg), cfg.gluing.x0, cfg.gluing.tau, cfg.gluing.N,
                             cfg.gluing.kappa, cfg.gluing.allow_infeasible_neck);
  return Pregluing(greens(), bg, gd);
}

DeformSetup setup_of(const RunConfig& cfg) {
  DeformSetup s;
  s.points = cfg.numerics.grid_points;
  s.half_width = cfg.numerics.grid_half_width;
  s.stretch = cfg.numerics.grid_stretch;
  s.delta = cfg.numerics.delta;
  s.sigma = cfg.numerics.sigma;
  s.options.max_iter = cfg.numerics.deform_max_iter;
  s.options.rel_tol = cfg.numerics.deform_rel_tol;
  s.options.threshold = cfg.calibration.contraction_threshold;
  s.options.linear.tol = cfg.numerics.linear_tol;
  s.options.linear.max_iter = cfg.numerics.linear_max_iter;
  return s;
}

// --- criteria ------------------------------------------------------------------------

void c1(Criterion& c, Rng& rng) {
  const auto& G = *greens();
  c.check("max |far - near| on 1<=rho<=3", greens_branch_agreement(G, rng), kNaN, 1e-10);
  auto pole = greens_pole_limit(G, Vec3{0.3, -0.5, 0.8});
  c.check("|extrapolated rho G + 1/2|", std::abs(pole.extrapolated + 0.5), kNaN, 1e-4);
  auto far = greens_far_decay(G);
  for (int i = 0; i < 2; ++i)
    c.check("decay factor r=" + format_double(far.r[i]) + " to " + format_double(far.r[i + 1]), far.factor[i],
            std::exp(1.9), kNaN);
  c.info("decay rate per unit r", far.rate_per_unit);
}

void c2(Criterion& c, Rng& rng, const RunConfig& cfg) {
  const double ex = cfg.numerics.exclusion_radius;
  auto bg = family(2, 1);
  auto cext = build_c_ext(greens(), bg);
  double worst_order = 1e9, worst_res = 0;
  for (const auto& s : residual_order(cext, sample_regular_points(bg, 10, ex, ex + 1.5, rng))) {
    worst_order = std::min(worst_order, s.order);
    worst_res = std::max(worst_res, s.residual[2]);
  }
  c.check("c_ext min order", worst_order, 1.9, kNaN);
  c.check("c_ext max residual h=1e-3 at sampled points", worst_res, kNaN, 1e-6);

  Lattice lat;
  lat.R_trunc = cfg.numerics.lattice_half_width;
  lat.h_z = cfg.numerics.lattice_spacing;
  lat.n_t = cfg.numerics.lattice_circle;
  lat.offset = cfg.numerics.lattice_offset;
  std::vector<Point3> sing = bg.q;
  sing.insert(sing.end(), bg.p.begin(), bg.p.end());
  lat.validate(sing);
  std::vector<Point3> kept;
  for (const auto& p : lat.nodes()) {
    bool ok = true;
    for (const auto& s : sing) ok = ok && distance(s, p) >= ex;
    if (ok) kept.push_back(p);
  }
  c.check("c_ext max residual h=1e-3 on the lattice", residual(cext, kept, 1e-3, 2).max, kNaN, 1e-6);

  auto ps = local_chart_field("ps", [](const Vec3& x) { return ps_eval(PSMonopole{}, x); });
  BackgroundData unit;
  unit.q = {Point3(0, 0, 0)};
  worst_order = 1e9;
  worst_res = 0;
  for (const auto& s : residual_order(ps, sample_regular_points(unit, 10, 0.3, 3.0, rng))) {
    worst_order = std::min(worst_order, s.order);
    worst_res = std::max(worst_res, s.residual[2]);
  }
  c.check("PS min order", worst_order, 1.9, kNaN);
  c.info("PS max residual h=1e-3", worst_res);
}

void c3(Criterion& c) {
  for (auto [k, n] : {std::pair{1, 0}, std::pair{2, 0}, std::pair{2, 1}}) {
    auto bg = family(k, n);
    auto cext = build_c_ext(greens(), bg);
    for (const auto& f : flux_table(cext, bg, 30))
      c.check("(" + std::to_string(k) + "," + std::to_string(n) + ") " + f.where + " relative flux error",
              f.rel_error(), kNaN, 5e-3);
  }
}

void c4(Criterion& c, Rng& rng, const RunConfig& cfg) {
  for (auto [k, n] : {std::pair{1, 0}, std::pair{2, 0}, std::pair{2, 1}}) {
    std::string fam = "(" + std::to_string(k) + "," + std::to_string(n) + ") ";
    std::array<PregluingEstimates, 2> e;
    std::array<double, 2> lam{25, 100};
    for (int i = 0; i < 2; ++i) {
      e[i] = pregluing_estimates(pregluing_at(k, n, lam[i], cfg), rng);
      std::string at = fam + "lambda=" + format_double(lam[i]) + " ";
      c.check(at + "off-support max |Psi|", e[i].off_support, kNaN, 1e-6);
      c.check(at + "max (lambda^-2 + rho^2)|d_A Phi|", e[i].curvature, kNaN, cfg.calibration.curvature_bound);
      c.check(at + "min |Phi| on U_ext", e[i].phi_min, 0.5, kNaN);
      c.info(at + "max |Psi - Psi_zeta|", e[i].diff);
    }
    c.check(fam + "max |Psi - Psi_zeta| ratio 100/25", e[1].diff / e[0].diff, kNaN, 1.0);
    c.check(fam + "max rho^2 |Psi_zeta| ratio 100/25", e[1].r2_zeta / e[0].r2_zeta, 0.5 * 0.75, 0.5 * 1.25);
  }
}

void c5(Criterion& c, const RunConfig& cfg) {
  for (int k : {1, 2}) {
    auto p = k == 1 ? obstruction_pairing(default_pregluing(cfg)) : obstruction_pairing(pregluing_at(2, 0, 100, cfg));
    double worst = 0;
    for (int h = 0; h < 3; ++h)
      for (int l = 0; l < 3; ++l) worst = std::max(worst, std::abs(p.d2[h][l] - (h == l ? 1.0 : 0.0)));
    c.check("k=" + std::to_string(k) + " max |<d2 o_h, sigma dx_l> - delta_hl|", worst, kNaN, 1e-3);
    c.check("k=" + std::to_string(k) + " |<D o_4, sigma> - 1|", std::abs(p.flat_dirac - 1), kNaN, 1e-3);
  }
}

void c6(Criterion& c, Rng& rng, const RunConfig& cfg) {
  auto cd = cg_vs_direct(16, 16, 8, 2.0, kSeed);
  c.check("16x16x8 CG vs direct relative difference", cd.rel_diff, kNaN, 1e-6);
  c.info("CG iterations", cd.iterations);

  c.check("manufactured recovery, weighted relative error",
          manufactured_recovery(default_pregluing(cfg), setup_of(cfg), rng), kNaN, 1e-4);

  // adjointness on the unit PS background
  auto g = std::make_shared<Grid>(Point3(0, 0, 0), make_axis(12, 2.0), make_axis(12, 2.0), make_axis(12, 2.0));
  LinearOperator L(sample_background(g, [](const Vec3& o) { return ps_eval(PSMonopole{}, o); }, 1e-4));
  std::normal_distribution<double> N;
  auto rnd = [&](int size) {
    Vector v(size);
    for (int i = 0; i < size; ++i) v[i] = N(rng);
    return v;
  };
  const int m = L.unknowns();
  Vector u = rnd(12 * m), v = rnd(12 * m), f = rnd(9 * m), f2 = rnd(9 * m);
  c.check("|<Du, v> - <u, D*v>| / (|u||v|)", std::abs(L.inner(L.D(u), v) - L.inner(u, L.Dstar(v))) / (L.norm(u) * L.norm(v)),
          kNaN, 1e-8);
  c.check("|<d2u, f> - <u, d2*f>| / (|u||f|)",
          std::abs(L.inner(L.d2(u), f) - L.inner(u, L.d2star(f))) / (L.norm(u) * L.norm(f)), kNaN, 1e-8);
  c.check("|<d2 d2* f, g> - <d2* f, d2* g>| / (|f||g|)",
          std::abs(L.inner(L.normal(f), f2) - L.inner(L.d2star(f), L.d2star(f2))) / (L.norm(f) * L.norm(f2)), kNaN,
          1e-8);

  auto w1 = weitzenboeck_check(9, 1.5, 0.2, kSeed), w2 = weitzenboeck_check(17, 1.5, 0.2, kSeed);
  c.info("Weitzenboeck relative error h=" + format_double(w1.h), w1.rel_error);
  c.info("Weitzenboeck relative error h=" + format_double(w2.h), w2.rel_error);
  c.check("Weitzenboeck FD order", std::log2(w1.rel_error / w2.rel_error), 1.9, kNaN);

  auto dk = ps_dkernel(41, 4.0);
  for (int q = 0; q < 4; ++q) c.check("|D k_" + std::to_string(q) + "| / |k| over 5h^2", dk.ratio[q] / (5 * dk.h * dk.h), kNaN, 1.0);
  double emin = *std::min_element(dk.gram_eigen.begin(), dk.gram_eigen.end());
  c.check("smallest normalised Gram eigenvalue of the kernel vectors", emin, 0.5, kNaN);
}

void c7(Criterion& c, Rng& rng, const RunConfig& cfg) {
  auto p = default_pregluing(cfg);
  auto r = deform_centre(p, 0, setup_of(cfg), rng);
  const auto& rep = r.report;
  double worst = 0;
  for (double f : rep.factor) worst = std::max(worst, f);
  c.check("||pi(Psi)|| decrease factor", rep.residual.front() / rep.residual.back(), 10, kNaN);
  c.check("Picard iterations", rep.iterations, kNaN, 5);
  c.check("max per-iteration contraction factor", worst, kNaN, 0.5);

  auto bg = p.background();
  auto scan = projected_error_scan(*greens(), bg, p.gluing(), cfg.numerics.scan_lambda, cfg.numerics.delta,
                                   cfg.numerics.sigma);
  double target = -(1 + cfg.numerics.delta / 2);
  c.check("log-log slope of initial ||pi(Psi)||", scan.slope, target * 1.2, target * 0.8);
}

void c8(Criterion& c, Rng& rng, const RunConfig& cfg) {
  auto p = default_pregluing(cfg);
  auto gd0 = p.gluing();
  for (auto& x : gd0.x0) x = Vec3{};
  gd0.zeta = centre_of_mass(gd0.x0, gd0.lambda);
  c.check("|H(0, tau)|", norm(balancing_H(gd0)), 0.0, 0.0);

  const double lam = p.gluing().lambda[0], factor = cfg.numerics.exponent_lambda_factor;
  DeformSetup base = setup_of(cfg);
  std::array<double, 2> hn{};
  for (int i = 0; i < 2; ++i) {
    double l = i == 0 ? lam : lam * factor;
    auto bg = with_min_mass(*greens(), p.background(), l);
    auto gd = make_gluing_data(local_masses(*greens(), bg), cfg.gluing.x0, cfg.gluing.tau, cfg.gluing.N,
                               cfg.gluing.kappa, cfg.gluing.allow_infeasible_neck);
    Pregluing pl(greens(), bg, gd);
    hn[i] = norm(deformation_h({deform_centre(pl, 0, scaled_setup(base, lam, l), rng)}));
    c.info("|h| at lambda=" + format_double(l), hn[i]);
  }
  c.check("decay exponent of |h|", std::log(hn[1] / hn[0]) / std::log(factor), -1.8, -1.2);

  Vec3 H = balancing_H(p.gluing());
  double S = 0;
  for (double l : p.gluing().lambda) S += 1 / l;
  GluingData bal = p.gluing();
  for (auto& x : bal.x0) x += H / S;
  auto h_fn = [&](const std::vector<Vec3>& x) {
    auto gd = make_gluing_data(local_masses(*greens(), p.background()), x, cfg.gluing.tau, cfg.gluing.N,
                               cfg.gluing.kappa, cfg.gluing.allow_infeasible_neck);
    return deformation_h({deform_centre(Pregluing(greens(), p.background(), gd), 0, base, rng)});
  };
  try {
    auto rep = balance(bal, h_fn, cfg.numerics.balance_tol, cfg.numerics.balance_max_iter);
    c.check("zeta fixed-point iterations", static_cast<double>(rep.history.size()), kNaN, 10);
    c.check("|zeta| sqrt(lambda) over the calibrated constant", norm(rep.zeta) * std::sqrt(lam) / cfg.calibration.zeta_constant,
            kNaN, 1.0);
  } catch (const BalanceFailure&) {
    c.check("zeta fixed point converged", 0, 1, kNaN);
  }
}

void c9(Criterion& c, Rng& rng, const RunConfig& cfg) {
  BackgroundData bg;
  bg.v = 1;
  double R = 20 / std::sqrt(3.0);
  for (int j = 0; j < 3; ++j) bg.q.push_back(Point3(std::polar(R, kTwoPi * j / 3 + 0.2), 0.0));
  auto ms = mass_slope(*greens(), bg, {1.0, 2.0});
  c.check("slope of lambda_j vs log d over 2/pi", ms.slope / (2 / kPi), 0.95, 1.05);
  for (double scale : {1.0, 2.0}) {
    BackgroundData b = bg;
    for (auto& q : b.q) q = Point3(q.z() * scale, q.t);
    auto lm = local_masses(*greens(), b);
    auto w = w_manufactured(b, lm.lambda, cfg.numerics.delta, cfg.numerics.planar_spacing, cfg.numerics.planar_margin,
                            cfg.numerics.planar_circle, rng);
    c.check("d=" + format_double(20 * scale) + " W-block manufactured relative error", w.rel_error, kNaN, 1e-4);
    c.info("d=" + format_double(20 * scale) + " max beta error", w.beta_error);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_exe(const std::string& args, const fs::path& log) {
  std::string cmd = std::string(FORGE_EXE) + " " + args + " > " + log.string() + " 2>&1";
  int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void c10(Criterion& c) {
  fs::path root = fs::temp_directory_path() / "forge_acceptance_c10";
  fs::remove_all(root);
  fs::create_directories(root);
  RunConfig cfg;
  cfg.numerics.grid_points = 18;
  cfg.calibration.zeta_constant = 2.5;
  cfg.calibration.curvature_bound = 1.75;
  fs::path cfg_path = root / "small.cfg";
  std::ofstream(cfg_path, std::ios::binary) << serialize_config(cfg);

  std::array<fs::path, 2> dirs{root / "run1", root / "run2"};
  for (const auto& d : dirs)
    for (const char* cmd : {"greens-check", "deform"}) {
      int st = run_exe(std::string(cmd) + " --config " + cfg_path.string() + " --out " + d.string(), root / "log.txt");
      c.check(std::string(cmd) + " exit status", st, 0, 1);
    }
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dirs[0])) names.insert(e.path().filename().string());
  std::set<std::string> names2;
  for (const auto& e : fs::directory_iterator(dirs[1])) names2.insert(e.path().filename().string());
  c.check("same artifact set", names == names2 ? 1 : 0, 1, 1);
  c.info("artifacts compared", static_cast<double>(names.size()));
  int differ = 0;
  for (const auto& n : names)
    if (slurp(dirs[0] / n) != slurp(dirs[1] / n)) ++differ;
  c.check("artifacts that differ between runs", differ, 0, 0);

  const std::map<std::string, double> expected = {
      {"curvature_bound", cfg.calibration.curvature_bound},
      {"contraction_threshold", cfg.calibration.contraction_threshold},
      {"contraction_q", cfg.calibration.contraction_q},
      {"deform_factor_drop", cfg.calibration.deform_factor_drop},
      {"zeta_constant", cfg.calibration.zeta_constant},
      {"greens_c2", cfg.calibration.greens_c2}};
  for (const char* file : {"greens-check.csv", "deform.csv"}) {
    std::map<std::string, double> echoed;
    for (const auto& r : read_csv(dirs[0] / file))
      if (r.op == "calibration") echoed[r.quantity] = r.value;
    int mismatched = 0;
    for (const auto& [k, v] : expected)
      if (!echoed.count(k) || echoed[k] != v) ++mismatched;
    c.check(std::string(file) + " calibration constants not echoed exactly", mismatched, 0, 0);
  }
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  bool verbose = false;
  std::optional<std::set<int>> expect_fail;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--verbose") verbose = true;
    else if (a == "--expect-fail" && i + 1 < argc) expect_fail = parse_list(argv[++i]);
    else if (a == "--only" && i + 1 < argc) only = parse_list(argv[++i]);
    else {
      std::cerr << "usage: acceptance [--verbose] [--only 1,2,...] [--expect-fail 4,8]\n";
      return 2;
    }
  }

  RunConfig cfg;
  Rng rng(kSeed);
  const std::vector<std::pair<int, std::string>> titles = {
      {1, "Green's function engine"}, {2, "exact-solution residuals"}, {3, "topology"},
      {4, "pregluing estimates"},     {5, "obstruction pairing"},      {6, "linear solver"},
      {7, "deformation"},             {8, "balancing"},                {9, "large-distance mode"},
      {10, "determinism"}};
  std::set<int> failed;
  for (const auto& [id, title] : titles) {
    if (!only.empty() && !only.count(id)) continue;
    Criterion c{id, title, {}};
    auto t0 = std::chrono::steady_clock::now();
    try {
      switch (id) {
        case 1: c1(c, rng); break;
        case 2: c2(c, rng, cfg); break;
        case 3: c3(c); break;
        case 4: c4(c, rng, cfg); break;
        case 5: c5(c, cfg); break;
        case 6: c6(c, rng, cfg); break;
        case 7: c7(c, rng, cfg); break;
        case 8: c8(c, rng, cfg); break;
        case 9: c9(c, rng, cfg); break;
        case 10: c10(c); break;
      }
    } catch (const std::exception& e) {
      c.check(std::string("exception: ") + e.what(), 0, 1, kNaN);
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!c.pass()) failed.insert(id);
    if (verbose)
      for (const auto& r : c.rows)
        std::cout << "    [" << (r.verdict == Verdict::Pass ? "ok" : r.verdict == Verdict::Fail ? "FAIL" : "..")
                  << "] " << r.quantity << " = " << format_double(r.value) << "\n";
    std::ostringstream why;
    for (const auto& r : c.rows)
      if (r.verdict == Verdict::Fail) why << "; " << r.quantity << " = " << format_double(r.value);
    std::cout << "criterion " << id << " (" << title << "): " << (c.pass() ? "PASS" : "FAIL");
    std::cout << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat;
    if (!c.pass()) std::cout << " " << why.str().substr(2);
    std::cout << std::endl;
  }

  if (expect_fail) {
    bool match = failed == *expect_fail;
    std::cout << (match ? "failing set matches the expected set" : "failing set differs from the expected set")
              << "\n";
    return match ? 0 : 1;
  }
  return failed.empty() ? 0 : 1;
}
