#include <random>

#include "doctest.h"
#include "forge/analysis.hpp"
#include "forge/blocks.hpp"

using namespace forge;

namespace {

auto greens() { return std::make_shared<GreensFunction>(); }

// Single abelian chart for one periodic Dirac monopole.
ChartField single_dirac(std::shared_ptr<GreensFunction> G, const Point3& at, int charge, double v) {
  auto f = std::make_shared<AbelianField>(G, v, 0.0, std::vector<AbelianSource>{{at, charge, {}}});
  ChartField cf;
  cf.add(Chart{"dirac", "abelian", [at](const Point3& p) { return distance(at, p); },
               [f](const Point3& a, const Vec3& o) { return f->value(a, o); }});
  return cf;
}

}  // namespace

TEST_CASE("periodic Dirac Higgs field") {
  auto G = greens();
  Point3 s(1, -1, 0.5);
  CHECK(dirac_higgs(*G, Point3(3, 2, 1), s, 0, 7.5) == 7.5);
  for (double rho : {1e-3, 1e-4})
    CHECK(rho * dirac_higgs(*G, s.shifted(Vec3{0, rho, 0}), s, 1, 2.0) == doctest::Approx(-0.5).epsilon(1e-2));
  double far = dirac_higgs(*G, s.shifted(Vec3{12, 0, 0.3}), s, 1, 2.0);
  CHECK(std::abs(far - 2.0 - std::log(12.0) / kTwoPi) < std::exp(-11.0));
  CHECK_THROWS(dirac_higgs(*G, s, s, 1, 2.0));
}

TEST_CASE("Dirac potential: flat twist and string") {
  auto G = greens();
  Point3 s(0, 0, 0);
  Vec3 a = dirac_potential(*G, StringChart::North, Point3(1, 1, 1), s, 0, 0.3);
  CHECK(a.x == 0.0);
  CHECK(a.y == 0.0);
  CHECK(a.z == doctest::Approx(0.3));
  CHECK_THROWS_AS(dirac_potential(*G, StringChart::North, Point3(0, 0, -0.5), s, 1, 0.0), StringError);
}

TEST_CASE("Dirac monopole fluxes through a small sphere and the torus agree") {
  auto G = greens();
  Point3 s(0, 0, 0);
  auto cf = single_dirac(G, s, 1, 1.0);
  // Phi ~ -1/(2 rho) gives outward flux +2pi; the torus encloses the same charge
  CHECK(flux_sphere(cf, s, 0.3, {s}) == doctest::Approx(kTwoPi).epsilon(1e-6));
  CHECK(flux_torus(cf, 20, {s}) == doctest::Approx(kTwoPi).epsilon(1e-4));
}

TEST_CASE("background validation") {
  BackgroundData bg;
  bg.v = 1;
  bg.q = {Point3(-4, 0, 0), Point3(4, 0, 0)};
  CHECK_NOTHROW(bg.validate());
  CHECK(bg.charge_at_infinity() == 4);
  bg.q = {Point3(0, 0, 0), Point3(0, 0, 0)};
  try {
    bg.validate(0.0);
    FAIL("coincident centres accepted");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("distinct") != std::string::npos);
  }
  bg.q = {Point3(-2, 0, 0), Point3(2, 0, 0)};
  CHECK_THROWS_AS(bg.validate(5.0), std::invalid_argument);
  bg.q = {Point3(1, 0, 0), Point3(2, 0, 0)};
  CHECK_THROWS_AS(bg.validate(0.0), std::invalid_argument);  // sum z_j != 0
}

TEST_CASE("local masses") {
  auto G = greens();
  BackgroundData one;
  one.v = 3.25;
  one.q = {Point3(0, 0, 0)};
  auto lm = local_masses(*G, one);
  CHECK(lm.lambda[0] == doctest::Approx(3.25 + G->a0()).epsilon(1e-15));
  CHECK(lm.lambda_direct[0] == doctest::Approx(3.25 + G->a0()).epsilon(1e-15));

  for (double D : {6.0, 10.0}) {
    BackgroundData two;
    two.v = 1;
    two.q = {Point3(-D / 2, 0, 0.4), Point3(D / 2, 0, -0.4)};
    auto l2 = local_masses(*G, two);
    double expect = 1 + G->a0() + std::log(D) / kPi;
    for (int j = 0; j < 2; ++j) {
      CHECK(l2.lambda[j] == doctest::Approx(expect).epsilon(1e-14));
      CHECK(std::abs(l2.lambda_direct[j] - expect) < 5 * std::exp(-D));
    }
  }

  std::vector<double> logD, lam;
  for (double D : {20.0, 40.0}) {
    BackgroundData three;
    three.v = 1;
    double R = D / std::sqrt(3.0);
    for (int j = 0; j < 3; ++j) three.q.push_back(Point3(std::polar(R, kTwoPi * j / 3), 0.0));
    auto l3 = local_masses(*G, three);
    CHECK(l3.d == doctest::Approx(D));
    CHECK(l3.predicted_slope == doctest::Approx(2 / kPi));
    logD.push_back(std::log(D));
    lam.push_back(l3.lambda_direct[0]);
  }
  double slope = (lam[1] - lam[0]) / (logD[1] - logD[0]);
  CHECK(std::abs(slope / (2 / kPi) - 1) < 0.05);
}

TEST_CASE("admissibility conditions") {
  auto G = greens();
  BackgroundData bg;
  bg.v = 100;
  bg.q = {Point3(0, 0, 0)};
  CHECK(check_admissible(*G, bg, 50, 5, 2).admissible());

  BackgroundData tie;
  tie.v = -1;
  tie.q = {Point3(0, 0, 0)};
  tie.p = {Point3(6, 0, 0), Point3(-6, 0, 0)};
  CHECK_FALSE(check_admissible(*G, tie, 0, 5, 1e9).sign_ok);

  BackgroundData close;
  close.v = 50;
  close.q = {Point3(-2, 0, 0), Point3(2, 0, 0)};
  CHECK_FALSE(check_admissible(*G, close, 0, 5, 1e9).distance_ok);
}

TEST_CASE("c_ext solves the Bogomolny equation and has the right asymptotics") {
  auto G = greens();
  BackgroundData bg;
  bg.v = 3;
  bg.b = 0.2;
  bg.q = {Point3(3, 0, 0.5), Point3(-3, 0, -0.5)};
  bg.p = {Point3(0, 5, 1.0)};
  auto cf = build_c_ext(G, bg);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-7, 7), T(0, kTwoPi);
  int tested = 0;
  while (tested < 50) {
    Point3 p(U(rng), U(rng), T(rng));
    bool ok = true;
    for (const auto& q : bg.q) ok = ok && distance(q, p) >= 0.5;
    for (const auto& s : bg.p) ok = ok && distance(s, p) >= 0.5;
    if (!ok) continue;
    CHECK(residual_at(cf, p, 1e-3, 4) <= 1e-6);
    ++tested;
  }
  std::vector<Point3> sing = {bg.q[0], bg.q[1], bg.p[0]};
  CHECK(flux_torus(cf, 40, sing) == doctest::Approx(kTwoPi * 3).epsilon(1e-3));

  BackgroundData one;
  one.v = 5;
  one.q = {Point3(0, 0, 0)};
  auto lm = local_masses(*G, one);
  auto f = c_ext_field(G, one);
  for (double rho : {0.05, 0.1}) {
    double phi = f.phi(Point3(rho, 0, 0));
    CHECK(std::abs(phi - (lm.lambda[0] - 1 / rho)) <= 0.5 * rho * rho);
  }
}

TEST_CASE("Prasad-Sommerfield monopole") {
  PSMonopole unit;
  CHECK(norm(ps_eval(unit, Vec3{0.6, 0.0, 0.8}).psi) == doctest::Approx(1 / std::tanh(1.0) - 1).epsilon(1e-12));
  CHECK(norm(ps_eval(unit, Vec3{0.6, 0.0, 0.8}).psi) == doctest::Approx(0.313035).epsilon(1e-6));
  double r = 6;
  CHECK(std::abs(1 - norm(ps_eval(unit, Vec3{0, 0, r}).psi) - 1 / r) <= 10 * std::exp(-2 * r));

  PSMonopole m;
  m.scale = 7;
  m.x0 = {0.3, -0.2, 0.1};
  m.tau = 0.8;
  CHECK(norm(ps_eval(m, ps_zero(m)).psi) < 1e-8);
  // no other zero on a coarse grid
  for (double x = -1; x <= 1; x += 0.25)
    for (double y = -1; y <= 1; y += 0.25)
      for (double z = -1; z <= 1; z += 0.25) {
        Vec3 p{x, y, z};
        if (norm(p - ps_zero(m)) > 0.1) CHECK(norm(ps_eval(m, p).psi) > 0.01);
      }
  for (Vec3 x : {Vec3{0.1, 0.05, -0.08}, Vec3{0.02, 0.3, 0.1}}) {
    LocalField f = [&](const Vec3& o) { return ps_eval(m, x + o); };
    CHECK(bogomolny(fd_jet(f, 1e-4, 4)).residual() < 1e-5);
  }
}

TEST_CASE("asymptotically abelian gauge") {
  PSMonopole u;
  double prev = 1e9;
  for (double r : {2.0, 4.0, 8.0}) {
    auto g = ps_abelian_gauge(u, Vec3{r * 0.48, r * 0.6, r * 0.64});
    // the gauged Higgs field is diagonal
    CHECK(std::abs(g.gauged.psi.x) < 1e-12);
    CHECK(std::abs(g.gauged.psi.y) < 1e-12);
    double rem = norm(g.remainder);
    CHECK(rem < prev);
    CHECK(rem <= 2 * std::exp(-r) * (1 + r));
    prev = rem;
  }
  Vec3 x{0.3, 0.5, -0.2};
  LocalField f = [&](const Vec3& o) { return straighten(x + o, ps_eval(u, x + o)); };
  CHECK(bogomolny(fd_jet(f, 1e-4, 4)).residual() < 1e-6);
}

TEST_CASE("Euclidean Dirac monopole is an exact abelian solution") {
  for (Vec3 x : {Vec3{0.5, 0.2, 0.3}, Vec3{-1, 0.4, 0.9}}) {
    LocalField f = [&](const Vec3& o) { return euclidean_dirac(x + o, 2.0, 5.0); };
    CHECK(bogomolny(fd_jet(f, 1e-4, 4)).residual() < 1e-7);
  }
  CHECK(euclidean_dirac(Vec3{0, 0, 2}, 2.0, 5.0).psi.z == doctest::Approx(5 - 0.5));
}
