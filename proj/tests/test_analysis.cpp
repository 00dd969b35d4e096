#include <random>

#include "doctest.h"
#include "forge/analysis.hpp"
#include "forge/experiments.hpp"

using namespace forge;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n = 4000) {
  double h = (b - a) / n, s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(a + i * h);
  return s * h / 3;
}

// C^1 bump on [a, b].
double bump(double r, double a, double b) {
  if (r <= a || r >= b) return 0.0;
  double s = std::sin(kPi * (r - a) / (b - a));
  return s * s;
}
double bump_deriv(double r, double a, double b) {
  if (r <= a || r >= b) return 0.0;
  double u = kPi * (r - a) / (b - a);
  return kPi / (b - a) * std::sin(2 * u);
}

BackgroundData triangle(double d) {
  BackgroundData bg;
  bg.v = 1;
  double R = d / std::sqrt(3.0);
  for (int j = 0; j < 3; ++j) bg.q.push_back(Point3(std::polar(R, kTwoPi * j / 3 + 0.3), 0.0));
  return bg;
}

}  // namespace

TEST_CASE("finite-difference jets are exact on low-degree polynomials") {
  Vec3 x0{0.3, -0.2, 0.5};
  LocalField quad = [&](const Vec3& o) {
    Vec3 x = x0 + o;
    FieldValue f;
    f.a[0] = Vec3{x.x * x.y, x.z * x.z, 1 + x.x};
    f.a[1] = Vec3{x.y * x.y, x.x * x.z, -x.y};
    f.a[2] = Vec3{x.x, x.y * x.z, x.x * x.x};
    f.psi = Vec3{x.x * x.x + x.y, x.y * x.z, x.z};
    return f;
  };
  auto j = fd_jet(quad, 1e-2, 2);
  CHECK(j.d[0].psi.x == doctest::Approx(2 * x0.x).epsilon(1e-12));
  CHECK(j.d[2].psi.y == doctest::Approx(x0.y).epsilon(1e-12));
  CHECK(j.d[1].a[0].x == doctest::Approx(x0.x).epsilon(1e-12));
  CHECK(j.d[2].a[1].y == doctest::Approx(x0.x).epsilon(1e-12));

  LocalField quartic = [&](const Vec3& o) {
    Vec3 x = x0 + o;
    FieldValue f;
    f.psi = Vec3{std::pow(x.x, 4), x.y * x.y * x.y * x.z, std::pow(x.z, 3)};
    return f;
  };
  auto k = fd_jet(quartic, 1e-2, 4);
  CHECK(k.d[0].psi.x == doctest::Approx(4 * std::pow(x0.x, 3)).epsilon(1e-10));
  CHECK(k.d[1].psi.y == doctest::Approx(3 * x0.y * x0.y * x0.z).epsilon(1e-10));
  CHECK(k.d[2].psi.z == doctest::Approx(3 * x0.z * x0.z).epsilon(1e-10));
}

TEST_CASE("FD residual of the PS monopole converges at second order") {
  auto ps = local_chart_field("ps", [](const Vec3& x) { return ps_eval(PSMonopole{}, x); });
  std::vector<Point3> pts = {Point3(0.4, 0.3, 0.2), Point3(-0.8, 0.5, 1.1), Point3(1.2, -0.3, 0.6)};
  for (const auto& s : residual_order(ps, pts)) CHECK(s.order >= 1.9);
}

TEST_CASE("lattice layout and validation") {
  Lattice lat;
  CHECK(lat.nx() == 33);
  auto nodes = lat.nodes();
  CHECK(nodes.size() == 33u * 33u * 16u);
  CHECK(lat.node(3, 4, 0).t == doctest::Approx(lat.offset.z));
  CHECK(lat.node(3, 4, 8).t == doctest::Approx(kPi + lat.offset.z));
  CHECK_NOTHROW(lat.validate({Point3(0.37, 0.32, 1.0)}));
  CHECK_THROWS_AS(lat.validate({lat.node(5, 5, 3)}), std::invalid_argument);
  Lattice bad = lat;
  bad.n_t = 1;
  CHECK_THROWS_AS(bad.validate({}), std::invalid_argument);
}

TEST_CASE("weighted norm of an annular bump matches the radial integral") {
  BackgroundData bg;
  bg.q = {Point3(0, 0, 0)};
  const double lam = 100, delta = 0.25;
  WeightSpec spec(WeightMode::HighMass, delta, bg, {lam});
  CHECK(weighted_norm({}, spec, -2) == 0.0);

  const double a = 0.15, b = 0.35, hs = 0.008;
  std::vector<WeightedSample> s;
  int n = static_cast<int>(std::ceil(b / hs));
  for (int i = -n; i < n; ++i)
    for (int j = -n; j < n; ++j)
      for (int k = -n; k < n; ++k) {
        Vec3 x{(i + 0.5) * hs, (j + 0.5) * hs, (k + 0.5) * hs};
        double u = bump(norm(x), a, b);
        if (u == 0.0) continue;
        s.push_back({Point3(x.x, x.y, x.z), hs * hs * hs, u * u, 0, 0});
      }
  for (int m : {-2, 0}) {
    double e = 2 * (delta - m - 1.5);
    double exact = std::sqrt(
        simpson([&](double r) { return 4 * kPi * r * r * std::pow(1 / (lam * lam) + r * r, e / 2) * std::pow(bump(r, a, b), 2); }, a, b));
    CHECK(weighted_norm(s, spec, m) == doctest::Approx(exact).epsilon(5e-3));
  }
}

TEST_CASE("Hardy inequality with the w weight") {
  BackgroundData bg;
  bg.q = {Point3(0, 0, 0)};
  const double delta = 0.25;
  WeightSpec spec(WeightMode::HighMass, delta, bg, {100.0});
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> U(0.02, 0.45), C(-1, 1);
  for (int t = 0; t < 10; ++t) {
    double a1 = U(rng), b1 = U(rng), a2 = U(rng), b2 = U(rng), c1 = C(rng), c2 = C(rng);
    if (a1 > b1) std::swap(a1, b1);
    if (a2 > b2) std::swap(a2, b2);
    auto u = [&](double r) { return c1 * bump(r, a1, b1) + c2 * bump(r, a2, b2); };
    auto du = [&](double r) { return c1 * bump_deriv(r, a1, b1) + c2 * bump_deriv(r, a2, b2); };
    double lhs = simpson([&](double r) { return r * r * std::pow(spec.w(0, r), -2 * delta - 3) * u(r) * u(r); }, 0, 0.5);
    double rhs = simpson([&](double r) { return r * r * std::pow(spec.w(0, r), -2 * delta - 1) * du(r) * du(r); }, 0, 0.5);
    CHECK(std::sqrt(lhs) <= std::sqrt(rhs) / delta);
  }
}

TEST_CASE("w, rho_hat and omega profiles") {
  BackgroundData bg;
  bg.q = {Point3(0, 0, 0)};
  WeightSpec spec(WeightMode::HighMass, 0.25, bg, {50.0});
  CHECK(spec.w(0, 0.3) == doctest::Approx(std::sqrt(1 / 2500.0 + 0.09)));
  CHECK(spec.w(0, 1.2) == 1.0);
  CHECK(spec.w(0, 0.0) == doctest::Approx(1 / 50.0));
  double prev = 0;
  for (double r = 0; r < 1.2; r += 0.01) {
    CHECK(spec.w(0, r) >= prev);
    prev = spec.w(0, r);
  }
  CHECK(spec.omega(Point3(3, 4, 1)) == doctest::Approx(std::sqrt(26.0)));
  CHECK(spec.rho_hat(0.2) == doctest::Approx(0.2));
  CHECK(spec.rho_hat(1.5) == 1.0);
  CHECK_THROWS_AS(WeightSpec(WeightMode::HighMass, 0.6, bg, {50.0}), std::invalid_argument);

  std::mt19937_64 rng(2);
  for (double d : {20.0, 40.0}) {
    WeightSpec ld(WeightMode::LargeDistance, 0.25, triangle(d), {1, 1, 1});
    CHECK(ld.d() == doctest::Approx(d));
    std::uniform_real_distribution<double> U(-2 * d, 2 * d);
    double g = 0, l = 0;
    for (int i = 0; i < 2000; ++i) {
      Point3 p(U(rng), U(rng), 0.0);
      g = std::max(g, norm(ld.grad_omega(p)));
      l = std::max(l, std::abs(ld.omega(p) * ld.laplacian_omega(p)));
    }
    CHECK(g <= 1.5);
    CHECK(l <= 10.0);
    // comparable to the distance to the nearest cell centre
    for (const auto& c : ld.cell_centres()) {
      Point3 p(c.real() + 3, c.imag() - 4, 0.0);
      CHECK(ld.omega(p) >= 0.5 * std::sqrt(26.0));
      CHECK(ld.omega(p) <= 2.0 * std::sqrt(26.0));
    }
  }
}

TEST_CASE("Voronoi partition of unity") {
  WeightSpec spec(WeightMode::LargeDistance, 0.25, triangle(20), {1, 1, 1});
  const auto& cells = spec.cell_centres();
  REQUIRE(cells.size() == 4u);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-30, 30);
  for (int i = 0; i < 500; ++i) {
    Point3 p(U(rng), U(rng), 1.0);
    double s = 0;
    for (int j = 0; j < 4; ++j) {
      double c = spec.partition(j, p);
      CHECK(c >= 0.0);
      s += c;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  for (int j = 0; j < 4; ++j) CHECK(spec.partition(j, Point3(cells[j] + 0.5, 0.0)) == 1.0);
}

TEST_CASE("alpha map: locality, integration by parts, linearity") {
  auto bg = triangle(20);
  WeightSpec spec(WeightMode::LargeDistance, 0.25, bg, {1, 1, 1});
  const auto& cells = spec.cell_centres();
  const double hs = 0.05;
  // S^1-invariant samples in the z-plane: volume carries the 2 pi
  auto disc = [&](std::complex<double> c, double R, auto f) {
    std::vector<DiagonalSample> out;
    int n = static_cast<int>(R / hs);
    for (int i = -n; i < n; ++i)
      for (int j = -n; j < n; ++j) {
        std::complex<double> z = c + std::complex<double>((i + 0.5) * hs, (j + 0.5) * hs);
        Vec3 v = f(z);
        if (norm(v) == 0.0) continue;
        out.push_back({Point3(z, 0.0), hs * hs * kTwoPi, v});
      }
    return out;
  };
  auto unit_bump = [&](std::complex<double> c, double sign) {
    double mass = simpson([](double r) { return kTwoPi * kTwoPi * r * bump(r, 0, 2); }, 0, 2);
    return disc(c, 2, [=](std::complex<double> z) { return Vec3{sign * bump(std::abs(z - c), 0, 2) / mass, 0, 0}; });
  };
  auto f = unit_bump(cells[1], 1);
  auto g = unit_bump(cells[0], -1);
  f.insert(f.end(), g.begin(), g.end());
  auto a = alpha_map(f, spec);
  CHECK(a[1][0] == doctest::Approx(1).epsilon(1e-3));
  CHECK(a[0][0] == doctest::Approx(-1).epsilon(1e-3));
  CHECK(std::abs(a[2][0]) < 1e-12);
  CHECK(std::abs(a[3][0]) < 1e-12);
  for (int j = 0; j < 4; ++j) CHECK(std::abs(a[j][1]) + std::abs(a[j][2]) < 1e-12);

  auto twice = f;
  for (auto& s : twice) s.f = 2.0 * s.f;
  auto a2 = alpha_map(twice, spec);
  for (int j = 0; j < 4; ++j)
    for (int h = 0; h < 3; ++h) CHECK(a2[j][h] == 2 * a[j][h]);

  CHECK_THROWS_AS(alpha_map(unit_bump(cells[1], 1), spec), UnbalancedSource);

  // f = -d psi for a compactly supported diagonal psi
  auto exact = disc(cells[2], 3, [&](std::complex<double> z) {
    double r = std::abs(z - cells[2]);
    if (r == 0.0) return Vec3{};
    double dpsi = bump_deriv(r, 0.5, 2.5);
    std::complex<double> u = (z - cells[2]) / r;
    return Vec3{-dpsi * u.real(), -dpsi * u.imag(), 0.0};
  });
  auto ae = alpha_map(exact, spec);
  for (int j = 0; j < 4; ++j)
    for (int h = 0; h < 3; ++h) CHECK(std::abs(ae[j][h]) < 1e-3);
}

TEST_CASE("log profiles v_j") {
  LogProfile v{std::complex<double>(2, -1)};
  Point3 p(7, 3, 0.4);
  double r = std::abs(p.z() - v.centre);
  CHECK(v.value(p) == doctest::Approx(-std::log(r) / (4 * kPi * kPi)));
  CHECK(v.value(Point3(2.5, -1, 0)) == 0.0);
  double h = 1e-5;
  for (Point3 q : {Point3(3.4, -0.2, 0.0), Point3(5, 2, 1.0), Point3(2.2, 0.6, 2.0)}) {
    Vec3 g = v.grad(q);
    CHECK(g.x == doctest::Approx((v.value(Point3(q.x + h, q.y, q.t)) - v.value(Point3(q.x - h, q.y, q.t))) / (2 * h)).epsilon(1e-6));
    CHECK(g.y == doctest::Approx((v.value(Point3(q.x, q.y + h, q.t)) - v.value(Point3(q.x, q.y - h, q.t))) / (2 * h)).epsilon(1e-6));
  }
  // integral of the Laplacian over the truncated domain
  for (double R : {4.0, 8.0}) {
    double total = kTwoPi * simpson([&](double s) {
      double ring = 0;
      for (int a = 0; a < 64; ++a) {
        std::complex<double> z = v.centre + std::polar(s, kTwoPi * a / 64);
        ring += v.laplacian(Point3(z, 0.0));
      }
      return ring / 64 * kTwoPi * s;
    }, 0, R);
    CHECK(std::abs(total - 1) <= 1 / R);
  }
}

TEST_CASE("transverse coercivity where |Phi| >= 1/2") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  for (int i = 0; i < 200; ++i) {
    Ad phi{n(rng), n(rng), n(rng)};
    phi = phi / norm(phi) * (0.5 + std::abs(n(rng)));
    Ad u{n(rng), n(rng), n(rng)};
    Ad ut = u - dot(u, phi) / dot(phi, phi) * phi;
    CHECK(4 * dot(bracket(phi, u), bracket(phi, u)) >= dot(ut, ut) * (1 - 1e-12));
  }
}

TEST_CASE("PS energy density is radially monotone") {
  auto ps = local_chart_field("ps", [](const Vec3& x) { return ps_eval(PSMonopole{}, x); });
  std::vector<Point3> ray;
  for (double r = 0.05; r < 4; r += 0.25) ray.push_back(Point3(0.6 * r, 0.0, 0.8 * r));
  auto e = energy_density(ps, ray, 1e-3, 4);
  for (size_t i = 1; i < e.size(); ++i) CHECK(e[i] < e[i - 1]);
}
