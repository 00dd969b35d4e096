#include <random>

#include "doctest.h"
#include "forge/analysis.hpp"
#include "forge/experiments.hpp"
#include "forge/preglue.hpp"

using namespace forge;

namespace {

std::shared_ptr<GreensFunction> greens() {
  static auto G = std::make_shared<GreensFunction>();
  return G;
}

BackgroundData single_centre(double lambda) {
  BackgroundData bg;
  bg.q = {Point3(0, 0, 0)};
  return with_min_mass(*greens(), bg, lambda);
}

// lambda = 400, N = 4 satisfies both neck conditions.
Pregluing make_c(Vec3 x0 = {}, double tau = 0) {
  auto bg = single_centre(400);
  auto gd = make_gluing_data(local_masses(*greens(), bg), {x0}, {tau}, 4.0);
  return Pregluing(greens(), bg, gd);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Vec3 v{n(rng), n(rng), n(rng)};
  return v / norm(v);
}

}  // namespace

TEST_CASE("gluing data validation and centre of mass") {
  auto bg = single_centre(400);
  auto lm = local_masses(*greens(), bg);
  CHECK(lm.lambda[0] == doctest::Approx(400).epsilon(1e-12));
  auto gd = make_gluing_data(lm, {Vec3{0.2, -0.1, 0.3}}, {0.5}, 4.0);
  CHECK(norm(gd.zeta - Vec3{-0.2, 0.1, -0.3} / 400.0) < 1e-14);
  CHECK(gd.delta[0] == doctest::Approx(0.05));

  CHECK_THROWS_AS(make_gluing_data(lm, {}, {}, 8.0), std::invalid_argument);  // 2 N delta = 0.8
  CHECK_NOTHROW(make_gluing_data(lm, {}, {}, 8.0, 0.5, true));
  CHECK_THROWS_AS(make_gluing_data(lm, {Vec3{0.6, 0, 0}}, {}, 4.0), std::invalid_argument);
  CHECK_THROWS_AS(make_gluing_data(lm, {}, {}, 1.5), std::invalid_argument);
  gd.zeta.x += 1e-10;
  CHECK_THROWS_AS(gd.validate(), std::invalid_argument);
}

TEST_CASE("cut-off supports and partitions") {
  for (double N : {8.0, 16.0}) {
    Cutoffs c;
    c.delta = 0.01;
    c.N = N;
    double worst_beta = 0;
    for (int i = 0; i <= 4000; ++i) {
      double rho = std::exp(std::log(1e-5) + i * (std::log(1.0) - std::log(1e-5)) / 4000);
      CHECK(c.chi_int(rho) * c.chi_ext(rho) == 0.0);
      CHECK(c.gamma(rho) + c.gamma_ext(rho) == 1.0);
      if (rho <= c.delta / (2 * N)) CHECK(c.chi_int(rho) == 1.0);
      if (rho >= c.delta / N) CHECK(c.chi_int(rho) == 0.0);
      if (rho <= N * c.delta) CHECK(c.chi_ext(rho) == 0.0);
      if (rho >= 2 * N * c.delta) CHECK(c.chi_ext(rho) == 1.0);
      if (rho <= c.delta / 2) CHECK(c.gamma(rho) == 1.0);
      if (rho >= 2 * c.delta) CHECK(c.gamma(rho) == 0.0);
      if (rho <= c.delta) CHECK(c.beta(rho) == 1.0);
      if (rho >= N * c.delta) CHECK(c.beta(rho) == 0.0);
      if (rho <= c.delta / N) CHECK(c.beta_ext(rho) == 0.0);
      if (rho >= c.delta) CHECK(c.beta_ext(rho) == 1.0);
      worst_beta = std::max(worst_beta, rho * std::abs(c.beta_deriv(rho)) * std::log(N));
    }
    CHECK(worst_beta <= 1.5);
  }
}

TEST_CASE("cut-off derivatives match finite differences") {
  Cutoffs c;
  c.delta = 0.05;
  c.N = 4;
  double h = 1e-8;
  for (double rho : {0.008, 0.01, 0.07, 0.12, 0.25, 0.3, 0.35}) {
    auto fd = [&](auto f) { return (f(rho + h) - f(rho - h)) / (2 * h); };
    CHECK(c.chi_int_deriv(rho) == doctest::Approx(fd([&](double r) { return c.chi_int(r); })).epsilon(1e-5));
    CHECK(c.chi_ext_deriv(rho) == doctest::Approx(fd([&](double r) { return c.chi_ext(r); })).epsilon(1e-5));
    CHECK(c.gamma_deriv(rho) == doctest::Approx(fd([&](double r) { return c.gamma(r); })).epsilon(1e-5));
    CHECK(c.beta_deriv(rho) == doctest::Approx(fd([&](double r) { return c.beta(r); })).epsilon(1e-5));
  }
}

TEST_CASE("modified Dirac block c0") {
  std::mt19937_64 rng(3);
  auto plain = make_c();
  double lam = plain.gluing().lambda[0];
  for (double rho : {0.1, 0.2, 0.35}) {
    Vec3 X = rho * random_unit(rng);
    CHECK(norm(plain.c0(0, X).psi) == doctest::Approx(lam - 1 / rho).epsilon(1e-14));
  }

  Vec3 x0{0.2, -0.1, 0.3};
  auto shifted = make_c(x0);
  for (int i = 0; i < 10; ++i) {
    double rho = 0.1 + 0.25 * i / 9.0;
    Vec3 X = rho * random_unit(rng);
    Ad d = shifted.c0(0, X).psi - plain.c0(0, X).psi;
    CHECK(std::abs(dot(d, X / rho) + dot(X, x0) / (lam * rho * rho * rho)) < 1e-12);
  }
  Vec3 along = 0.2 * x0 / norm(x0);
  Ad d = shifted.c0(0, along).psi - plain.c0(0, along).psi;
  CHECK(norm(d) == doctest::Approx(norm(x0) / (lam * 0.04)).epsilon(1e-12));

  for (int i = 0; i < 5; ++i) {
    Vec3 X = (0.1 + 0.05 * i) * random_unit(rng);
    LocalField f = [&](const Vec3& o) { return shifted.c0(0, X + o); };
    CHECK(bogomolny(fd_jet(f, 1e-4, 4)).residual() <= 1e-6);
  }
}

TEST_CASE("assembly: zeta correction and chart agreement") {
  auto c = make_c();
  CHECK(norm(c.gluing().zeta) == 0.0);
  auto z = c.zeta_correction(Point3(0.5, 0.1, 0.3));
  CHECK(norm(z.a) == 0.0);
  CHECK(z.psi == 0.0);

  std::mt19937_64 rng(4);
  auto cx = make_c(Vec3{0.1, 0.2, -0.1}, 0.7);
  const auto& gd = cx.gluing();
  double d = gd.delta[0], N = gd.N;
  Point3 q = cx.background().q[0];
  for (int i = 0; i < 20; ++i) {
    // Ann_j: both the interior and the hedgehog description reduce to c0 there
    double rho = d / N * std::exp((i + 0.5) / 20.0 * std::log(N * N));
    Vec3 X = rho * random_unit(rng);
    double hh = norm(cx.field().eval(cx.hedgehog_chart(0), q, X).psi);
    double ab = norm(cx.field().eval(cx.abelian_chart(0), q, X).psi);
    CHECK(std::abs(hh - ab) < 1e-10 * hh);
    if (rho > d && rho < N * d) {
      double ref = norm(cx.c0(0, X).psi);
      CHECK(std::abs(hh - ref) < 1e-10 * ref);
    }
  }
  for (double rho : {0.7, 0.8, 0.9}) {
    Vec3 X = rho * random_unit(rng);
    Point3 p = q.shifted(X);
    double hh = norm(cx.field().eval(cx.hedgehog_chart(0), q, X).psi);
    double ex = norm(cx.field().eval(cx.exterior_chart(), p, {}).psi);
    CHECK(std::abs(hh - ex) < 1e-10 * ex);
  }

  auto est = pregluing_estimates(cx, rng);
  CHECK(est.phi_min >= 0.5);
}

TEST_CASE("obstruction sections") {
  auto c = make_c();
  auto pr = obstruction_pairing(c);
  for (int h = 0; h < 3; ++h)
    for (int l = 0; l < 3; ++l) CHECK(std::abs(pr.d2[h][l] - (h == l ? 1.0 : 0.0)) < 1e-3);
  CHECK(std::abs(pr.flat_dirac - 1.0) < 1e-3);

  std::mt19937_64 rng(8);
  double d = c.gluing().delta[0], N = c.gluing().N;
  Point3 q = c.background().q[0];
  for (int h = 1; h <= 4; ++h)
    for (double rho : {0.2 * N * d, 0.6 * N * d, 0.99 * N * d}) {
      auto o = c.obstruction(h, q.shifted(rho * random_unit(rng)));
      CHECK(norm(o.a) == 0.0);
      CHECK(o.psi == 0.0);
    }
  // rho^2 |o_h| bounded on B_1 minus B_{N delta}
  double worst = 0;
  for (int h = 1; h <= 4; ++h)
    for (double rho = N * d; rho < 1.0; rho *= 1.2) {
      auto o = c.obstruction(h, q.shifted(rho * random_unit(rng)));
      worst = std::max(worst, rho * rho * std::hypot(norm(o.a), o.psi));
    }
  CHECK(worst < 1.0);
}

TEST_CASE("Bogomolny error vanishes off the gluing annuli") {
  // at lambda = 400 the order-4 stencil hits a rounding floor near 1e-6, so use the estimate setup
  auto bg = single_centre(100);
  auto gd = make_gluing_data(local_masses(*greens(), bg), {Vec3{0.1, 0, 0.1}}, {0.0}, 2.2, 0.5, true);
  Pregluing c(greens(), bg, gd);
  std::mt19937_64 rng(12);
  auto est = pregluing_estimates(c, rng);
  CHECK(est.off_support <= 1e-6);
  CHECK(est.samples > 0);
}
