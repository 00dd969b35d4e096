#include "forge/preglue.hpp"

#include <algorithm>
#include <limits>

#include "forge/analysis.hpp"

namespace forge {

Vec3 centre_of_mass(const std::vector<Vec3>& x0, const std::vector<double>& lambda) {
  Vec3 z{};
  for (size_t j = 0; j < x0.size(); ++j) z -= x0[j] / lambda[j];
  return z;
}

void GluingData::validate() const {
  const size_t k = lambda.size();
  if (k == 0) throw std::invalid_argument("gluing: no centres");
  if (x0.size() != k || tau.size() != k || delta.size() != k)
    throw std::invalid_argument("gluing: x0, tau, lambda and delta must have one entry per centre");
  if (!(N > 2.0)) throw std::invalid_argument("gluing: neck ratio N must exceed 2");
  if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("gluing: kappa must lie in (0, 1)");
  for (size_t j = 0; j < k; ++j) {
    if (!(lambda[j] > 0)) throw std::invalid_argument("gluing: local masses must be positive");
    if (!(norm(x0[j]) < kappa)) throw std::invalid_argument("gluing: |x0_j| must be below kappa");
    if (std::abs(delta[j] - 1.0 / std::sqrt(lambda[j])) > 1e-14 * delta[j])
      throw std::invalid_argument("gluing: delta_j must equal lambda_j^{-1/2}");
    if (!allow_infeasible_neck) {
      if (!(2.0 * N * delta[j] < 0.5)) throw std::invalid_argument("gluing: 2 N delta_j must be below 1/2");
      if (!(delta[j] / (2.0 * N) > 2.0 / lambda[j]))
        throw std::invalid_argument("gluing: delta_j / (2N) must exceed 2 / lambda_j");
    }
  }
  if (norm(zeta - centre_of_mass(x0, lambda)) > 1e-14) throw std::invalid_argument("gluing: stored zeta is stale");
}

GluingData make_gluing_data(const LocalMasses& lm, std::vector<Vec3> x0, std::vector<double> tau, double N,
                            double kappa, bool allow_infeasible_neck) {
  GluingData gd;
  const size_t k = lm.lambda.size();
  gd.lambda = lm.lambda;
  gd.x0 = x0.empty() ? std::vector<Vec3>(k) : std::move(x0);
  gd.tau = tau.empty() ? std::vector<double>(k, 0.0) : std::move(tau);
  gd.N = N;
  gd.kappa = kappa;
  gd.allow_infeasible_neck = allow_infeasible_neck;
  for (double l : gd.lambda) gd.delta.push_back(l > 0 ? 1.0 / std::sqrt(l) : 0.0);
  if (gd.x0.size() == k) gd.zeta = centre_of_mass(gd.x0, gd.lambda);
  gd.validate();
  return gd;
}

// --- cut-offs -------------------------------------------------------------

double Cutoffs::gamma(double rho) const {
  if (rho <= 0.5 * delta) return 1.0;
  return cutoff(1.0 + std::log(2.0 * rho / delta) / std::log(4.0));
}

double Cutoffs::gamma_deriv(double rho) const {
  if (rho <= 0.5 * delta) return 0.0;
  return cutoff_deriv(1.0 + std::log(2.0 * rho / delta) / std::log(4.0)) / (rho * std::log(4.0));
}

namespace {

constexpr double kBetaRound = 0.05;

// Linear ramp on [0, 1] with quadratic ends of width kBetaRound; C^1, slope 1/(1 - kBetaRound).
double rounded_ramp(double u) {
  const double e = kBetaRound, s = 1.0 / (1.0 - e);
  if (u <= 0) return 0.0;
  if (u >= 1) return 1.0;
  if (u < e) return s * u * u / (2 * e);
  if (u > 1 - e) return 1.0 - s * (1 - u) * (1 - u) / (2 * e);
  return s * (u - 0.5 * e);
}

double rounded_ramp_deriv(double u) {
  const double e = kBetaRound, s = 1.0 / (1.0 - e);
  if (u <= 0 || u >= 1) return 0.0;
  if (u < e) return s * u / e;
  if (u > 1 - e) return s * (1 - u) / e;
  return s;
}

}  // namespace

double Cutoffs::beta(double rho) const {
  if (rho <= delta) return 1.0;
  return 1.0 - rounded_ramp(std::log(rho / delta) / std::log(N));
}

double Cutoffs::beta_deriv(double rho) const {
  if (rho <= delta) return 0.0;
  return -rounded_ramp_deriv(std::log(rho / delta) / std::log(N)) / (rho * std::log(N));
}

double Cutoffs::beta_ext(double rho) const {
  if (rho <= delta / N) return 0.0;
  return rounded_ramp(std::log(rho * N / delta) / std::log(N));
}

double Cutoffs::beta_ext_deriv(double rho) const {
  if (rho <= delta / N) return 0.0;
  return rounded_ramp_deriv(std::log(rho * N / delta) / std::log(N)) / (rho * std::log(N));
}

Cutoffs make_cutoffs(const GluingData& gd, int j) {
  Cutoffs c;
  c.delta = gd.delta.at(j);
  c.N = gd.N;
  return c;
}

// --- assembly -------------------------------------------------------------

Pregluing::Pregluing(std::shared_ptr<const GreensFunction> G, BackgroundData bg, GluingData gd, PregluingOptions opt)
    : G_(std::move(G)), bg_(std::move(bg)), gd_(std::move(gd)), opt_(opt) {
  gd_.validate();
  if (gd_.k() != bg_.k()) throw std::invalid_argument("gluing: one set of gluing data per centre required");
  double reach = 0;
  for (int j = 0; j < gd_.k(); ++j) {
    cut_.push_back(make_cutoffs(gd_, j));
    reach = std::max(reach, 2.0 * gd_.N * gd_.delta[j]);
  }
  // keep the global chart outside every exterior cut-off transition
  opt_.exterior_inner = std::max(opt_.exterior_inner, 1.05 * reach);
  opt_.chart_radius = std::max(opt_.chart_radius, opt_.exterior_inner + 0.4);
  if (bg_.k() + bg_.n() > 1 && bg_.min_distance() <= 2.0 * opt_.chart_radius)
    throw std::invalid_argument("gluing: gluing balls overlap");
  std::vector<Vec3> dip;
  for (int j = 0; j < gd_.k(); ++j) dip.push_back(gd_.x0[j] / gd_.lambda[j]);
  ext_ = std::make_shared<AbelianField>(c_ext_field(G_, bg_, dip));
  build_charts();
}

FieldValue Pregluing::c0(int j, const Vec3& X) const {
  double r = norm(X);
  if (!(r > 0)) throw PoleError();
  Vec3 n = X / r, s = gd_.x0[j] / gd_.lambda[j];
  double r3 = r * r * r;
  FieldValue f;
  f.psi = (gd_.lambda[j] - 1.0 / r - dot(X, s) / r3) * n;
  Vec3 adip = -cross(X, s) / r3;
  for (int i = 0; i < 3; ++i) f.a[i] = (-1.0 / (r * r)) * cross(unit(i), X) + adip[i] * n;
  return f;
}

FieldValue Pregluing::interior(int j, const Vec3& X) const {
  const double L = gd_.lambda[j];
  PSMonopole m{L, gd_.x0[j], gd_.tau[j]};
  FieldValue f = ps_eval(m, X);
  Vec3 s = gd_.x0[j] / L;
  double r = norm(X), sn = norm(s);
  if (sn == 0.0) return f;
  // rotate the Higgs direction about the zero onto the direction from q_j,
  // switching on over rho_b <= rho <= 2 rho_b
  double rb = std::max(std::min(1.0 / L, cut_[j].delta / (4.0 * gd_.N)), 1.25 * sn);
  if (r <= rb) return f;
  Vec3 Y = X - s;
  double ry = norm(Y);
  Vec3 u = Y / ry, v = X / r;
  std::array<Vec3, 3> du, dv, dw;
  for (int i = 0; i < 3; ++i) {
    du[i] = (unit(i) - u[i] * u) / ry;
    dv[i] = (unit(i) - v[i] * v) / r;
  }
  Vec3 w = minimal_rotation(u, du, v, dv, dw);
  double om = 1.0 - smooth_step(r / rb), dom = -smooth_step_deriv(r / rb) / rb;
  for (int i = 0; i < 3; ++i) dw[i] = om * dw[i] + (dom * v[i]) * w;
  return apply_gauge(rotation_gauge(om * w, dw), f);
}

ScalarForm Pregluing::mismatch(int j, const Vec3& X) const {
  const GreensFunction& G = *G_;
  std::vector<Vec3> dq, sq;
  for (int h = 0; h < bg_.k(); ++h)
    if (h != j) {
      dq.push_back(displacement(bg_.q[h], bg_.q[j]));
      sq.push_back(gd_.x0[h] / gd_.lambda[h]);
    }
  std::vector<Vec3> dp;
  for (const auto& pi : bg_.p) dp.push_back(displacement(pi, bg_.q[j]));
  auto grad0 = [&](const Vec3& Y) {
    Vec3 g = 2.0 * G.grad_regular(Y);
    for (const auto& d : dq) g += 2.0 * G.grad(d + Y);
    for (const auto& d : dp) g -= G.grad(d + Y);
    return g;
  };
  ScalarForm r;
  r.psi = bg_.v - gd_.lambda[j] + 2.0 * G.regular(X);
  for (const auto& d : dq) r.psi += 2.0 * G(d + X);
  for (const auto& d : dp) r.psi -= G(d + X);
  static thread_local QuadRule rule;
  if (static_cast<int>(rule.x.size()) != opt_.radial_nodes) rule = gauss_legendre(opt_.radial_nodes, 0.0, 1.0);
  for (size_t l = 0; l < rule.x.size(); ++l) r.a += (rule.w[l] * rule.x[l]) * cross(grad0(rule.x[l] * X), X);
  // dipole corrections: smooth part of -2 s_j . dG_j plus the other centres
  Vec3 s = gd_.x0[j] / gd_.lambda[j];
  if (norm2(s) > 0) {
    Vec3 g = G.grad_regular(X);
    r.psi -= 2.0 * dot(s, g);
    r.a -= 2.0 * cross(g, s);
  }
  for (size_t h = 0; h < dq.size(); ++h) {
    if (norm2(sq[h]) == 0) continue;
    Vec3 g = G.grad(dq[h] + X);
    r.psi -= 2.0 * dot(sq[h], g);
    r.a -= 2.0 * cross(g, sq[h]);
  }
  return r;
}

FieldValue Pregluing::hedgehog(int j, const Vec3& X, bool with_zeta) const {
  const Cutoffs& c = cut_[j];
  double r = norm(X);
  if (r <= c.delta / (2.0 * gd_.N)) return interior(j, X);
  FieldValue f = c0(j, X);
  double ci = c.chi_int(r);
  if (ci > 0) f += ci * (interior(j, X) - f);
  Vec3 n = X / r;
  auto add = [&](const ScalarForm& m, double w) {
    f.psi += (w * m.psi) * n;
    for (int i = 0; i < 3; ++i) f.a[i] += (w * m.a[i]) * n;
  };
  double ce = c.chi_ext(r);
  if (ce > 0) add(mismatch(j, X), ce);
  if (with_zeta && norm2(gd_.zeta) > 0 && ce > 0) add(zeta_correction(bg_.q[j], X), 1.0);
  return f;
}

FieldValue Pregluing::exterior(const Point3& anchor, const Vec3& offset, bool with_zeta) const {
  FieldValue f = ext_->value(anchor, offset);
  if (with_zeta && norm2(gd_.zeta) > 0) {
    ScalarForm z = zeta_correction(anchor, offset);
    f.psi.z += z.psi;
    for (int i = 0; i < 3; ++i) f.a[i].z += z.a[i];
  }
  return f;
}

double Pregluing::chi_ext(const Point3& p) const {
  double c = 1.0;
  for (int j = 0; j < bg_.k(); ++j) c *= cut_[j].chi_ext(distance(bg_.q[j], p));
  return c;
}

double Pregluing::gamma_ext(const Point3& p) const {
  double g = 1.0;
  for (int j = 0; j < bg_.k(); ++j) g -= cut_[j].gamma(distance(bg_.q[j], p));
  return g;
}

ScalarForm Pregluing::obstruction(int h, const Point3& anchor, const Vec3& offset) const {
  if (h < 1 || h > 4) throw std::invalid_argument("obstruction index must be 1..4");
  const int k = bg_.k();
  double chi = 1.0;
  std::vector<Vec3> d(k);
  for (int j = 0; j < k; ++j) {
    d[j] = displacement(bg_.q[j], anchor) + offset;
    chi *= cut_[j].chi_ext(norm(d[j]));
    if (chi == 0.0) return {};
  }
  Vec3 g{};
  for (int j = 0; j < k; ++j) g += G_->grad(d[j]);
  double c = -chi / (kTwoPi * k);
  ScalarForm o;
  if (h == 4) {
    o.a = c * g;
    return o;
  }
  o.a = c * cross(g, unit(h - 1));
  o.psi = c * g[h - 1];
  return o;
}

ScalarForm Pregluing::zeta_correction(const Point3& anchor, const Vec3& offset) const {
  ScalarForm z;
  for (int h = 1; h <= 3; ++h) {
    double c = 4.0 * kPi * gd_.zeta[h - 1];
    if (c == 0.0) continue;
    ScalarForm o = obstruction(h, anchor, offset);
    z.a += c * o.a;
    z.psi += c * o.psi;
  }
  return z;
}

void Pregluing::build_charts() {
  const int k = bg_.k();
  const double R = opt_.chart_radius, Rin = opt_.exterior_inner;
  for (int j = 0; j < k; ++j) {
    field_.add(Chart{"hedgehog_" + std::to_string(j), "interior",
                     [this, j, R](const Point3& p) { return R - distance(bg_.q[j], p); },
                     [this, j](const Point3& a, const Vec3& o) { return hedgehog(j, offset_from(j, a) + o); }});
  }
  for (int j = 0; j < k; ++j) {
    double inner = gd_.delta[j] / gd_.N;
    field_.add(Chart{"abelian_" + std::to_string(j), "neck",
                     [this, j, R, inner](const Point3& p) {
                       Vec3 X = offset_from(j, p);
                       double r = norm(X);
                       double ray = X.z < 0 ? std::hypot(X.x, X.y) : r;
                       return 0.5 * std::min({r - inner, R - r, ray});
                     },
                     [this, j](const Point3& a, const Vec3& o) {
                       Vec3 X = offset_from(j, a) + o;
                       return straighten(X, hedgehog(j, X));
                     }});
    field_.transitions.push_back(Transition{j, k + j, [this, j](const Point3& p) {
                                              Vec3 X = offset_from(j, p);
                                              Vec3 n = X / norm(X);
                                              std::array<Vec3, 3> dn{}, dw;
                                              return rotation_from_vector(minimal_rotation(n, dn, unit(2), dn, dw));
                                            }});
  }
  field_.add(Chart{"exterior", "exterior",
                   [this, Rin](const Point3& p) {
                     double m = std::numeric_limits<double>::infinity();
                     for (const auto& q : bg_.q) m = std::min(m, distance(q, p) - Rin);
                     for (const auto& s : bg_.p) m = std::min(m, distance(s, p));
                     return m;
                   },
                   [this](const Point3& a, const Vec3& o) { return exterior(a, o); }});
}

// --- errors and pairings ---------------------------------------------------

namespace {

struct ScalarJet {
  ScalarForm f;
  std::array<ScalarForm, 3> d;
};

ScalarJet scalar_jet(const std::function<ScalarForm(const Vec3&)>& f, double h, int order) {
  auto central = [&](double s) {
    std::array<ScalarForm, 3> d;
    for (int i = 0; i < 3; ++i) {
      ScalarForm p = f(s * unit(i)), m = f(-s * unit(i));
      d[i].a = (0.5 / s) * (p.a - m.a);
      d[i].psi = (0.5 / s) * (p.psi - m.psi);
    }
    return d;
  };
  ScalarJet j;
  j.f = f(Vec3{});
  j.d = central(h);
  if (order == 4) {
    auto d2 = central(2 * h);
    for (int i = 0; i < 3; ++i) {
      j.d[i].a = (4.0 / 3.0) * j.d[i].a - (1.0 / 3.0) * d2[i].a;
      j.d[i].psi = (4.0 / 3.0) * j.d[i].psi - (1.0 / 3.0) * d2[i].psi;
    }
  } else if (order != 2) {
    throw std::invalid_argument("finite differences: order must be 2 or 4");
  }
  return j;
}

}  // namespace

Vec3 abelian_d2(const std::function<ScalarForm(const Vec3&)>& f, double h, int order) {
  ScalarJet j = scalar_jet(f, h, order);
  Vec3 r;
  for (int k = 0; k < 3; ++k) {
    int i = (k + 1) % 3, l = (k + 2) % 3;
    r[k] = j.d[i].a[l] - j.d[l].a[i] - j.d[k].psi;
  }
  return r;
}

double abelian_codiff(const std::function<ScalarForm(const Vec3&)>& f, double h, int order) {
  ScalarJet j = scalar_jet(f, h, order);
  return -(j.d[0].a.x + j.d[1].a.y + j.d[2].a.z);
}

ErrorSample error_at(const Pregluing& c, const Point3& p, double h, int order) {
  ErrorSample e;
  const ChartField& cf = c.field();
  e.chart = cf.best_chart(p);
  if (e.chart < 0) throw ChartError("point not covered by any chart");
  Jet jet = fd_jet(cf, e.chart, p, h, order);
  Bogomolny b = bogomolny(jet);
  e.psi = b.psi;
  e.higgs = jet.f.psi;
  e.norm_psi = b.residual();
  e.dphi = std::sqrt(norm2(b.dAPhi[0]) + norm2(b.dAPhi[1]) + norm2(b.dAPhi[2]));
  if (norm2(c.gluing().zeta) > 0 && c.chi_ext(p) < 1.0 + 1e-15) {
    e.psi_zeta = abelian_d2([&](const Vec3& o) { return c.zeta_correction(p, o); }, h, order);
  }
  e.norm_zeta = norm(e.psi_zeta);
  // the correction is along the chart's abelian direction
  Ad dir = unit(2);
  if (e.chart < c.gluing().k()) {
    Vec3 X = c.offset_from(e.chart, p);
    dir = X / norm(X);
  }
  double s = 0;
  for (int k = 0; k < 3; ++k) s += norm2(e.psi[k] - e.psi_zeta[k] * dir);
  e.norm_diff = std::sqrt(s);
  return e;
}

ObstructionPairing obstruction_pairing(const Pregluing& c, int radial, int polar, int azimuthal) {
  ObstructionPairing out;
  const auto& gd = c.gluing();
  const auto& bg = c.background();
  QuadRule pr = gauss_legendre(polar, -1.0, 1.0);
  for (int j = 0; j < gd.k(); ++j) {
    double r0 = gd.N * gd.delta[j];
    QuadRule rr = gauss_legendre(radial, r0, 2.0 * r0);
    double hfd = 1e-2 * r0;
    for (size_t a = 0; a < rr.x.size(); ++a)
      for (size_t b = 0; b < pr.x.size(); ++b)
        for (int m = 0; m < azimuthal; ++m) {
          double r = rr.x[a], ct = pr.x[b], st = std::sqrt(std::max(0.0, 1 - ct * ct));
          double ph = kTwoPi * m / azimuthal;
          double w = rr.w[a] * pr.w[b] * (kTwoPi / azimuthal) * r * r;
          Vec3 X{r * st * std::cos(ph), r * st * std::sin(ph), r * ct};
          const Point3& q = bg.q[j];
          for (int h = 1; h <= 3; ++h) {
            Vec3 d2 = abelian_d2([&](const Vec3& o) { return c.obstruction(h, q, X + o); }, hfd, 4);
            for (int l = 0; l < 3; ++l) out.d2[h - 1][l] += w * d2[l];
          }
          out.flat_dirac += w * abelian_codiff([&](const Vec3& o) { return c.obstruction(4, q, X + o); }, hfd, 4);
        }
  }
  return out;
}

}  // namespace forge
