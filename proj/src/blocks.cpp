#include "forge/blocks.hpp"

#include <algorithm>
#include <limits>

namespace forge {

double BackgroundData::min_distance() const {
  double d = std::numeric_limits<double>::infinity();
  std::vector<Point3> all = q;
  all.insert(all.end(), p.begin(), p.end());
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j) d = std::min(d, distance(all[i], all[j]));
  return d;
}

double BackgroundData::max_distance() const {
  double d = 0;
  for (size_t j = 0; j < q.size(); ++j) {
    for (size_t h = j + 1; h < q.size(); ++h) d = std::max(d, std::abs(q[j].z() - q[h].z()));
    for (const auto& pi : p) d = std::max(d, std::abs(q[j].z() - pi.z()));
  }
  return d;
}

void BackgroundData::validate(double d_min) const {
  if (q.empty()) throw std::invalid_argument("background: at least one centre q_j is required");
  std::vector<Point3> all = q;
  all.insert(all.end(), p.begin(), p.end());
  for (size_t i = 0; i < all.size(); ++i)
    for (size_t j = i + 1; j < all.size(); ++j)
      if (distance(all[i], all[j]) < 1e-12)
        throw std::invalid_argument("background: singular points p_i and centres q_j must be pairwise distinct");
  std::complex<double> zs = 0;
  double ts = 0;
  for (const auto& c : q) {
    zs += c.z();
    ts += wrap_signed(c.t);
  }
  if (std::abs(zs) > 1e-9) throw std::invalid_argument("background: centres must satisfy sum z_j = 0");
  if (std::abs(wrap_signed(ts)) > 1e-9) throw std::invalid_argument("background: centres must satisfy sum t_j = 0 mod 2pi");
  if (all.size() > 1 && min_distance() < d_min)
    throw std::invalid_argument("background: minimum distance d is below d0");
}

LocalMasses local_masses(const GreensFunction& G, const BackgroundData& bg) {
  LocalMasses lm;
  const int k = bg.k();
  double a0 = G.a0();
  for (int j = 0; j < k; ++j) {
    double closed = bg.v + a0;
    double direct = bg.v + a0;
    for (int h = 0; h < k; ++h) {
      if (h == j) continue;
      closed += std::log(std::abs(bg.q[h].z() - bg.q[j].z())) / kPi;
      direct += 2.0 * G(displacement(bg.q[h], bg.q[j]));
    }
    for (const auto& pi : bg.p) {
      closed -= std::log(std::abs(pi.z() - bg.q[j].z())) / kTwoPi;
      direct -= G(displacement(pi, bg.q[j]));
    }
    lm.lambda.push_back(closed);
    lm.lambda_direct.push_back(direct);
  }
  lm.lambda_min = *std::min_element(lm.lambda_direct.begin(), lm.lambda_direct.end());
  lm.lambda_max = *std::max_element(lm.lambda_direct.begin(), lm.lambda_direct.end());
  lm.d = bg.min_distance();
  lm.predicted_slope = (k - 1 - 0.5 * bg.n()) / kPi;
  return lm;
}

AdmissibilityReport check_admissible(const GreensFunction& G, const BackgroundData& bg, double lambda0, double d0,
                                     double K, double K_prime) {
  AdmissibilityReport r;
  double d = (bg.k() + bg.n() > 1) ? bg.min_distance() : std::numeric_limits<double>::infinity();
  r.distance_ok = d >= d0;
  LocalMasses lm = local_masses(G, bg);
  r.mass_ok = lm.lambda_min > lambda0;
  r.ratio_ok = lm.lambda_max <= K * lm.lambda_min;
  r.sign_ok = (bg.n() != 2 * bg.k()) || bg.v > 0;
  r.large_distance_ok = bg.max_distance() <= K_prime * d;
  return r;
}

double dirac_higgs(const GreensFunction& G, const Point3& p, const Point3& singularity, int charge, double mass) {
  if (charge == 0) return mass;
  return mass + charge * G(displacement(singularity, p));
}

StringChart preferred_chart(const Point3& anchor, const Point3& singularity) {
  return wrap_signed(anchor.t - singularity.t) >= 0 ? StringChart::North : StringChart::South;
}

Vec3 dirac_potential(const GreensFunction& G, StringChart chart, const Point3& anchor, const Vec3& offset,
                     const Point3& singularity, int charge, double b) {
  Vec3 a{0, 0, b};
  if (charge == 0) return a;
  Vec3 d = displacement(singularity, anchor) + offset;
  double r2 = d.x * d.x + d.y * d.y;
  double r = std::sqrt(r2);
  double s = d.z;
  double shift = chart == StringChart::North ? 0.0 : 1.0;
  if (r == 0) {
    // on the axis: regular only where the chart's integer matches
    double sr = wrap_signed(s);
    double level = -std::floor((s + kPi) / kTwoPi) + (sr < 0 ? 1.0 : 0.0);
    if (sr == 0 || level != shift) throw StringError();
    return a;
  }
  double u = G.axial_potential(r, s) - shift;
  a.x += charge * u * (-d.y) / r2;
  a.y += charge * u * d.x / r2;
  return a;
}

AbelianField::AbelianField(std::shared_ptr<const GreensFunction> G, double v, double b,
                           std::vector<AbelianSource> sources)
    : G_(std::move(G)), v_(v), b_(b), src_(std::move(sources)) {}

void AbelianField::eval(const Point3& anchor, const Vec3& offset, double& phi, Vec3& a) const {
  phi = v_;
  a = Vec3{0, 0, b_};
  for (const auto& s : src_) {
    Vec3 d = displacement(s.pos, anchor) + offset;
    if (s.charge != 0) {
      phi += s.charge * (*G_)(d);
      a += dirac_potential(*G_, preferred_chart(anchor, s.pos), anchor, offset, s.pos, s.charge, 0.0);
    }
    if (norm2(s.dipole) > 0) {
      Vec3 g = G_->grad(d);
      phi -= 2.0 * dot(s.dipole, g);
      a -= 2.0 * cross(g, s.dipole);
    }
  }
}

FieldValue AbelianField::value(const Point3& anchor, const Vec3& offset) const {
  double phi;
  Vec3 a;
  eval(anchor, offset, phi, a);
  FieldValue f;
  f.psi = Vec3{0, 0, phi};
  for (int i = 0; i < 3; ++i) f.a[i] = Vec3{0, 0, a[i]};
  return f;
}

double AbelianField::phi(const Point3& p) const {
  double phi = v_;
  for (const auto& s : src_) {
    Vec3 d = displacement(s.pos, p);
    if (s.charge != 0) phi += s.charge * (*G_)(d);
    if (norm2(s.dipole) > 0) phi -= 2.0 * dot(s.dipole, G_->grad(d));
  }
  return phi;
}

Vec3 AbelianField::grad_phi(const Point3& p) const {
  Vec3 g{};
  for (const auto& s : src_) {
    Vec3 d = displacement(s.pos, p);
    if (s.charge != 0) g += s.charge * G_->grad(d);
    if (norm2(s.dipole) > 0) {
      // -2 (s . grad) grad G by central differences of the analytic gradient
      const double h = 1e-5;
      Vec3 gp = G_->grad(d + h * s.dipole / norm(s.dipole));
      Vec3 gm = G_->grad(d - h * s.dipole / norm(s.dipole));
      g -= 2.0 * norm(s.dipole) * (gp - gm) / (2 * h);
    }
  }
  return g;
}

AbelianField c_ext_field(std::shared_ptr<const GreensFunction> G, const BackgroundData& bg,
                         const std::vector<Vec3>& dipoles) {
  std::vector<AbelianSource> src;
  for (int j = 0; j < bg.k(); ++j)
    src.push_back({bg.q[j], 2, j < static_cast<int>(dipoles.size()) ? dipoles[j] : Vec3{}});
  for (const auto& pi : bg.p) src.push_back({pi, -1, {}});
  return AbelianField(std::move(G), bg.v, bg.b, std::move(src));
}

ChartField build_c_ext(std::shared_ptr<const GreensFunction> G, const BackgroundData& bg) {
  auto field = std::make_shared<AbelianField>(c_ext_field(std::move(G), bg));
  ChartField cf;
  std::vector<Point3> sing = bg.q;
  sing.insert(sing.end(), bg.p.begin(), bg.p.end());
  cf.add(Chart{"abelian", "c_ext",
               [sing](const Point3& p) {
                 double m = std::numeric_limits<double>::infinity();
                 for (const auto& s : sing) m = std::min(m, distance(s, p));
                 return m;
               },
               [field](const Point3& anchor, const Vec3& offset) { return field->value(anchor, offset); }});
  return cf;
}

// --- PS monopole ----------------------------------------------------------

double ps_phi_over_r(double r) {
  if (r < 0.05) {
    double r2 = r * r;
    return 1.0 / 3.0 + r2 * (-1.0 / 45.0 + r2 * (2.0 / 945.0 - r2 / 4725.0));
  }
  return (1.0 / std::tanh(r) - 1.0 / r) / r;
}

double ps_f_over_r(double r) {
  if (r < 0.05) {
    double r2 = r * r;
    return -1.0 / 6.0 + r2 * (7.0 / 360.0 + r2 * (-31.0 / 15120.0 + r2 * 127.0 / 604800.0));
  }
  double inv_sinh = r > 700 ? 0.0 : 1.0 / std::sinh(r);
  return (inv_sinh - 1.0 / r) / r;
}

FieldValue ps_eval(const PSMonopole& m, const Vec3& x) {
  const double L = m.scale;
  Vec3 X = L * x - m.x0;
  double r = norm(X);
  FieldValue f;
  double po = ps_phi_over_r(r), fo = ps_f_over_r(r);
  f.psi = (L * po) * X;
  for (int i = 0; i < 3; ++i) f.a[i] = (L * fo) * cross(unit(i), X);
  if (m.tau != 0.0 && r > 1.0) {
    // rotation by tau * beta(r) about x^, beta switching on over 1 <= r <= 2
    Vec3 n = X / r;
    double beta = 1.0 - smooth_step(r), dbeta = -smooth_step_deriv(r);
    Vec3 w = (m.tau * beta) * n;
    std::array<Vec3, 3> dw;
    for (int i = 0; i < 3; ++i)
      dw[i] = (m.tau * L) * (dbeta * n[i] * n + (beta / r) * (unit(i) - n[i] * n));
    f = apply_gauge(rotation_gauge(w, dw), f);
  }
  return f;
}

RotationGauge rotation_gauge(const Vec3& w, const std::array<Vec3, 3>& dw) {
  RotationGauge g;
  g.R = rotation_from_vector(w);
  double th2 = norm2(w), th = std::sqrt(th2);
  double c1, c2;  // (1 - cos th)/th^2, (th - sin th)/th^3
  if (th < 1e-3) {
    c1 = 0.5 - th2 / 24.0 + th2 * th2 / 720.0;
    c2 = 1.0 / 6.0 - th2 / 120.0 + th2 * th2 / 5040.0;
  } else {
    c1 = (1.0 - std::cos(th)) / th2;
    c2 = (th - std::sin(th)) / (th2 * th);
  }
  for (int i = 0; i < 3; ++i) {
    Vec3 wx = cross(w, dw[i]);
    g.conn[i] = dw[i] + c1 * wx + c2 * cross(w, wx);
  }
  return g;
}

FieldValue apply_gauge(const RotationGauge& g, const FieldValue& f) {
  FieldValue r;
  r.psi = g.R * f.psi;
  for (int i = 0; i < 3; ++i) r.a[i] = g.R * f.a[i] + g.conn[i];
  return r;
}

Vec3 minimal_rotation(const Vec3& u, const std::array<Vec3, 3>& du, const Vec3& v, const std::array<Vec3, 3>& dv,
                      std::array<Vec3, 3>& dw) {
  Vec3 c = cross(u, v);
  double s = norm(c), d = dot(u, v);
  if (!(d > -1.0 + 1e-12) && s < 1e-6) throw std::domain_error("minimal rotation undefined for antipodal vectors");
  double n2 = s * s + d * d;
  double th = std::atan2(s, d);
  double th_over_s, g1;
  if (s < 1e-3 && d > 0) {
    double s2 = s * s, d3 = d * d * d;
    th_over_s = 1.0 / d - s2 / (3.0 * d3) + s2 * s2 / (5.0 * d3 * d * d);
    g1 = -2.0 / (3.0 * d3) + 4.0 * s2 / (5.0 * d3 * d * d);
  } else {
    th_over_s = th / s;
    g1 = (d / n2 - th_over_s) / (s * s);
  }
  for (int i = 0; i < 3; ++i) {
    Vec3 dc = cross(du[i], v) + cross(u, dv[i]);
    double dd = dot(du[i], v) + dot(u, dv[i]);
    dw[i] = th_over_s * dc + (g1 * dot(c, dc) - dd / n2) * c;
  }
  return th_over_s * c;
}

FieldValue euclidean_dirac(const Vec3& x, double charge, double mass) {
  double r = norm(x);
  if (!(r > 0)) throw PoleError();
  double den = r * (r + x.z);
  if (!(den > 0)) throw StringError();
  FieldValue f;
  f.psi = Vec3{0, 0, mass - charge / (2.0 * r)};
  double c = 0.5 * charge / den;
  f.a[0] = Vec3{0, 0, -c * x.y};
  f.a[1] = Vec3{0, 0, c * x.x};
  return f;
}

FieldValue straighten(const Vec3& x, const FieldValue& f) {
  double r = norm(x);
  if (!(r > 0)) throw std::domain_error("Higgs zero");
  Vec3 n = x / r;
  if (n.z <= -1.0 + 1e-14) throw StringError();
  std::array<Vec3, 3> dn, zero{};
  for (int i = 0; i < 3; ++i) dn[i] = (unit(i) - n[i] * n) / r;
  std::array<Vec3, 3> dw;
  Vec3 w = minimal_rotation(n, dn, unit(2), zero, dw);
  return apply_gauge(rotation_gauge(w, dw), f);
}

AbelianGaugeResult ps_abelian_gauge(const PSMonopole& m, const Vec3& x) {
  Vec3 c = ps_zero(m);
  Vec3 X = x - c;
  PSMonopole untwisted = m;
  untwisted.tau = 0.0;  // the phase is absorbed by the reference trivialization
  AbelianGaugeResult res;
  res.gauged = straighten(X, ps_eval(untwisted, x));
  res.remainder = res.gauged - euclidean_dirac(X, 2.0, m.scale);
  return res;
}

}  // namespace forge
