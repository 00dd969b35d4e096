#include <algorithm>
#include <map>

#include "forge/analysis.hpp"

namespace forge {

WeightSpec::WeightSpec(WeightMode mode, double delta, const BackgroundData& bg, std::vector<double> lambda,
                       double sigma, double softmin_power)
    : mode_(mode), delta_(delta), sigma_(sigma), power_(softmin_power), bg_(bg), lambda_(std::move(lambda)) {
  if (!(delta > 0 && delta < 0.5)) throw std::invalid_argument("weights: delta must lie in (0, 1/2)");
  if (!(sigma > 0)) throw std::invalid_argument("weights: sigma must be positive");
  cells_.push_back(0.0);
  for (const auto& q : bg_.q) cells_.push_back(q.z());
  if (mode_ == WeightMode::LargeDistance) d_ = bg_.k() + bg_.n() > 1 ? bg_.min_distance() : 1.0;
}

double WeightSpec::w(int j, double rho) const {
  double L = lambda_.at(j);
  double c = cutoff(2.0 * rho);
  return c * std::sqrt(1.0 / (L * L) + rho * rho) + (1.0 - c);
}

double WeightSpec::rho_hat(double rho) const {
  double c = cutoff(rho / sigma_);
  return c * rho + (1.0 - c);
}

double WeightSpec::r_tilde(std::complex<double> zeta) const {
  double s = 0;
  for (const auto& c : cells_) {
    double r = std::abs(zeta - c / d_);
    if (r == 0.0) return 0.0;
    s += std::pow(r, -power_);
  }
  return std::pow(s, -1.0 / power_);
}

double WeightSpec::omega(const Point3& p) const {
  if (mode_ == WeightMode::HighMass) return std::sqrt(1.0 + std::norm(p.z()));
  double r = r_tilde(p.z() / d_);
  return std::sqrt(1.0 + d_ * d_ * r * r);
}

Vec3 WeightSpec::grad_omega(const Point3& p) const {
  const double h = 1e-4;
  return Vec3{(omega(Point3(p.x + h, p.y, p.t)) - omega(Point3(p.x - h, p.y, p.t))) / (2 * h),
              (omega(Point3(p.x, p.y + h, p.t)) - omega(Point3(p.x, p.y - h, p.t))) / (2 * h), 0.0};
}

double WeightSpec::laplacian_omega(const Point3& p) const {
  const double h = 1e-3;
  double c = omega(p);
  return (omega(Point3(p.x + h, p.y, p.t)) + omega(Point3(p.x - h, p.y, p.t)) + omega(Point3(p.x, p.y + h, p.t)) +
          omega(Point3(p.x, p.y - h, p.t)) - 4 * c) /
         (h * h);
}

double WeightSpec::partition(int j, const Point3& p) const {
  const int n = static_cast<int>(cells_.size());
  std::vector<double> dist(n), raw(n);
  for (int i = 0; i < n; ++i) dist[i] = std::abs(p.z() - cells_[i]);
  double total = 0;
  for (int i = 0; i < n; ++i) {
    double other = std::numeric_limits<double>::infinity();
    for (int h = 0; h < n; ++h)
      if (h != i) other = std::min(other, dist[h]);
    // margin >= 1/2 inside the cell core, <= -1/2 well outside
    raw[i] = n == 1 ? 1.0 : cutoff(1.5 - (other - dist[i]));
    total += raw[i];
  }
  return raw.at(j) / total;
}

void WeightSpec::weights(const Point3& p, int m, std::vector<std::pair<Region, double>>& out) const {
  out.clear();
  bool exterior = true;
  for (int i = 0; i < bg_.n(); ++i) {
    double r = distance(bg_.p[i], p);
    if (r < sigma_) exterior = false;
    if (r < 2 * sigma_) out.push_back({{Region::Singular, i}, std::pow(rho_hat(r), -delta_ - m - 1.5)});
  }
  for (int j = 0; j < bg_.k(); ++j) {
    double r = distance(bg_.q[j], p);
    if (r < 0.5) exterior = false;
    if (r < 1.0) out.push_back({{Region::Centre, j}, std::pow(w(j, r), delta_ - m - 1.5)});
  }
  if (exterior) out.push_back({{Region::Exterior, 0}, std::pow(omega(p), delta_ - m - 1.0)});
}

namespace {

using Key = std::pair<int, int>;

Key key(const WeightSpec::Region& r) { return {static_cast<int>(r.kind), r.index}; }

}  // namespace

double weighted_norm(const std::vector<WeightedSample>& s, const WeightSpec& spec, int m) {
  std::map<Key, double> acc;
  std::vector<std::pair<WeightSpec::Region, double>> w;
  for (const auto& x : s) {
    spec.weights(x.p, m, w);
    for (const auto& [r, wt] : w) acc[key(r)] += x.vol * wt * wt * x.u2;
  }
  double best = 0;
  for (const auto& [k, v] : acc) best = std::max(best, std::sqrt(v));
  return best;
}

double weighted_sobolev_norm(const std::vector<WeightedSample>& s, const WeightSpec& spec, int m) {
  std::map<Key, double> acc;
  std::vector<std::pair<WeightSpec::Region, double>> w0, w1;
  for (const auto& x : s) {
    spec.weights(x.p, m, w0);
    spec.weights(x.p, m - 1, w1);
    for (size_t i = 0; i < w0.size(); ++i) {
      double a = w0[i].second, b = w1[i].second;
      acc[key(w0[i].first)] += x.vol * (a * a * x.u2 + b * b * (x.grad2 + x.bracket2));
    }
  }
  double best = 0;
  for (const auto& [k, v] : acc) best = std::max(best, std::sqrt(v));
  return best;
}

double LogProfile::value(const Point3& p) const {
  double r = std::abs(p.z() - centre);
  if (r <= 1.0) return 0.0;
  return -(1.0 - cutoff(r)) * std::log(r) / (4 * kPi * kPi);
}

Vec3 LogProfile::grad(const Point3& p) const {
  std::complex<double> d = p.z() - centre;
  double r = std::abs(d);
  if (r <= 1.0) return {};
  double psi = 1.0 - cutoff(r), dpsi = -cutoff_deriv(r);
  double dv = -(dpsi * std::log(r) + psi / r) / (4 * kPi * kPi);
  return Vec3{dv * d.real() / r, dv * d.imag() / r, 0.0};
}

double LogProfile::laplacian(const Point3& p) const {
  double r = std::abs(p.z() - centre);
  if (r <= 1.0) return 0.0;
  double psi = 1.0 - cutoff(r), dpsi = -cutoff_deriv(r), ddpsi = -cutoff_deriv2(r);
  double c = -1.0 / (4 * kPi * kPi);
  double dv = c * (dpsi * std::log(r) + psi / r);
  double ddv = c * (ddpsi * std::log(r) + 2 * dpsi / r - psi / (r * r));
  return -(ddv + dv / r);
}

std::vector<std::array<double, 3>> alpha_map(const std::vector<DiagonalSample>& f, const WeightSpec& spec,
                                             double tol) {
  Vec3 total{};
  for (const auto& s : f) total += s.vol * s.f;
  for (int h = 0; h < 3; ++h)
    if (std::abs(total[h]) > tol) throw UnbalancedSource();
  const int n = static_cast<int>(spec.cell_centres().size());
  std::vector<std::array<double, 3>> a(n, {0, 0, 0});
  for (const auto& s : f)
    for (int j = 0; j < n; ++j) {
      double c = spec.partition(j, s.p);
      if (c == 0.0) continue;
      for (int h = 0; h < 3; ++h) a[j][h] += s.vol * c * s.f[h];
    }
  return a;
}

}  // namespace forge
