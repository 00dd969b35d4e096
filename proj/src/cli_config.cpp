#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "forge/blocks.hpp"
#include "forge/cli.hpp"

namespace forge {

ConfigError::ConfigError(const std::string& src, int ln, const std::string& what)
    : std::runtime_error(src + (ln > 0 ? ":" + std::to_string(ln) : std::string()) + ": " + what),
      source(src),
      line(ln) {}

std::string to_string(Mode m) { return m == Mode::HighMass ? "highmass" : "largedistance"; }

Mode parse_mode(const std::string& s) {
  if (s == "highmass") return Mode::HighMass;
  if (s == "largedistance") return Mode::LargeDistance;
  throw std::invalid_argument("mode must be highmass or largedistance, got '" + s + "'");
}

std::string format_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double x = 0;
  const char* b = s.data();
  if (!s.empty() && s.front() == '+') ++b;
  auto r = std::from_chars(b, s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(x))
    throw std::invalid_argument("not a finite decimal number: '" + std::string(s) + "'");
  return x;
}

namespace {

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> w;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) w.push_back(s.substr(i, j - i));
    i = j;
  }
  return w;
}

int parse_int(std::string_view s) {
  int x = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  return x;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + std::string(s) + "'");
}

Vec3 parse_vec3(std::string_view s) {
  auto w = words(s);
  if (w.size() != 3) throw std::invalid_argument("expected three numbers, got '" + std::string(s) + "'");
  return {parse_double(w[0]), parse_double(w[1]), parse_double(w[2])};
}

std::string fmt(const Vec3& v) { return format_double(v.x) + " " + format_double(v.y) + " " + format_double(v.z); }

// One key: parse into the config, or render its value lines.
struct Field {
  std::string section, key;
  bool repeated = false;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<void(RunConfig&)> clear;  // repeated keys: drop the defaults on first use
  std::function<std::vector<std::string>(const RunConfig&)> get;
};

template <class T>
Field scalar(std::string section, std::string key, T RunConfig::*group, double T::*m) {
  return {section, key, false, [=](RunConfig& c, std::string_view v) { (c.*group).*m = parse_double(v); }, {},
          [=](const RunConfig& c) { return std::vector<std::string>{format_double((c.*group).*m)}; }};
}

template <class T>
Field integer(std::string section, std::string key, T RunConfig::*group, int T::*m) {
  return {section, key, false, [=](RunConfig& c, std::string_view v) { (c.*group).*m = parse_int(v); }, {},
          [=](const RunConfig& c) { return std::vector<std::string>{std::to_string((c.*group).*m)}; }};
}

template <class T>
Field boolean(std::string section, std::string key, T RunConfig::*group, bool T::*m) {
  return {section, key, false, [=](RunConfig& c, std::string_view v) { (c.*group).*m = parse_bool(v); }, {},
          [=](const RunConfig& c) { return std::vector<std::string>{(c.*group).*m ? "true" : "false"}; }};
}

template <class T>
Field vec3(std::string section, std::string key, T RunConfig::*group, Vec3 T::*m) {
  return {section, key, false, [=](RunConfig& c, std::string_view v) { (c.*group).*m = parse_vec3(v); }, {},
          [=](const RunConfig& c) { return std::vector<std::string>{fmt((c.*group).*m)}; }};
}

// Repeated key, one entry per line; "none" gives the empty list.
template <class T, class E>
Field list(std::string section, std::string key, T RunConfig::*group, std::vector<E> T::*m) {
  Field f;
  f.section = section;
  f.key = key;
  f.repeated = true;
  f.clear = [=](RunConfig& c) { ((c.*group).*m).clear(); };
  f.set = [=](RunConfig& c, std::string_view v) {
    if (v == "none") return;
    if constexpr (std::is_same_v<E, Vec3>)
      ((c.*group).*m).push_back(parse_vec3(v));
    else
      ((c.*group).*m).push_back(parse_double(v));
  };
  f.get = [=](const RunConfig& c) {
    std::vector<std::string> out;
    for (const auto& e : (c.*group).*m) {
      if constexpr (std::is_same_v<E, Vec3>)
        out.push_back(fmt(e));
      else
        out.push_back(format_double(e));
    }
    if (out.empty()) out.push_back("none");
    return out;
  };
  return f;
}

const std::vector<Field>& fields() {
  using C = RunConfig;
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    const std::string bg = "background", gl = "gluing", nu = "numerics", la = "numerics.lattice",
                      gr = "numerics.grid", pl = "numerics.planar", to = "numerics.tolerances", ca = "calibration";
    v.push_back(scalar(bg, "v", &C::background, &C::Background::v));
    v.push_back(scalar(bg, "b", &C::background, &C::Background::b));
    v.push_back(list(bg, "p", &C::background, &C::Background::p));
    v.push_back(list(bg, "q", &C::background, &C::Background::q));

    v.push_back(list(gl, "x0", &C::gluing, &C::Gluing::x0));
    v.push_back(list(gl, "tau", &C::gluing, &C::Gluing::tau));
    v.push_back(scalar(gl, "N", &C::gluing, &C::Gluing::N));
    v.push_back(scalar(gl, "kappa", &C::gluing, &C::Gluing::kappa));
    v.push_back(boolean(gl, "allow_infeasible_neck", &C::gluing, &C::Gluing::allow_infeasible_neck));

    v.push_back({nu, "mode", false,
                 [](C& c, std::string_view s) { c.numerics.mode = parse_mode(std::string(s)); }, {},
                 [](const C& c) { return std::vector<std::string>{to_string(c.numerics.mode)}; }});
    v.push_back(scalar(nu, "delta", &C::numerics, &C::Numerics::delta));
    v.push_back(scalar(nu, "sigma", &C::numerics, &C::Numerics::sigma));
    v.push_back(scalar(nu, "fd_step", &C::numerics, &C::Numerics::fd_step));
    v.push_back(scalar(nu, "d_min", &C::numerics, &C::Numerics::d_min));

    v.push_back(scalar(la, "half_width", &C::numerics, &C::Numerics::lattice_half_width));
    v.push_back(scalar(la, "spacing", &C::numerics, &C::Numerics::lattice_spacing));
    v.push_back(integer(la, "circle_points", &C::numerics, &C::Numerics::lattice_circle));
    v.push_back(vec3(la, "offset", &C::numerics, &C::Numerics::lattice_offset));
    v.push_back(scalar(la, "exclusion_radius", &C::numerics, &C::Numerics::exclusion_radius));

    v.push_back(integer(gr, "points", &C::numerics, &C::Numerics::grid_points));
    v.push_back(scalar(gr, "half_width", &C::numerics, &C::Numerics::grid_half_width));
    v.push_back(scalar(gr, "stretch", &C::numerics, &C::Numerics::grid_stretch));

    v.push_back(scalar(pl, "spacing", &C::numerics, &C::Numerics::planar_spacing));
    v.push_back(scalar(pl, "margin", &C::numerics, &C::Numerics::planar_margin));
    v.push_back(integer(pl, "circle_points", &C::numerics, &C::Numerics::planar_circle));

    v.push_back(scalar(to, "linear", &C::numerics, &C::Numerics::linear_tol));
    v.push_back(integer(to, "linear_max_iter", &C::numerics, &C::Numerics::linear_max_iter));
    v.push_back(integer(to, "deform_max_iter", &C::numerics, &C::Numerics::deform_max_iter));
    v.push_back(scalar(to, "deform_rel", &C::numerics, &C::Numerics::deform_rel_tol));
    v.push_back(scalar(to, "balance", &C::numerics, &C::Numerics::balance_tol));
    v.push_back(integer(to, "balance_max_iter", &C::numerics, &C::Numerics::balance_max_iter));
    v.push_back(list(to, "scan_lambda", &C::numerics, &C::Numerics::scan_lambda));
    v.push_back(scalar(to, "exponent_lambda_factor", &C::numerics, &C::Numerics::exponent_lambda_factor));

    v.push_back(scalar(ca, "curvature_bound", &C::calibration, &C::Calibration::curvature_bound));
    v.push_back(scalar(ca, "contraction_threshold", &C::calibration, &C::Calibration::contraction_threshold));
    v.push_back(scalar(ca, "contraction_q", &C::calibration, &C::Calibration::contraction_q));
    v.push_back(scalar(ca, "deform_factor_drop", &C::calibration, &C::Calibration::deform_factor_drop));
    v.push_back(scalar(ca, "zeta_constant", &C::calibration, &C::Calibration::zeta_constant));
    v.push_back(scalar(ca, "greens_c2", &C::calibration, &C::Calibration::greens_c2));

    v.push_back({"output", "dir", false, [](C& c, std::string_view s) { c.output_dir = std::string(s); }, {},
                 [](const C& c) { return std::vector<std::string>{c.output_dir}; }});
    return v;
  }();
  return f;
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig c;
  std::set<std::string> sections, seen;
  for (const auto& f : fields()) sections.insert(f.section);
  std::string section;
  int line = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(source, line, "malformed section header");
      section = std::string(trim(s.substr(1, s.size() - 2)));
      if (!sections.count(section)) throw ConfigError(source, line, "unknown section [" + section + "]");
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ConfigError(source, line, "expected key = value");
    std::string key(trim(s.substr(0, eq)));
    std::string_view value = trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError(source, line, "key '" + key + "' outside any section");
    const Field* f = nullptr;
    for (const auto& cand : fields())
      if (cand.section == section && cand.key == key) f = &cand;
    if (!f) throw ConfigError(source, line, "unknown key '" + key + "' in section [" + section + "]");
    std::string id = section + "." + key;
    if (seen.count(id) && !f->repeated) throw ConfigError(source, line, "duplicate key '" + key + "'");
    try {
      if (f->repeated && !seen.count(id)) f->clear(c);
      f->set(c, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source, line, key + ": " + e.what());
    }
    seen.insert(id);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 0, "cannot read configuration");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << "\n";
      section = f.section;
      out << "[" << section << "]\n";
    }
    for (const auto& v : f.get(c)) out << f.key << " = " << v << "\n";
  }
  return out.str();
}

void validate_config(const RunConfig& c) {
  const std::string src = "config";
  BackgroundData bg;
  bg.v = c.background.v;
  bg.b = c.background.b;
  for (const auto& q : c.background.q) bg.q.emplace_back(q.x, q.y, q.z);
  for (const auto& p : c.background.p) bg.p.emplace_back(p.x, p.y, p.z);
  try {
    bg.validate(bg.k() + bg.n() > 1 ? c.numerics.d_min : 0.0);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(src, 0, e.what());
  }
  const size_t k = c.background.q.size();
  if (!c.gluing.x0.empty() && c.gluing.x0.size() != k)
    throw ConfigError(src, 0, "gluing: x0 needs one entry per centre q_j");
  if (!c.gluing.tau.empty() && c.gluing.tau.size() != k)
    throw ConfigError(src, 0, "gluing: tau needs one entry per centre q_j");
  if (!(c.numerics.delta > 0 && c.numerics.delta < 0.5)) throw ConfigError(src, 0, "numerics: delta must lie in (0, 1/2)");
  if (c.numerics.grid_points < 8) throw ConfigError(src, 0, "numerics.grid: points must be at least 8");
  if (c.numerics.scan_lambda.size() < 2) throw ConfigError(src, 0, "numerics.tolerances: scan_lambda needs two values");
  if (!(c.numerics.exponent_lambda_factor > 1))
    throw ConfigError(src, 0, "numerics.tolerances: exponent_lambda_factor must exceed 1");
}

}  // namespace forge
