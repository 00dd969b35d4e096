#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "forge/cli.hpp"

namespace forge {

namespace {

double widen_upper(double u, double s) { return u >= 0 ? u * s : u / s; }
double widen_lower(double l, double s) { return l >= 0 ? l / s : l * s; }

std::string clean(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

std::string num(double x) { return std::isnan(x) ? std::string() : format_double(x); }

const char* verdict_name(Verdict v) { return v == Verdict::Pass ? "pass" : v == Verdict::Fail ? "fail" : "info"; }

constexpr char kMagic[8] = {'M', 'N', 'P', 'L', 'F', 'R', 'G', '1'};

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("field dump truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

Row check(std::string module, std::string op, int criterion, std::string region, std::string quantity, double value,
          double lower, double upper, double tol_scale) {
  Row r{std::move(module), std::move(op), criterion, std::move(region), std::move(quantity), value, lower, upper,
        Verdict::Pass};
  double lo = std::isnan(lower) ? lower : widen_lower(lower, tol_scale);
  double hi = std::isnan(upper) ? upper : widen_upper(upper, tol_scale);
  bool ok = std::isfinite(value) && (std::isnan(lo) || value >= lo) && (std::isnan(hi) || value <= hi);
  r.verdict = ok ? Verdict::Pass : Verdict::Fail;
  return r;
}

Row info(std::string module, std::string op, int criterion, std::string region, std::string quantity, double value) {
  Row r;
  r.module = std::move(module);
  r.op = std::move(op);
  r.criterion = criterion;
  r.region = std::move(region);
  r.quantity = std::move(quantity);
  r.value = value;
  return r;
}

void write_csv(const std::filesystem::path& path, const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "module,op,criterion,region,quantity,value,lower,upper,verdict\n";
  for (const auto& r : rows)
    out << clean(r.module) << ',' << clean(r.op) << ',' << r.criterion << ',' << clean(r.region) << ','
        << clean(r.quantity) << ',' << num(r.value) << ',' << num(r.lower) << ',' << num(r.upper) << ','
        << verdict_name(r.verdict) << '\n';
}

std::vector<Row> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<Row> rows;
  std::string line;
  std::getline(in, line);
  if (line.rfind("module,op,criterion", 0) != 0) throw std::runtime_error(path.string() + ": not a forge report");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    Row r;
    r.module = f[0];
    r.op = f[1];
    r.criterion = std::stoi(f[2]);
    r.region = f[3];
    r.quantity = f[4];
    // empty cells are NaN; overflowing measurements are written as inf
    auto cell_value = [&](const std::string& c) {
      if (c.empty()) return nan;
      if (c == "inf") return std::numeric_limits<double>::infinity();
      if (c == "-inf") return -std::numeric_limits<double>::infinity();
      return parse_double(c);
    };
    r.value = cell_value(f[5]);
    r.lower = cell_value(f[6]);
    r.upper = cell_value(f[7]);
    r.verdict = f[8] == "pass" ? Verdict::Pass : f[8] == "fail" ? Verdict::Fail : Verdict::Info;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_dump(const std::filesystem::path& path, const FieldDump& d) {
  if (d.data.size() != std::size_t(d.nx) * d.ny * d.nt * d.ncomp)
    throw std::invalid_argument("field dump: data size does not match dims");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kMagic, 8);
  for (std::uint32_t v : {d.nx, d.ny, d.nt, d.ncomp}) put_le(out, v);
  for (double x : d.data) put_le(out, x);
}

FieldDump read_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error(path.string() + ": bad field dump magic");
  FieldDump d;
  d.nx = get_le<std::uint32_t>(in);
  d.ny = get_le<std::uint32_t>(in);
  d.nt = get_le<std::uint32_t>(in);
  d.ncomp = get_le<std::uint32_t>(in);
  d.data.resize(std::size_t(d.nx) * d.ny * d.nt * d.ncomp);
  for (auto& x : d.data) x = get_le<double>(in);
  return d;
}

std::vector<CriterionSummary> summarize(const std::filesystem::path& dir) {
  std::map<int, CriterionSummary> by;
  bool any = false;
  if (std::filesystem::is_directory(dir)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.path().extension() == ".csv" && e.path().filename() != "summary.csv" &&
          e.path().filename() != "failure.csv")
        files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      any = true;
      for (const auto& r : read_csv(f)) {
        if (r.criterion == 0 || r.verdict == Verdict::Info) continue;
        auto& s = by[r.criterion];
        s.criterion = r.criterion;
        ++s.rows;
        if (r.verdict == Verdict::Fail) ++s.failed;
      }
    }
  }
  if (!any) throw NothingToAggregate();
  std::vector<CriterionSummary> out;
  for (const auto& [c, s] : by) out.push_back(s);
  return out;
}

}  // namespace forge
