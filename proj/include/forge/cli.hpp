#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "forge/core.hpp"

namespace forge {

// --- configuration -----------------------------------------------------------

struct ConfigError : std::runtime_error {
  ConfigError(const std::string& source, int line, const std::string& what);
  std::string source;
  int line = 0;
};

enum class Mode { HighMass, LargeDistance };
std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct RunConfig {
  struct Background {
    double v = 99.378083412622746;  // lambda = 100 for a single centre
    double b = 0;
    std::vector<Vec3> p;  // (x, y, t)
    std::vector<Vec3> q{Vec3{0, 0, 0}};
    bool operator==(const Background&) const = default;
  } background;

  struct Gluing {
    std::vector<Vec3> x0{Vec3{0.3, 0, 0}};  // one per centre, or empty for zeros
    std::vector<double> tau{0.7};
    double N = 2.2;
    double kappa = 0.5;
    bool allow_infeasible_neck = true;
    bool operator==(const Gluing&) const = default;
  } gluing;

  struct Numerics {
    Mode mode = Mode::HighMass;
    double delta = 0.25;
    double sigma = 0.5;
    double fd_step = 1e-4;
    double d_min = 5;
    // residual lattice
    double lattice_half_width = 8;
    double lattice_spacing = 0.5;
    int lattice_circle = 16;
    Vec3 lattice_offset{0.25, 0.25, 0.2};
    double exclusion_radius = 1.5;
    // solver grid around each centre
    int grid_points = 32;
    double grid_half_width = 0.8;
    double grid_stretch = 3.3;
    // large-distance planar grid
    double planar_spacing = 0.5;
    double planar_margin = 6;
    int planar_circle = 8;
    // tolerances
    double linear_tol = 1e-8;
    int linear_max_iter = 20000;
    int deform_max_iter = 5;
    double deform_rel_tol = 1e-6;
    double balance_tol = 1e-10;
    int balance_max_iter = 10;
    std::vector<double> scan_lambda{6400, 25600, 102400};
    double exponent_lambda_factor = 4;
    bool operator==(const Numerics&) const = default;
  } numerics;

  // Frozen calibration constants; echoed in every report.
  struct Calibration {
    double curvature_bound = 2.0;      // (lambda^-2 + rho^2)|d_A Phi|
    double contraction_threshold = 1;  // ||pi(Psi)|| above which deform refuses to start
    double contraction_q = 0.5;        // per-iteration factor bound
    double deform_factor_drop = 10;    // decrease over the run
    double zeta_constant = 1;          // |zeta| <= C lambda^{-1/2}
    double greens_c2 = 0.1;            // |G - a0/2 + 1/(2 rho)| <= C2 rho^2
    bool operator==(const Calibration&) const = default;
  } calibration;

  std::string output_dir = "forge-out";

  bool operator==(const RunConfig&) const = default;
};

// Line-oriented "[section]" / "key = value" text; '#' starts a comment.
// Repeated keys (p, q, x0, tau) append. Unknown sections or keys throw
// ConfigError with the line number.
RunConfig parse_config(std::string_view text, const std::string& source = "<string>");
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& c);
// Semantic checks (distinct centres, counts); throws ConfigError with line 0.
void validate_config(const RunConfig& c);

// Shortest text that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view s);

// --- report rows ---------------------------------------------------------------

enum class Verdict { Pass, Fail, Info };

struct Row {
  std::string module, op;
  int criterion = 0;  // 0: not tied to an acceptance criterion
  std::string region, quantity;
  double value = 0;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  Verdict verdict = Verdict::Info;
};

// value within [lower, upper] (NaN bounds are open); the bounds are scaled
// away from the value's side by tol_scale.
Row check(std::string module, std::string op, int criterion, std::string region, std::string quantity, double value,
          double lower, double upper, double tol_scale = 1.0);
Row info(std::string module, std::string op, int criterion, std::string region, std::string quantity, double value);

void write_csv(const std::filesystem::path& path, const std::vector<Row>& rows);
std::vector<Row> read_csv(const std::filesystem::path& path);

// --- field dumps -----------------------------------------------------------------

struct FieldDump {
  std::uint32_t nx = 0, ny = 0, nt = 0, ncomp = 0;
  std::vector<double> data;  // row-major (i, j, k, c)
};
void write_dump(const std::filesystem::path& path, const FieldDump& d);
FieldDump read_dump(const std::filesystem::path& path);

// --- commands ----------------------------------------------------------------------

struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::optional<Mode> mode;
  std::optional<std::filesystem::path> out;
  std::uint64_t seed = 20240611;
  double tol_scale = 1.0;
};

// Exit status: 0 all checks pass, 1 a check failed, 2 configuration error,
// 3 numerical failure (diagnostics written to <out>/failure.csv).
int run_command(const std::string& command, const RunOptions& opt, std::ostream& out, std::ostream& err);

struct CriterionSummary {
  int criterion = 0;
  int rows = 0, failed = 0;
  bool pass() const { return failed == 0; }
};
struct NothingToAggregate : std::runtime_error {
  NothingToAggregate() : std::runtime_error("nothing to aggregate") {}
};
// Reads every *.csv except summary.csv in dir.
std::vector<CriterionSummary> summarize(const std::filesystem::path& dir);

}  // namespace forge
