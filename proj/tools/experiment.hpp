#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "degpop/certify.hpp"
#include "degpop/errors.hpp"
#include "degpop/solver.hpp"

namespace degpop::cli {

using nlohmann::ordered_json;

/// Malformed or inconsistent configuration (unknown key, wrong type, ...).
class ConfigError : public ParameterError {
 public:
  using ParameterError::ParameterError;
  const char* kind() const noexcept override { return "config"; }
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitConvergence = 4;

struct GridConfig {
  double T = 1.0, A = 2.0;
  int Nt = 128;
  std::optional<int> Na;  // derived from A / dt when absent
  int Nx = 200;
  double x0 = 0.3;
};

struct CoefficientConfig {
  std::string preset = "power_law";  // power_law | constant
  double alpha = 0.5;
  double value = 1.0;
};

struct MuConfig {
  std::string preset = "constant";  // zero | constant | gaussian_bump
  double value = 0.2;               // constant level, also the bump's base
  double amplitude = 1.0;
  double center_a = 1.0;
  double center_x = 0.5;
  double width = 0.2;
};

struct BetaConfig {
  std::string preset = "ramp";  // zero | ramp | bump
  double slope = 1.0;           // ramp: slope * (a - abar)_+
  double amplitude = 1.0;       // bump: amplitude * sin^2(pi (a - abar)/(A - abar)) for a > abar
};

struct RatesConfig {
  MuConfig mu;
  BetaConfig beta;
  double abar = 0.25;
};

struct RegionConfig {
  std::string kind = "single";  // single | pair
  double alpha = 0.2, rho = 0.45;
  double lambda1 = 0.15, rho1 = 0.25, lambda2 = 0.35, rho2 = 0.45;
};

struct WeightsConfig {
  bool automatic = true;  // "auto": c1 = 1, default c2, s = 1, kappa = 1
  WeightParams params;
};

struct SolverConfig {
  std::string integrator = "sdirk2";     // sdirk2 | backward_euler
  std::string execution = "parallel";    // parallel | serial
  bool check_residual = true;
};

/// Initial or terminal datum.
struct DatumConfig {
  std::string preset = "smooth";  // zero | smooth | sample | csv
  double scale = 1.0;
  int sample_id = 0;
  std::string path;  // csv
};

struct CommandConfig {
  std::string name;  // simulate | adjoint | certify | control | sweep
  std::uint64_t seed = 42;
  // simulate / adjoint
  DatumConfig datum;
  std::string source = "zero";  // zero | sample
  bool nonlocal = true;
  std::string fields = "trajectory";  // trajectory | terminal
  // certify
  std::string inequality = "carleman";
  std::vector<double> s;  // empty: s_ref * {1, 2, 4, 8} for carleman, weights.s otherwise
  int samples = 20;
  std::string variant = "oi";  // oi | t_less_a
  double omega_inner_lo = 0.38, omega_inner_hi = 0.42;
  double B1 = 0.5, B2 = 0.9;
  bool weight_table = false;
  // certify (observability) / control
  double delta = 1.5;
  // control
  double epsilon = 1e-6;
  int max_iters = 200;
  double cg_tol = 1e-8;
  // sweep
  ordered_json run;  // inner command block
  std::vector<std::pair<std::string, std::vector<ordered_json>>> over;
};

struct ExperimentConfig {
  GridConfig grid;
  CoefficientConfig coefficient;
  RatesConfig rates;
  RegionConfig region;
  WeightsConfig weights;
  SolverConfig solver;
  CommandConfig command;
};

/// Parses a config document; every block and key is optional, unknown keys
/// are errors. Numeric fields are range-checked here; model-level checks
/// run when the objects are built.
ExperimentConfig parse_config(const ordered_json& doc);

/// Fully resolved config (defaults expanded); parse_config(to_json(c)) == c.
ordered_json to_json(const ExperimentConfig& c);

/// Model objects built from a config.
Grid make_grid(const GridConfig& c);
DiffusionCoefficient make_coefficient(const CoefficientConfig& c, const Grid& g);
RateSpec make_rates(const RatesConfig& c, double A);
ControlRegion make_region(const RegionConfig& c, double x0);
SolverOptions make_solver(const SolverConfig& c);

/// Runs the command into `run_dir` (created if needed): config.json echo,
/// CSV outputs, summary.json on success or error.json on failure. Returns
/// the process exit status.
int run(const ExperimentConfig& config, const std::filesystem::path& run_dir);

/// Maps an exception onto an exit status.
int exit_code_for(const std::exception& e) noexcept;

/// Writes error.json for a failure that happened before run() started.
void write_error(const std::filesystem::path& run_dir, const std::exception& e, int code);

}  // namespace degpop::cli
