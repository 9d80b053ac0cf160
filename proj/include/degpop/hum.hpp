#pragma once

#include <vector>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"
#include "degpop/solver.hpp"

namespace degpop {

/// Null control on the target ages (delta, A) at time T by penalized HUM.
struct HumProblem {
  DiffusionCoefficient coeff;
  RateSpec rates;
  ControlRegion region;
  Grid grid;
  Field y0;  // slice
  double delta = 0.0;
  double epsilon = 1e-6;
  int max_iters = 200;
  double cg_tol = 1e-8;
};

/// Throws ParameterError unless T < A with delta in (T, A), or A < T with
/// delta in (abar, A); also checks epsilon > 0 and cg_tol in (0, 1).
void validate(const HumProblem& problem);

struct HumResult {
  Field control;        // trajectory, vanishes outside omega
  Field terminal_data;  // minimizer wT, slice supported on (delta, A)
  double terminal_residual = 0.0;  // ||y(T)|| on (delta, A) x (0,1)
  double control_norm = 0.0;       // ||f|| in the scheme's L2(Q) pairing
  double y0_norm = 0.0;
  double cost_ratio = 0.0;         // control_norm / ||y0||
  int iterations = 0;
  std::vector<double> cg_residual_trace{};  // relative residuals, starting at 1
  std::vector<double> energy_trace{};       // penalized HUM functional per iterate
};

/// Raised when the iteration budget runs out; carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, HumResult partial)
      : Error(what), partial_(std::move(partial)) {}
  const char* kind() const noexcept override { return "convergence"; }
  const HumResult& partial() const noexcept { return partial_; }

 private:
  HumResult partial_;
};

/// The control-to-terminal-state map on the target set,
///   w -> y(T)|_(delta,A),  y from y0 = 0 and f = chi v[w],
/// with v the backward solution (renewal-dual term on) from w. Symmetric
/// positive semidefinite in the slice inner product.
class Gramian {
 public:
  Gramian(const HumProblem& problem, SolverOptions options = {});

  Field apply(const Field& w) const;
  /// chi_omega v[w] on the whole trajectory.
  Field control_for(const Field& w) const;
  /// Uncontrolled terminal state.
  Field free_terminal(const Field& y0) const;
  /// Terminal state driven by y0 and f.
  Field terminal(const Field& y0, const Field& f) const;

  const Box& target() const noexcept { return target_; }
  const Propagator& propagator() const noexcept { return prop_; }

 private:
  Propagator prop_;
  ControlRegion region_;
  Box target_;
};

Field gramian_apply(const Field& wT, const HumProblem& problem, const SolverOptions& options = {});

HumResult synthesize_control(const HumProblem& problem, const SolverOptions& options = {});

struct NullReport {
  double terminal_residual = 0.0;  // recomputed by an independent forward run
  double internal_residual = 0.0;  // value carried by the HumResult
  double control_norm = 0.0;
  double cost_ratio = 0.0;
  double outside_max = 0.0;        // max |f| outside omega (must be 0)
};

/// Replays the forward solve with the synthesized control and checks the
/// terminal residual against the solver's own value (relative 1e-10 of
/// ||y0||); raises ConsistencyError on disagreement.
NullReport verify_null(const HumResult& result, const HumProblem& problem, const SolverOptions& options = {});

}  // namespace degpop
