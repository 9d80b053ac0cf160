#pragma once

#include <functional>
#include <optional>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"
#include "degpop/solver.hpp"

namespace degpop {

/// y_t + y_a - (k y_x)_x + mu y = f chi_omega, Dirichlet walls, y(0) = y0,
/// y(t, 0, x) = int_0^A beta y da.
struct ForwardProblem {
  DiffusionCoefficient coeff;
  RateSpec rates;
  ControlRegion region;
  Grid grid;
  Field y0;                // slice
  std::optional<Field> f;  // trajectory; absent means f = 0
};

struct EnergyReport {
  /// sup_t ||y(t)||^2 over Q_{A,1}.
  double sup_norm2 = 0.0;
  /// int_0^T int_0^A ||sqrt(k) y_x||^2 da dt.
  double dissipation = 0.0;
  double max_residual = 0.0;
};

struct ForwardSolution {
  Field y;
  EnergyReport energy;
};

ForwardSolution solve_forward(const ForwardProblem& problem, const SolverOptions& options = {});

/// Energy quantities of a trajectory (diffusion evaluated with the flux stencil).
EnergyReport energy_of(const Field& trajectory, const DiffusionCoefficient& coeff);

/// Newborn profile x -> int_0^A beta(a, x) slice(a, x) da.
Field renewal_integral(const Field& slice, const std::function<double(double, double)>& beta);

/// [sup ||y||^2 + int int ||sqrt(k) y_x||^2] / [||y0||^2 + ||f||^2]; 0/0 is 0.
double energy_estimate_check(const ForwardSolution& solution, const Field& y0, const std::optional<Field>& f);

}  // namespace degpop
