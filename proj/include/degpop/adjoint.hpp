#pragma once

#include <functional>
#include <optional>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"
#include "degpop/solver.hpp"

namespace degpop {

/// v_t + v_a + (k v_x)_x - mu v [+ beta v(t, 0, x)] = f, Dirichlet walls,
/// v(T) = vT, v(t, A, x) = 0.
///
/// The solver is the exact transpose of the forward time-step maps, so the
/// renewal-dual term is present when `nonlocal` is set.
struct AdjointProblem {
  DiffusionCoefficient coeff;
  RateSpec rates;
  Grid grid;
  Field vT;                // slice
  std::optional<Field> f;  // trajectory; absent means f = 0
  bool nonlocal = true;
};

Field solve_backward(const AdjointProblem& problem, const SolverOptions& options = {});

struct SemigroupOptions {
  /// Base step; 0 selects the grid dt of the profile.
  double dt = 0.0;
  /// Implicit steps per base step.
  int substeps = 1;
  kernels::Integrator integrator = kernels::Integrator::Sdirk2;
};

/// Evolution by (k u_x)_x - mu_frozen u for duration tau (no age, no
/// renewal). tau is rounded to a whole number of base steps.
Field semigroup_apply(const Field& profile, double tau, const DiffusionCoefficient& coeff,
                      const std::function<double(double)>& mu_frozen, const SemigroupOptions& options = {});

struct CharacteristicOptions {
  /// Substeps of the semigroup (finer than the solver's step by default so
  /// that comparing against solve_backward measures the solver's error).
  int substeps = 4;
  kernels::Integrator integrator = kernels::Integrator::Sdirk2;
  /// mu as a function of x only; empty means mu = 0.
  std::function<double(double)> mu_frozen;
};

/// Characteristic-line representation of the backward solution at (t, a).
///
/// With beta = 0: S(T - t) vT(T + a - t) when T + a - t <= A, zero
/// otherwise. a = 0 gives the newborn trace S(T - t) vT(T - t). With
/// beta != 0 the renewal-dual integral
///   int_a^{min(T+a-t, A)} S(s - a) beta(s) v(s + t - a, 0) ds
/// is added once, with v(., 0) taken from the beta = 0 trace (depth-1
/// expansion).
///
/// t must be a time level and a either 0 or an age-layer center.
Field characteristic_eval(const Field& vT, double t, double a, const DiffusionCoefficient& coeff,
                          const RateSpec& rates, const CharacteristicOptions& options = {});

/// dt sum_{n=1}^{Nt} <chi f^n, v^n>: the control pairing of the scheme.
double control_pairing(const Field& f, const Field& v, const ControlRegion& region);

/// |<y(T), vT> - <y0, v(0)> - dt sum_n <chi f^n, v^n>|.
double duality_residual(const Field& y, const Field& v, const Field& f, const ControlRegion& region);

}  // namespace degpop
