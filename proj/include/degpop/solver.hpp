#pragma once

#include <functional>
#include <memory>
#include <span>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"
#include "degpop/kernels.hpp"

namespace degpop {

struct SolverOptions {
  kernels::Integrator integrator = kernels::Integrator::Sdirk2;
  kernels::Execution execution = kernels::Execution::Parallel;
  /// Verify every tridiagonal solve and fail when the relative residual
  /// exceeds residual_tolerance.
  bool check_residual = true;
  double residual_tolerance = 1e-10;
};

struct SolveStats {
  double max_residual = 0.0;
};

/// Time marching for the state system and its discrete transpose on a
/// fixed grid. Immutable after construction; the solves are const and may
/// be called concurrently.
class Propagator {
 public:
  Propagator(const Grid& grid, const DiffusionCoefficient& coeff, const RateSpec& rates,
             const ControlRegion& region, SolverOptions options = {});
  /// Without a control region (chi = 0); for backward solves.
  Propagator(const Grid& grid, const DiffusionCoefficient& coeff, const RateSpec& rates,
             SolverOptions options = {});

  const Grid& grid() const noexcept { return disc_->grid; }
  const kernels::Discretization& discretization() const noexcept { return *disc_; }
  const SolverOptions& options() const noexcept { return options_; }

  /// Full trajectory of the state from slice y0 with optional source
  /// (trajectory rank, only chi_omega f acts).
  Field forward(const Field& y0, const Field* source = nullptr, SolveStats* stats = nullptr) const;

  /// Terminal slice y(T) only; keeps two time levels in memory.
  Field forward_terminal(const Field& y0, const Field* source = nullptr, SolveStats* stats = nullptr) const;

  /// Full trajectory of the transposed scheme from terminal slice vT.
  /// `nonlocal` includes the renewal-dual term; `source` is subtracted as
  /// the right-hand side of the backward equation.
  Field backward(const Field& vT, const Field* source = nullptr, bool nonlocal = true,
                 SolveStats* stats = nullptr) const;

  /// Fills the source slice for time level n.
  using LevelSource = std::function<void(int n, std::span<double> out)>;
  /// Receives level n of the solution and of the source (empty without one).
  using LevelVisitor = std::function<void(int n, std::span<const double> v, std::span<const double> f)>;

  /// Same marching as forward() with O(slice) memory: levels are handed to
  /// `visit` from n = 0 up to Nt and then discarded.
  void forward_visit(const Field& y0, const LevelSource& source, const LevelVisitor& visit,
                     SolveStats* stats = nullptr) const;

  /// Same marching as backward() with O(slice) memory: levels are handed to
  /// `visit` from n = Nt down to 0 and then discarded.
  void backward_visit(const Field& vT, const LevelSource& source, bool nonlocal, const LevelVisitor& visit,
                      SolveStats* stats = nullptr) const;

 private:
  void check_slice(const Field& f, const char* what) const;
  void check_trajectory(const Field* f) const;
  void account(const kernels::StepStats& s, int step, SolveStats& total) const;

  std::shared_ptr<const kernels::Discretization> disc_;
  SolverOptions options_;
};

/// Copy of a slice with the Dirichlet walls x = 0, 1 set to zero.
Field project_dirichlet(Field f);

}  // namespace degpop
