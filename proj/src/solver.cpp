#include "degpop/solver.hpp"

#include <algorithm>
#include <cmath>

namespace degpop {

Propagator::Propagator(const Grid& grid, const DiffusionCoefficient& coeff, const RateSpec& rates,
                       const ControlRegion& region, SolverOptions options)
    : disc_(std::make_shared<const kernels::Discretization>(grid, coeff, rates, region.indicator(grid),
                                                            options.integrator)),
      options_(options) {}

Propagator::Propagator(const Grid& grid, const DiffusionCoefficient& coeff, const RateSpec& rates,
                       SolverOptions options)
    : disc_(std::make_shared<const kernels::Discretization>(
          grid, coeff, rates, std::vector<double>(grid.space_nodes(), 0.0), options.integrator)),
      options_(options) {}

void Propagator::check_slice(const Field& f, const char* what) const {
  if (!(f.grid() == grid()) || f.rank() != Rank::Slice) {
    throw ShapeError(std::string(what) + ": expected a slice on the solver grid");
  }
  if (!f.all_finite()) throw ParameterError(std::string(what) + ": non-finite values");
}

void Propagator::check_trajectory(const Field* f) const {
  if (f == nullptr) return;
  if (!(f->grid() == grid()) || f->rank() != Rank::Trajectory) {
    throw ShapeError("source: expected a trajectory on the solver grid");
  }
  if (!f->all_finite()) throw ParameterError("source: non-finite values");
}

void Propagator::account(const kernels::StepStats& s, int step, SolveStats& total) const {
  if (s.breakdown) throw SolverError("tridiagonal pivot breakdown", step);
  if (options_.check_residual && s.max_residual > options_.residual_tolerance) {
    throw SolverError("linear residual " + std::to_string(s.max_residual) + " above tolerance", step);
  }
  total.max_residual = std::max(total.max_residual, s.max_residual);
}

Field project_dirichlet(Field f) {
  const int last = f.nodes() - 1;
  for (int n = 0; n < f.levels(); ++n)
    for (int j = 0; j < f.layers(); ++j) {
      f(n, j, 0) = 0.0;
      f(n, j, last) = 0.0;
    }
  return f;
}

Field Propagator::forward(const Field& y0, const Field* source, SolveStats* stats) const {
  check_slice(y0, "initial datum");
  check_trajectory(source);
  SolveStats total;
  Field y(grid(), Rank::Trajectory);
  const Field start = project_dirichlet(y0);
  std::copy(start.values().begin(), start.values().end(), y.level(0).begin());
  for (int n = 0; n < grid().Nt(); ++n) {
    const std::span<const double> src = source ? source->level(n + 1) : std::span<const double>{};
    const auto s = kernels::forward_step(*disc_, n, y.level(n), src, y.level(n + 1), options_.check_residual,
                                         options_.execution);
    account(s, n + 1, total);
  }
  if (stats) *stats = total;
  return y;
}

Field Propagator::forward_terminal(const Field& y0, const Field* source, SolveStats* stats) const {
  check_slice(y0, "initial datum");
  check_trajectory(source);
  SolveStats total;
  Field cur = project_dirichlet(y0);
  Field next(grid(), Rank::Slice);
  for (int n = 0; n < grid().Nt(); ++n) {
    const std::span<const double> src = source ? source->level(n + 1) : std::span<const double>{};
    const auto s = kernels::forward_step(*disc_, n, cur.values(), src, next.values(), options_.check_residual,
                                         options_.execution);
    account(s, n + 1, total);
    std::swap(cur, next);
  }
  if (stats) *stats = total;
  return cur;
}

void Propagator::forward_visit(const Field& y0, const LevelSource& source, const LevelVisitor& visit,
                               SolveStats* stats) const {
  check_slice(y0, "initial datum");
  SolveStats total;
  Field cur = project_dirichlet(y0);
  Field next(grid(), Rank::Slice);
  std::vector<double> f(source ? grid().slice_size() : 0);
  if (source) source(0, f);
  visit(0, cur.values(), f);
  for (int n = 0; n < grid().Nt(); ++n) {
    if (source) source(n + 1, f);
    const auto s = kernels::forward_step(*disc_, n, cur.values(), f, next.values(), options_.check_residual,
                                         options_.execution);
    account(s, n + 1, total);
    visit(n + 1, next.values(), f);
    std::swap(cur, next);
  }
  if (stats) *stats = total;
}

Field Propagator::backward(const Field& vT, const Field* source, bool nonlocal, SolveStats* stats) const {
  check_slice(vT, "terminal datum");
  check_trajectory(source);
  SolveStats total;
  Field v(grid(), Rank::Trajectory);
  const Field end = project_dirichlet(vT);
  const int Nt = grid().Nt();
  std::copy(end.values().begin(), end.values().end(), v.level(Nt).begin());
  for (int n = Nt - 1; n >= 0; --n) {
    const std::span<const double> src = source ? source->level(n) : std::span<const double>{};
    const auto s = kernels::backward_step(*disc_, n, v.level(n + 1), src, v.level(n), nonlocal,
                                          options_.check_residual, options_.execution);
    account(s, n + 1, total);
  }
  if (stats) *stats = total;
  return v;
}

void Propagator::backward_visit(const Field& vT, const LevelSource& source, bool nonlocal,
                                const LevelVisitor& visit, SolveStats* stats) const {
  check_slice(vT, "terminal datum");
  SolveStats total;
  Field next = project_dirichlet(vT);
  Field cur(grid(), Rank::Slice);
  std::vector<double> f(source ? grid().slice_size() : 0);
  const int Nt = grid().Nt();
  if (source) source(Nt, f);
  visit(Nt, next.values(), f);
  for (int n = Nt - 1; n >= 0; --n) {
    if (source) source(n, f);
    const auto s = kernels::backward_step(*disc_, n, next.values(), f, cur.values(), nonlocal,
                                          options_.check_residual, options_.execution);
    account(s, n + 1, total);
    visit(n, cur.values(), f);
    std::swap(cur, next);
  }
  if (stats) *stats = total;
}

}  // namespace degpop
