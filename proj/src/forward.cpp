#include "degpop/forward.hpp"

#include <algorithm>

namespace degpop {

ForwardSolution solve_forward(const ForwardProblem& problem, const SolverOptions& options) {
  if (!(problem.y0.grid() == problem.grid)) throw ShapeError("forward: y0 is not on the problem grid");
  const Propagator prop(problem.grid, problem.coeff, problem.rates, problem.region, options);
  SolveStats stats;
  ForwardSolution sol{prop.forward(problem.y0, problem.f ? &*problem.f : nullptr, &stats), {}};
  sol.energy = energy_of(sol.y, problem.coeff);
  sol.energy.max_residual = stats.max_residual;
  return sol;
}

EnergyReport energy_of(const Field& y, const DiffusionCoefficient& coeff) {
  if (y.rank() != Rank::Trajectory) throw ShapeError("energy: expected a trajectory");
  const Grid& g = y.grid();
  std::vector<double> kmid(g.Nx());
  for (int i = 0; i < g.Nx(); ++i) kmid[i] = coeff.k(g.x_mid(i));

  EnergyReport rep;
  for (int n = 0; n < y.levels(); ++n) {
    double norm2 = 0.0, diss = 0.0;
    for (int j = 0; j < y.layers(); ++j) {
      const auto u = y.layer(n, j);
      double layer_norm = 0.0, layer_diss = 0.0;
      for (int i = 0; i < y.nodes(); ++i) layer_norm += space_weight(g, i) * u[i] * u[i];
      for (int i = 0; i < g.Nx(); ++i) {
        const double d = u[i + 1] - u[i];
        layer_diss += kmid[i] * d * d;
      }
      norm2 += age_weight(g, j) * layer_norm;
      diss += age_weight(g, j) * layer_diss / g.dx();
    }
    rep.sup_norm2 = std::max(rep.sup_norm2, norm2);
    rep.dissipation += time_weight(g, n) * diss;
  }
  return rep;
}

Field renewal_integral(const Field& slice, const std::function<double(double, double)>& beta) {
  if (slice.rank() != Rank::Slice) throw ShapeError("renewal: expected a slice");
  const Grid& g = slice.grid();
  Field out(g, Rank::Profile);
  for (int i = 0; i < g.space_nodes(); ++i) {
    double s = 0.0;
    for (int j = 0; j < g.age_layers(); ++j) s += age_weight(g, j) * beta(g.a(j), g.x(i)) * slice(0, j, i);
    out(0, 0, i) = s;
  }
  return out;
}

double energy_estimate_check(const ForwardSolution& solution, const Field& y0, const std::optional<Field>& f) {
  const double num = solution.energy.sup_norm2 + solution.energy.dissipation;
  const double den = weighted_norm(y0) + (f ? weighted_norm(*f) : 0.0);
  if (den == 0.0) {
    if (num != 0.0) throw ConsistencyError("energy: nonzero solution from zero data");
    return 0.0;
  }
  return num / den;
}

}  // namespace degpop
