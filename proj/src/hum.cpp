#include "degpop/hum.hpp"

#include <cmath>

#include "degpop/adjoint.hpp"

namespace degpop {

void validate(const HumProblem& p) {
  const double T = p.grid.T(), A = p.grid.A();
  if (T < A) {
    if (!(p.delta > T && p.delta < A)) throw ParameterError("hum: T < A requires delta in (T, A)");
  } else if (A < T) {
    if (!(p.delta > p.rates.abar && p.delta < A)) throw ParameterError("hum: A < T requires delta in (abar, A)");
  } else {
    throw ParameterError("hum: T = A is not covered by the controllability result");
  }
  if (!(p.epsilon > 0.0)) throw ParameterError("hum: epsilon must be positive");
  if (!(p.cg_tol > 0.0 && p.cg_tol < 1.0)) throw ParameterError("hum: cg_tol must lie in (0, 1)");
  if (p.max_iters < 0) throw ParameterError("hum: max_iters must be nonnegative");
  if (!(p.y0.grid() == p.grid) || p.y0.rank() != Rank::Slice) throw ShapeError("hum: y0 must be a slice on the grid");
}

Gramian::Gramian(const HumProblem& problem, SolverOptions options)
    : prop_(problem.grid, problem.coeff, problem.rates, problem.region, options),
      region_(problem.region),
      // Sharp target: age-layer centers strictly above delta.
      target_(Box::ages(std::nextafter(problem.delta, 1e300), problem.grid.A())) {
  validate(problem);
}

Field Gramian::control_for(const Field& w) const {
  Field v = prop_.backward(restrict(w, target_), nullptr, true);
  const auto chi = region_.indicator(prop_.grid());
  for (int n = 0; n < v.levels(); ++n)
    for (int j = 0; j < v.layers(); ++j) {
      auto l = v.layer(n, j);
      for (int i = 0; i < v.nodes(); ++i) l[i] *= chi[i];
    }
  return v;
}

Field Gramian::apply(const Field& w) const {
  const Field f = control_for(w);
  const Field zero(prop_.grid(), Rank::Slice);
  return restrict(prop_.forward_terminal(zero, &f), target_);
}

Field Gramian::free_terminal(const Field& y0) const { return prop_.forward_terminal(y0); }

Field Gramian::terminal(const Field& y0, const Field& f) const { return prop_.forward_terminal(y0, &f); }

Field gramian_apply(const Field& wT, const HumProblem& problem, const SolverOptions& options) {
  return Gramian(problem, options).apply(wT);
}

namespace {

double norm(const Field& f) { return std::sqrt(inner(f, f)); }

}  // namespace

// Solves (Lambda + eps) w = -y_free(T)|_target with the conjugate residual
// variant of CG: both ||r|| and the energy norm of the error decrease
// monotonically for SPD systems.
HumResult synthesize_control(const HumProblem& problem, const SolverOptions& options) {
  const Gramian G(problem, options);
  const Grid& g = problem.grid;
  const double eps = problem.epsilon;
  auto A = [&](const Field& w) { return G.apply(w).axpy(eps, w); };

  HumResult res{Field(g, Rank::Trajectory), Field(g, Rank::Slice)};
  res.y0_norm = std::sqrt(weighted_norm(problem.y0));

  const Field b = -1.0 * restrict(G.free_terminal(problem.y0), G.target());
  const double bnorm = norm(b);
  Field x(g, Rank::Slice), Ax(g, Rank::Slice);
  res.cg_residual_trace.push_back(bnorm > 0.0 ? 1.0 : 0.0);
  res.energy_trace.push_back(0.0);

  auto finish = [&](const Field& r) {
    res.terminal_data = x;
    res.control = G.control_for(x);
    Field terminal = r;
    terminal.axpy(eps, x);  // y(T)|_target = -(r + eps x)
    res.terminal_residual = norm(terminal);
    res.control_norm = std::sqrt(control_pairing(res.control, res.control, problem.region));
    res.cost_ratio = res.y0_norm > 0.0 ? res.control_norm / res.y0_norm : 0.0;
  };

  if (bnorm == 0.0) {
    finish(b);
    return res;
  }

  Field r = b;
  Field Ar = A(r);
  Field p = r, Ap = Ar;
  double rAr = inner(r, Ar);
  for (int it = 1; it <= problem.max_iters; ++it) {
    const double alpha = rAr / inner(Ap, Ap);
    x.axpy(alpha, p);
    Ax.axpy(alpha, Ap);
    r.axpy(-alpha, Ap);
    res.iterations = it;
    const double rel = norm(r) / bnorm;
    res.cg_residual_trace.push_back(rel);
    res.energy_trace.push_back(0.5 * inner(Ax, x) - inner(b, x));
    if (rel <= problem.cg_tol) {
      finish(r);
      return res;
    }
    Ar = A(r);
    const double rAr_new = inner(r, Ar);
    const double beta = rAr_new / rAr;
    rAr = rAr_new;
    p *= beta;
    p += r;
    Ap *= beta;
    Ap += Ar;
  }
  finish(r);
  const std::string what = "hum: no convergence within " + std::to_string(problem.max_iters) +
                           " iterations (relative residual " + std::to_string(res.cg_residual_trace.back()) + ")";
  throw ConvergenceError(what, std::move(res));
}

NullReport verify_null(const HumResult& result, const HumProblem& problem, const SolverOptions& options) {
  const Gramian G(problem, options);
  NullReport rep;
  const Field yT = G.terminal(problem.y0, result.control);
  rep.terminal_residual = std::sqrt(weighted_norm(yT, 1.0, G.target()));
  rep.internal_residual = result.terminal_residual;
  rep.control_norm = std::sqrt(control_pairing(result.control, result.control, problem.region));
  rep.cost_ratio = result.y0_norm > 0.0 ? rep.control_norm / result.y0_norm : 0.0;
  const Grid& g = problem.grid;
  for (int n = 0; n < result.control.levels(); ++n)
    for (int j = 0; j < result.control.layers(); ++j)
      for (int i = 0; i < g.space_nodes(); ++i)
        if (!problem.region.contains(g.x(i))) rep.outside_max = std::max(rep.outside_max, std::abs(result.control(n, j, i)));
  const double scale = std::max(result.y0_norm, 1e-300);
  if (std::abs(rep.terminal_residual - rep.internal_residual) > 1e-10 * scale) {
    throw ConsistencyError("verify_null: replayed terminal residual " + std::to_string(rep.terminal_residual) +
                           " disagrees with " + std::to_string(rep.internal_residual));
  }
  return rep;
}

}  // namespace degpop
