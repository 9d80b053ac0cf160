#include "degpop/adjoint.hpp"

#include <cmath>

#include "degpop/kernels.hpp"

namespace degpop {

Field solve_backward(const AdjointProblem& problem, const SolverOptions& options) {
  if (!(problem.vT.grid() == problem.grid)) throw ShapeError("backward: vT is not on the problem grid");
  const Propagator prop(problem.grid, problem.coeff, problem.rates, options);
  return prop.backward(problem.vT, problem.f ? &*problem.f : nullptr, problem.nonlocal);
}

Field semigroup_apply(const Field& profile, double tau, const DiffusionCoefficient& coeff,
                      const std::function<double(double)>& mu_frozen, const SemigroupOptions& options) {
  if (profile.rank() != Rank::Profile) throw ShapeError("semigroup: expected a profile");
  if (!(tau >= 0.0)) throw ParameterError("semigroup: tau must be nonnegative");
  if (options.substeps < 1) throw ParameterError("semigroup: substeps must be >= 1");
  const Grid& g = profile.grid();
  const double dt = options.dt > 0.0 ? options.dt : g.dt();
  const long steps = std::lround(tau / dt);
  if (std::abs(tau - steps * dt) > 0.5 * dt) throw ParameterError("semigroup: tau is not a whole number of steps");

  Field out = profile;
  if (steps == 0) return out;
  const kernels::Stencil stencil = kernels::make_stencil(coeff, g);
  std::vector<double> mu;
  if (mu_frozen) {
    mu.resize(g.space_nodes());
    for (int i = 0; i < g.space_nodes(); ++i) mu[i] = mu_frozen(g.x(i));
  }
  kernels::LayerStepper stepper(stencil, dt / options.substeps, options.integrator);
  auto u = out.layer(0, 0);
  for (long s = 0; s < steps * options.substeps; ++s) {
    if (!stepper.step(mu, u, nullptr)) throw SolverError("semigroup: pivot breakdown", s);
  }
  return out;
}

namespace {

Field layer_profile(const Field& slice, int j) {
  Field p(slice.grid(), Rank::Profile);
  if (j < 0 || j >= slice.layers()) return p;
  const auto src = slice.layer(0, j);
  std::copy(src.begin(), src.end(), p.values().begin());
  return p;
}

// vT at the age (m da), the vertex between layers m-1 and m; vT(A) = 0.
Field vertex_profile(const Field& vT, int m) {
  if (m <= 0) return layer_profile(vT, 0);
  Field p = layer_profile(vT, m - 1);
  p += layer_profile(vT, m);
  p *= 0.5;
  return p;
}

}  // namespace

Field characteristic_eval(const Field& vT, double t, double a, const DiffusionCoefficient& coeff,
                          const RateSpec& rates, const CharacteristicOptions& options) {
  if (vT.rank() != Rank::Slice) throw ShapeError("characteristic: vT must be a slice");
  const Grid& g = vT.grid();
  const int n = g.level_of(t);
  const int steps_left = g.Nt() - n;
  const SemigroupOptions sg{g.dt(), options.substeps, options.integrator};
  auto S = [&](const Field& p, int steps) {
    return semigroup_apply(p, steps * g.dt(), coeff, options.mu_frozen, sg);
  };

  if (std::abs(a) <= 1e-9 * g.da()) {
    // Newborn trace: S(T - t) vT(T - t).
    return S(vertex_profile(vT, steps_left), steps_left);
  }
  const long j = std::lround(a / g.da() - 0.5);
  if (j < 0 || j >= g.age_layers() || std::abs(a - g.a(static_cast<int>(j))) > 1e-9 * g.da()) {
    throw ParameterError("characteristic: a is not an age-layer center");
  }

  const int target = static_cast<int>(j) + steps_left;  // layer of age T + a - t
  Field out(g, Rank::Profile);
  if (target < g.age_layers()) out = S(layer_profile(vT, target), steps_left);

  if (rates.beta) {
    // int_a^{min(T+a-t, A)} S(s - a) beta(s) v(s + t - a, 0) ds over layer centers s = a_{j+m}.
    const int terms = std::min(steps_left, g.age_layers() - static_cast<int>(j));
    for (int m = 0; m < terms; ++m) {
      const int layer = static_cast<int>(j) + m;
      Field trace = S(vertex_profile(vT, steps_left - m), steps_left - m);
      bool any = false;
      for (int i = 0; i < g.space_nodes(); ++i) {
        const double b = rates.beta(g.a(layer), g.x(i));
        trace(0, 0, i) *= b;
        any = any || b != 0.0;
      }
      if (any) out.axpy(g.da(), S(trace, m));
    }
  }
  return out;
}

double control_pairing(const Field& f, const Field& v, const ControlRegion& region) {
  if (f.rank() != Rank::Trajectory || v.rank() != Rank::Trajectory || !(f.grid() == v.grid())) {
    throw ShapeError("pairing: expected two trajectories on one grid");
  }
  const Grid& g = f.grid();
  const auto chi = region.indicator(g);
  double total = 0.0;
  for (int n = 1; n <= g.Nt(); ++n) {
    double level = 0.0;
    for (int j = 0; j < g.age_layers(); ++j) {
      const auto fl = f.layer(n, j);
      const auto vl = v.layer(n, j);
      double s = 0.0;
      for (int i = 0; i < g.space_nodes(); ++i) s += space_weight(g, i) * chi[i] * fl[i] * vl[i];
      level += age_weight(g, j) * s;
    }
    total += g.dt() * level;
  }
  return total;
}

double duality_residual(const Field& y, const Field& v, const Field& f, const ControlRegion& region) {
  if (!(y.grid() == v.grid()) || !(y.grid() == f.grid())) throw ShapeError("duality: grid mismatch");
  if (y.rank() != Rank::Trajectory || v.rank() != Rank::Trajectory) {
    throw ShapeError("duality: expected trajectories");
  }
  const int Nt = y.grid().Nt();
  const double terminal = inner(y.slice_at(Nt), v.slice_at(Nt));
  const double initial = inner(y.slice_at(0), v.slice_at(0));
  return std::abs(terminal - initial - control_pairing(f, v, region));
}

}  // namespace degpop
