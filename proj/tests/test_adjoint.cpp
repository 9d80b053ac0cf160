#include "doctest.h"
#include "helpers.hpp"

#include "degpop/adjoint.hpp"
#include "degpop/certify.hpp"

using namespace degpop;
using namespace testing;

TEST_CASE("zero terminal data gives the zero adjoint") {
  const Grid g = coarse_grid();
  AdjointProblem p{make_power_law(0.5, 0.3), reference_rates(), g, Field(g, Rank::Slice), Field(g, Rank::Trajectory)};
  CHECK(solve_backward(p).max_abs() == 0.0);
}

TEST_CASE("adjoint vanishes at the maximal age") {
  const Grid g = coarse_grid();
  AdjointProblem p{make_power_law(0.5, 0.3), reference_rates(), g, sample_terminal(g, 42, 0), {}};
  const Field v = solve_backward(p);
  // The layer behind a = A is fed by the zero boundary value: after one step
  // the last layer only carries what diffuses out of v(t, A) = 0.
  for (int n = 0; n < g.Nt(); ++n) CHECK(std::abs(v(n, g.Na() - 1, g.Nx() / 2)) <= 0.05 * v.max_abs());
}

TEST_CASE("separated solution of the backward heat-transport system") {
  // k = 1, mu = beta = 0, no renewal term: v = h(a + T - t) e^{-pi^2 (T - t)} sin(pi x).
  const auto h = [](double s) { return s > 0 && s < 2 ? s * s * (2 - s) * (2 - s) : 0.0; };
  std::vector<double> errs;
  for (int Nt : {32, 64}) {
    const Grid g = Grid::build(1.0, 2.0, Nt, 2 * Nt, 0.3);
    AdjointProblem p{make_constant(1.0, 0.3), zero_rates(0.25), g,
                     Field::slice(g, [&](double a, double x) { return h(a) * std::sin(M_PI * x); }), {}, false};
    const Field v = solve_backward(p);
    const Field exact = Field::trajectory(g, [&](double t, double a, double x) {
      return h(a + g.T() - t) * std::exp(-M_PI * M_PI * (g.T() - t)) * std::sin(M_PI * x);
    });
    errs.push_back(std::sqrt(weighted_norm(v - exact) / weighted_norm(exact)));
  }
  CHECK(errs[0] <= 0.05);
  CHECK(errs[1] < errs[0]);
}

TEST_CASE("backward steps are the transpose of forward steps") {
  const Grid g = tiny_grid();
  const kernels::Discretization d(g, make_power_law(0.5, 0.3), reference_rates(),
                                  ControlRegion::single(0.2, 0.45, 0.3).indicator(g), kernels::Integrator::Sdirk2);
  const int J = g.age_layers(), I = g.space_nodes();
  const std::size_t N = g.slice_size();
  std::vector<std::vector<double>> F(N), B(N);
  std::vector<double> e(N);
  for (int n = 0; n < g.Nt(); n += 3) {
    for (std::size_t k = 0; k < N; ++k) {
      std::fill(e.begin(), e.end(), 0.0);
      e[k] = 1.0;
      F[k].assign(N, 0.0);
      B[k].assign(N, 0.0);
      kernels::forward_step(d, n, e, {}, F[k], false, kernels::Execution::Serial);
      kernels::backward_step(d, n, e, {}, B[k], true, false, kernels::Execution::Serial);
    }
    double worst = 0.0;
    for (int j = 0; j < J; ++j)
      for (int i = 1; i + 1 < I; ++i)
        for (int jj = 0; jj < J; ++jj)
          for (int ii = 1; ii + 1 < I; ++ii) {
            const std::size_t k = static_cast<std::size_t>(j) * I + i, l = static_cast<std::size_t>(jj) * I + ii;
            worst = std::max(worst, std::abs(F[k][l] - B[l][k]));
          }
    CHECK(worst <= 1e-14);
  }
}

TEST_CASE("duality residual") {
  const Grid g = tiny_grid();
  const auto region = ControlRegion::single(0.2, 0.45, 0.3);
  const Propagator P(g, make_power_law(0.5, 0.3), reference_rates(), region);
  SUBCASE("zero data") {
    const Field z(g, Rank::Trajectory);
    CHECK(duality_residual(z, z, z, region) == 0.0);
  }
  SUBCASE("random data, scaling by c scales the pairing by c^2") {
    const Field y0 = project_dirichlet(random_field(g, Rank::Slice, 1));
    const Field vT = project_dirichlet(random_field(g, Rank::Slice, 2));
    const Field f = random_field(g, Rank::Trajectory, 3);
    const Field y = P.forward(y0, &f), v = P.backward(vT);
    const double scale = std::sqrt(weighted_norm(y.slice_at(g.Nt())) * weighted_norm(vT));
    CHECK(duality_residual(y, v, f, region) <= 1e-12 * scale);
    const double c = 3.0;
    const Field f3 = c * f;
    const Field y3 = P.forward(c * y0, &f3), v3 = P.backward(c * vT);
    CHECK(inner(y3.slice_at(g.Nt()), v3.slice_at(g.Nt())) ==
          doctest::Approx(c * c * inner(y.slice_at(g.Nt()), v.slice_at(g.Nt()))).epsilon(1e-12));
    CHECK(control_pairing(f3, v3, region) == doctest::Approx(c * c * control_pairing(f, v, region)).epsilon(1e-12));
    CHECK(duality_residual(y3, v3, f3, region) <= 1e-12 * c * c * scale);
  }
}

TEST_CASE("semigroup") {
  const Grid g = coarse_grid();
  const auto coeff = make_power_law(0.5, 0.3);
  const auto mu = [](double) { return 0.2; };
  const Field u = Field::profile(g, [](double x) { return std::sin(M_PI * x) + 0.3 * std::sin(3 * M_PI * x); });
  SUBCASE("tau = 0 is the identity") { CHECK(bit_equal(semigroup_apply(u, 0.0, coeff, mu), u)); }
  SUBCASE("contraction") {
    double prev = weighted_norm(u);
    for (double tau : {0.125, 0.25, 0.5, 1.0}) {
      const double nn = weighted_norm(semigroup_apply(u, tau, coeff, mu));
      CHECK(nn <= prev);
      prev = nn;
    }
  }
  SUBCASE("composition") {
    const Field a = semigroup_apply(semigroup_apply(u, 0.25, coeff, mu), 0.5, coeff, mu);
    const Field b = semigroup_apply(u, 0.75, coeff, mu);
    CHECK(rel_diff(a, b) <= 1e-13);
  }
}

TEST_CASE("characteristic evaluation") {
  const Grid g = coarse_grid();
  const auto coeff = make_power_law(0.5, 0.3);
  const RateSpec rates = mu_only(0.2);
  const Field vT = sample_terminal(g, 42, 1);
  CharacteristicOptions co;
  co.mu_frozen = [](double) { return 0.2; };
  SUBCASE("t = T returns vT(a)") {
    const int j = 7;
    const Field p = characteristic_eval(vT, g.T(), g.a(j), coeff, rates, co);
    for (int i = 0; i < g.space_nodes(); ++i) CHECK(p(0, 0, i) == vT(0, j, i));
  }
  SUBCASE("T + a - t > A gives zero") {
    const int j = g.Na() - 2;  // a = A - 1.5 da
    const Field p = characteristic_eval(vT, 0.0, g.a(j), coeff, rates, co);
    CHECK(p.max_abs() == 0.0);
  }
  SUBCASE("agrees with the backward solver") {
    const Propagator P(g, coeff, rates);
    const Field v = P.backward(vT, nullptr, true);
    const int n = g.level_of(0.5), j = 5;
    const Field p = characteristic_eval(vT, g.t(n), g.a(j), coeff, rates, co);
    double num = 0, den = 0;
    for (int i = 0; i < g.space_nodes(); ++i) {
      num += space_weight(g, i) * std::pow(v(n, j, i) - p(0, 0, i), 2);
      den += space_weight(g, i) * p(0, 0, i) * p(0, 0, i);
    }
    CHECK(std::sqrt(num / den) <= 0.03);
  }
}

TEST_CASE("backward matches across execution modes and visitors") {
  const Grid g = coarse_grid();
  const auto coeff = make_power_law(0.5, 0.3);
  SolverOptions serial;
  serial.execution = kernels::Execution::Serial;
  const Propagator par(g, coeff, reference_rates()), ser(g, coeff, reference_rates(), serial);
  const Field vT = sample_terminal(g, 42, 2);
  const Field f = random_field(g, Rank::Trajectory, 4);
  const Field a = par.backward(vT, &f, true);
  CHECK(bit_equal(a, ser.backward(vT, &f, true)));
  Field visited(g, Rank::Trajectory);
  par.backward_visit(
      vT, [&](int n, std::span<double> out) { std::ranges::copy(f.level(n), out.begin()); }, true,
      [&](int n, std::span<const double> v, std::span<const double>) { std::ranges::copy(v, visited.level(n).begin()); });
  CHECK(bit_equal(visited, a));
}
