#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>

#include "degpop/forward.hpp"

using namespace degpop;
using namespace testing;

namespace {

ForwardProblem problem(const Grid& g, Field y0, std::optional<Field> f = std::nullopt) {
  return {make_power_law(0.5, 0.3), reference_rates(), ControlRegion::single(0.2, 0.45, 0.3), g, std::move(y0),
          std::move(f)};
}

}  // namespace

TEST_CASE("zero data gives the zero trajectory") {
  const Grid g = coarse_grid();
  const auto sol = solve_forward(problem(g, Field(g, Rank::Slice), Field(g, Rank::Trajectory)));
  CHECK(sol.y.max_abs() == 0.0);
  CHECK(energy_estimate_check(sol, Field(g, Rank::Slice), Field(g, Rank::Trajectory)) == 0.0);
}

TEST_CASE("forward solve is linear") {
  const Grid g = coarse_grid();
  const Field a0 = project_dirichlet(random_field(g, Rank::Slice, 1));
  const Field b0 = project_dirichlet(random_field(g, Rank::Slice, 2));
  const Field fa = random_field(g, Rank::Trajectory, 3), fb = random_field(g, Rank::Trajectory, 4);
  const Field ya = solve_forward(problem(g, a0, fa)).y, yb = solve_forward(problem(g, b0, fb)).y;
  const Field yab = solve_forward(problem(g, 2.0 * a0 - b0, 2.0 * fa - fb)).y;
  CHECK(rel_diff(yab, 2.0 * ya - yb) <= 1e-12);
}

TEST_CASE("control acts only inside omega") {
  const Grid g = coarse_grid();
  const Field f = Field::trajectory(g, [](double t, double, double x) { return x < 0.15 || x > 0.5 ? 1.0 + t : 0.0; });
  const auto sol = solve_forward(problem(g, Field(g, Rank::Slice), f));
  CHECK(sol.y.max_abs() == 0.0);
}

TEST_CASE("dissipativity without renewal or source") {
  const Grid g = coarse_grid();
  const Propagator P(g, make_power_law(0.5, 0.3), zero_rates(0.25));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double prev = INFINITY;
    int violations = 0;
    P.forward_visit(random_field(g, Rank::Slice, seed), {}, [&](int, std::span<const double> y, std::span<const double>) {
      const Field s(g, Rank::Slice, std::vector<double>(y.begin(), y.end()));
      const double nn = weighted_norm(s);
      if (nn > prev) ++violations;
      prev = nn;
    });
    CHECK(violations == 0);
  }
}

TEST_CASE("forward_visit matches forward") {
  const Grid g = coarse_grid();
  const Propagator P(g, make_power_law(0.5, 0.3), reference_rates(), ControlRegion::single(0.2, 0.45, 0.3));
  const Field y0 = random_field(g, Rank::Slice, 5);
  const Field f = random_field(g, Rank::Trajectory, 6);
  const Field full = P.forward(y0, &f);
  Field visited(g, Rank::Trajectory);
  P.forward_visit(
      y0, [&](int n, std::span<double> out) { std::ranges::copy(f.level(n), out.begin()); },
      [&](int n, std::span<const double> y, std::span<const double>) { std::ranges::copy(y, visited.level(n).begin()); });
  CHECK(bit_equal(visited, full));
  CHECK(bit_equal(P.forward_terminal(y0, &f), full.slice_at(g.Nt())));
}

TEST_CASE("renewal integral") {
  const Grid g = coarse_grid();
  const Field ones = Field::slice(g, [](double, double) { return 1.0; });
  const Field b = renewal_integral(ones, [](double, double) { return 0.7; });
  CHECK(b.rank() == Rank::Profile);
  for (double v : b.values()) CHECK(v == doctest::Approx(0.7 * g.A()).epsilon(1e-13));
  const Field none = renewal_integral(ones, [](double, double) { return 0.0; });
  CHECK(none.max_abs() == 0.0);
  // Midpoint rule integrates a linear age profile exactly.
  const Field lin = renewal_integral(ones, [&](double a, double) { return a / g.A(); });
  for (double v : lin.values()) CHECK(std::abs(v - g.A() / 2) <= g.da() * g.da());
}

TEST_CASE("the newborn layer is the renewal of the previous level") {
  // With k ~ 0 and mu = 0 the implicit step is the identity to rounding, so
  // level 1 is exactly the age shift of level 0 with the renewal in front.
  const Grid g = coarse_grid();
  const auto beta = [](double a, double) { return std::max(0.0, a - 0.25); };
  const RateSpec rates{[](double, double, double) { return 0.0; }, beta, 0.25};
  const Field y0 = Field::slice(g, [](double a, double x) { return (1 + a) * std::sin(M_PI * x); });
  ForwardProblem p{make_constant(1e-14, 0.3), rates, ControlRegion::single(0.2, 0.45, 0.3), g, y0, {}};
  const auto sol = solve_forward(p);
  const Field b0 = renewal_integral(project_dirichlet(y0), beta);
  for (int i = 1; i < g.Nx(); ++i) {
    CHECK(sol.y(1, 0, i) == doctest::Approx(b0(0, 0, i)).epsilon(1e-10));
    CHECK(sol.y(1, 5, i) == doctest::Approx(y0(0, 4, i)).epsilon(1e-10));
  }
}

TEST_CASE("energy estimate ratio") {
  const Grid g = coarse_grid();
  const Field y0 = project_dirichlet(random_field(g, Rank::Slice, 9));
  const Field f = random_field(g, Rank::Trajectory, 10);
  const double r1 = energy_estimate_check(solve_forward(problem(g, y0, f)), y0, f);
  const double r2 = energy_estimate_check(solve_forward(problem(g, 10.0 * y0, 10.0 * f)), 10.0 * y0, 10.0 * f);
  CHECK(std::isfinite(r1));
  CHECK(std::abs(r1 - r2) <= 1e-10 * r1);

  // Refinement sweep with mu = beta = f = 0: the constant stays bounded.
  std::vector<double> ratios;
  for (int Nt : {16, 32, 64}) {
    const Grid gg = Grid::build(1.0, 2.0, Nt, 2 * Nt, 0.3);
    const Field z0 = Field::slice(gg, [](double a, double x) { return a * (2 - a) * std::sin(M_PI * x); });
    ForwardProblem p{make_power_law(0.5, 0.3), zero_rates(0.25), ControlRegion::single(0.2, 0.45, 0.3), gg, z0, {}};
    ratios.push_back(energy_estimate_check(solve_forward(p), z0, std::nullopt));
  }
  const double lo = *std::ranges::min_element(ratios), hi = *std::ranges::max_element(ratios);
  CHECK(hi <= 2.0);
  CHECK((hi - lo) / hi <= 0.2);
}

TEST_CASE("forward matches the serial reference kernel") {
  const Grid g = coarse_grid();
  SolverOptions serial;
  serial.execution = kernels::Execution::Serial;
  const auto coeff = make_power_law(0.5, 0.3);
  const auto region = ControlRegion::single(0.2, 0.45, 0.3);
  const Propagator par(g, coeff, reference_rates(), region), ser(g, coeff, reference_rates(), region, serial);
  const Field y0 = random_field(g, Rank::Slice, 12);
  const Field f = random_field(g, Rank::Trajectory, 13);
  CHECK(bit_equal(par.forward(y0, &f), ser.forward(y0, &f)));
}
