#include "doctest.h"
#include "helpers.hpp"

#include "degpop/hum.hpp"

using namespace degpop;
using namespace testing;

namespace {

HumProblem hum_problem(const Grid& g, Field y0, ControlRegion region = ControlRegion::single(0.2, 0.45, 0.3)) {
  HumProblem p{make_power_law(0.5, 0.3), reference_rates(), region, g, std::move(y0)};
  p.delta = 1.5;
  return p;
}

Field smooth_y0(const Grid& g) {
  return Field::slice(g, [](double a, double x) { return a * (2 - a) * std::sin(M_PI * x); });
}

Field target_noise(const Grid& g, std::uint64_t seed) {
  return restrict(project_dirichlet(random_field(g, Rank::Slice, seed)), Box::ages(1.5, 2.0));
}

}  // namespace

TEST_CASE("problem validation") {
  const Grid g = coarse_grid();
  auto p = hum_problem(g, smooth_y0(g));
  CHECK_NOTHROW(validate(p));
  p.delta = 0.5;
  CHECK_THROWS_AS(validate(p), ParameterError);
  p.delta = 1.5;
  p.epsilon = 0.0;
  CHECK_THROWS_AS(validate(p), ParameterError);
}

TEST_CASE("Gramian is symmetric and positive") {
  const Grid g = coarse_grid();
  const auto p = hum_problem(g, smooth_y0(g));
  const Gramian G(p);
  CHECK(G.apply(Field(g, Rank::Slice)).max_abs() == 0.0);
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const Field a = target_noise(g, s), b = target_noise(g, s + 10);
    const double ab = inner(G.apply(a), b), ba = inner(a, G.apply(b));
    CHECK(std::abs(ab - ba) <= 1e-10 * std::max(std::abs(ab), 1e-300));
    CHECK(inner(G.apply(a), a) >= 0.0);
  }
  CHECK(bit_equal(gramian_apply(target_noise(g, 3), p), G.apply(target_noise(g, 3))));
}

TEST_CASE("zero initial state needs no control") {
  const Grid g = coarse_grid();
  const auto res = synthesize_control(hum_problem(g, Field(g, Rank::Slice)));
  CHECK(res.iterations == 0);
  CHECK(res.control.max_abs() == 0.0);
  CHECK(res.terminal_residual == 0.0);
  CHECK(res.cost_ratio == 0.0);
}

TEST_CASE("HUM control drives the target ages toward zero") {
  const Grid g = coarse_grid();
  auto p = hum_problem(g, smooth_y0(g));
  const auto res = synthesize_control(p);
  CHECK(res.terminal_residual <= 1e-2 * res.y0_norm);
  CHECK(res.cg_residual_trace.front() == 1.0);
  for (std::size_t k = 1; k < res.energy_trace.size(); ++k) CHECK(res.energy_trace[k] <= res.energy_trace[k - 1] + 1e-14);
  const auto rep = verify_null(res, p);
  CHECK(rep.outside_max == 0.0);
  CHECK(rep.terminal_residual == doctest::Approx(res.terminal_residual).epsilon(1e-8));

  SUBCASE("linearity in y0") {
    auto p2 = p;
    p2.y0 = 10.0 * p.y0;
    const auto r2 = synthesize_control(p2);
    CHECK(std::abs(r2.cost_ratio - res.cost_ratio) <= 1e-6 * res.cost_ratio);
  }
  SUBCASE("residual shrinks with epsilon") {
    double prev = INFINITY;
    for (double eps : {1e-3, 1e-4, 1e-5}) {
      p.epsilon = eps;
      const double r = synthesize_control(p).terminal_residual;
      CHECK(r <= prev);
      prev = r;
    }
  }
}

TEST_CASE("pair region control vanishes outside the two intervals") {
  const Grid g = coarse_grid();
  const auto region = ControlRegion::pair(0.15, 0.25, 0.35, 0.45, 0.3);
  const auto p = hum_problem(g, smooth_y0(g), region);
  const auto res = synthesize_control(p);
  for (int n = 0; n < g.time_levels(); ++n)
    for (int j = 0; j < g.Na(); ++j)
      for (int i = 0; i <= g.Nx(); ++i)
        if (!region.contains(g.x(i))) CHECK(res.control(n, j, i) == 0.0);
}

TEST_CASE("iteration budget") {
  const Grid g = coarse_grid();
  auto p = hum_problem(g, smooth_y0(g));
  p.max_iters = 2;
  p.epsilon = 1e-10;
  try {
    synthesize_control(p);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.partial().iterations == 2);
    CHECK(e.partial().cg_residual_trace.size() == 3u);
  }
}
