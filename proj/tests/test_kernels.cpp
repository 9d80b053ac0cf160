#include "doctest.h"
#include "helpers.hpp"

#include "degpop/kernels.hpp"
#include "degpop/solver.hpp"

using namespace degpop;
using namespace testing;

namespace {

double max_rel(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num = std::max(num, std::abs(a[k] - b[k]));
    den = std::max(den, std::abs(b[k]));
  }
  return den > 0 ? num / den : num;
}

}  // namespace

TEST_CASE("tridiagonal solve") {
  const std::vector<double> diag{4, 5, 6, 7}, off{1, -1, 2};
  const auto f = kernels::factor_tridiag(diag, off);
  REQUIRE(f.ok);
  const std::vector<double> x{1, -2, 3, 0.5};
  std::vector<double> rhs(4);
  for (int i = 0; i < 4; ++i) {
    rhs[i] = diag[i] * x[i];
    if (i > 0) rhs[i] += off[i - 1] * x[i - 1];
    if (i < 3) rhs[i] += off[i] * x[i + 1];
  }
  kernels::solve_tridiag(f, rhs);
  for (int i = 0; i < 4; ++i) CHECK(rhs[i] == doctest::Approx(x[i]).epsilon(1e-14));
  CHECK_FALSE(kernels::factor_tridiag(std::vector<double>{0, 1}, std::vector<double>{0}).ok);
}

TEST_CASE("optimized kernels agree with the serial reference") {
  const Grid g = coarse_grid();
  for (auto integrator : {kernels::Integrator::Sdirk2, kernels::Integrator::BackwardEuler}) {
    const kernels::Discretization d(g, make_power_law(0.5, 0.3), reference_rates(),
                                    ControlRegion::single(0.2, 0.45, 0.3).indicator(g), integrator);
    const Field prev = project_dirichlet(random_field(g, Rank::Slice, 1));
    const Field src = random_field(g, Rank::Slice, 2);
    std::vector<double> ser(g.slice_size()), par(g.slice_size()), ref(g.slice_size());
    for (int n : {0, 5, g.Nt() - 1}) {
      kernels::forward_step(d, n, prev.values(), src.values(), ser, true, kernels::Execution::Serial);
      kernels::forward_step(d, n, prev.values(), src.values(), par, true, kernels::Execution::Parallel);
      kernels::reference::forward_step(d, n, prev.values(), src.values(), ref);
      CHECK(ser == par);
      CHECK(max_rel(par, ref) <= 1e-13);
      for (bool nonlocal : {false, true}) {
        kernels::backward_step(d, n, prev.values(), src.values(), ser, nonlocal, true, kernels::Execution::Serial);
        kernels::backward_step(d, n, prev.values(), src.values(), par, nonlocal, true, kernels::Execution::Parallel);
        kernels::reference::backward_step(d, n, prev.values(), src.values(), ref, nonlocal);
        CHECK(ser == par);
        CHECK(max_rel(par, ref) <= 1e-13);
      }
    }
  }
}

TEST_CASE("a step of the operator annihilates nothing it should keep") {
  // L applied to a constant in the interior of a k = 1 stencil is zero.
  const Grid g = coarse_grid();
  const auto s = kernels::make_stencil(make_constant(1.0, 0.3), g);
  std::vector<double> u(g.space_nodes(), 1.0), y(g.space_nodes(), 9.0), mu(g.space_nodes(), 0.0);
  kernels::apply_operator(s, mu, u, y);
  CHECK(y.front() == 0.0);
  CHECK(y.back() == 0.0);
  for (int i = 2; i + 2 < g.space_nodes(); ++i) CHECK(std::abs(y[i]) <= 1e-10);
}
