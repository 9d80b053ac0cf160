#include "doctest.h"
#include "helpers.hpp"

using namespace degpop;
using namespace testing;

TEST_CASE("grid layout and validation") {
  const Grid g = Grid::build(1.0, 2.0, 128, 200, 0.3);
  CHECK(g.Na() == 256);
  CHECK(g.dt() == g.da());
  CHECK(g.space_nodes() == 201);
  CHECK(g.a(0) == doctest::Approx(0.5 * g.da()));
  CHECK(g.level_of(0.5) == 64);
  CHECK_THROWS_AS(g.level_of(0.5 + 0.3 * g.dt()), ParameterError);
  CHECK_THROWS_AS(Grid(1.0, 2.0, 128, 128, 200, 0.3), ParameterError);  // dt != da
  CHECK_THROWS_AS(Grid::build(1.0, 2.0, 16, 32, 1.2), ParameterError);
  // x0 on a flux midpoint is bumped by the builder and refused by the strict constructor.
  CHECK_THROWS_AS(Grid(1.0, 2.0, 16, 32, 20, 0.325), ParameterError);
  CHECK(Grid::build(1.0, 2.0, 16, 20, 0.325).Nx() == 21);
}

TEST_CASE("weighted_norm examples") {
  const Grid g = coarse_grid();
  CHECK(weighted_norm(Field(g, Rank::Trajectory)) == 0.0);
  const Field one = Field::profile(g, [](double) { return 1.0; });
  CHECK(weighted_norm(one) == doctest::Approx(1.0).epsilon(1e-14));
  // int_0^1 x^2 = 1/3; trapezoid error dx^2/6.
  const Field x = Field::profile(g, [](double v) { return v; });
  const double dx = g.dx();
  CHECK(std::abs(weighted_norm(x) - 1.0 / 3.0) <= dx * dx / 6.0 + 1e-15);
  CHECK(std::abs(weighted_norm(x) - 1.0 / 3.0) <= 0.2 * dx * dx);
  // slice of ones integrates to A.
  CHECK(weighted_norm(Field::slice(g, [](double, double) { return 1.0; })) == doctest::Approx(g.A()).epsilon(1e-13));
}

TEST_CASE("weighted_norm homogeneity and triangle inequality") {
  const Grid g = coarse_grid();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Field f = random_field(g, Rank::Slice, seed);
    const Field h = random_field(g, Rank::Slice, seed + 100);
    const double c = 3.7;
    CHECK(weighted_norm(c * f) == doctest::Approx(c * c * weighted_norm(f)).epsilon(1e-14));
    const double nf = std::sqrt(weighted_norm(f)), nh = std::sqrt(weighted_norm(h));
    CHECK(std::sqrt(weighted_norm(f + h)) <= nf + nh + 1e-12);
  }
}

TEST_CASE("weighted_norm with a field weight and a sub-box") {
  const Grid g = coarse_grid();
  const Field f = random_field(g, Rank::Slice, 7);
  const Field w = Field::slice(g, [](double, double) { return 2.0; });
  CHECK(weighted_norm(f, std::cref(w)) == doctest::Approx(2.0 * weighted_norm(f)).epsilon(1e-14));
  const Box left = Box::ages(0.0, 1.0), right = Box::ages(1.0 + 1e-9, 2.0);
  CHECK(weighted_norm(f, 1.0, left) + weighted_norm(f, 1.0, right) ==
        doctest::Approx(weighted_norm(f)).epsilon(1e-13));
  const Field other = random_field(g, Rank::Trajectory, 1);
  CHECK_THROWS_AS(weighted_norm(f, std::cref(other)), ShapeError);
}

TEST_CASE("restrict identity, idempotence, contraction, contract") {
  const Grid g = coarse_grid();
  const Field f = random_field(g, Rank::Trajectory, 11);
  CHECK(bit_equal(restrict(f, Box::full()), f));
  const Box d = Box::space(0.2, 0.45);
  const Field r = restrict(f, d);
  CHECK(bit_equal(restrict(r, d), r));
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const Field h = random_field(g, Rank::Slice, seed);
    CHECK(weighted_norm(restrict(h, Box::ages(0.3, 1.1))) <= weighted_norm(h));
  }
  // A box between two nodes holds no quadrature point.
  CHECK_THROWS_AS(restrict(f, Box::space(0.301, 0.302)), DomainError);
}

TEST_CASE("inner product is bilinear and symmetric") {
  const Grid g = coarse_grid();
  const Field a = random_field(g, Rank::Slice, 1), b = random_field(g, Rank::Slice, 2);
  CHECK(inner(a, b) == doctest::Approx(inner(b, a)).epsilon(1e-15));
  CHECK(inner(a, a) == doctest::Approx(weighted_norm(a)).epsilon(1e-15));
  CHECK_THROWS_AS(inner(a, random_field(g, Rank::Profile, 3)), ShapeError);
}

TEST_CASE("field arithmetic and shape errors") {
  const Grid g = coarse_grid();
  Field a = random_field(g, Rank::Slice, 1);
  const Field b = random_field(g, Rank::Slice, 2);
  Field c = a;
  c.axpy(2.0, b);
  CHECK(c(0, 3, 4) == doctest::Approx(a(0, 3, 4) + 2.0 * b(0, 3, 4)));
  CHECK_THROWS_AS(a += random_field(g, Rank::Trajectory, 3), ShapeError);
  CHECK_THROWS_AS(a += random_field(Grid::build(1.0, 2.0, 16, 40, 0.3), Rank::Slice, 3), ShapeError);
  CHECK(a.all_finite());
  a(0, 0, 0) = NAN;
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("control region variants") {
  const auto single = ControlRegion::single(0.2, 0.45, 0.3);
  CHECK(single.contains(0.3));
  CHECK_FALSE(single.contains(0.2));  // open set
  CHECK_THROWS_AS(ControlRegion::single(0.35, 0.45, 0.3), ParameterError);  // must contain x0
  const auto pair = ControlRegion::pair(0.15, 0.25, 0.35, 0.45, 0.3);
  CHECK(pair.is_pair());
  CHECK_FALSE(pair.contains(0.3));
  CHECK(pair.contains(0.2));
  CHECK(pair.contains(0.4));
  CHECK_THROWS_AS(ControlRegion::pair(0.15, 0.35, 0.4, 0.45, 0.3), ParameterError);  // must straddle x0
  const auto chi = pair.indicator(coarse_grid());
  CHECK(chi.size() == 33u);
}
