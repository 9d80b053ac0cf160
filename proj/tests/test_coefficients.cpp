#include "doctest.h"
#include "helpers.hpp"

using namespace degpop;
using namespace testing;

TEST_CASE("classify power laws with the analytic derivative") {
  const Grid g = Grid::build(1.0, 2.0, 128, 200, 0.3);
  const auto wd = classified(make_power_law(0.5, 0.3), g);
  CHECK(wd.classification.kind == Degeneracy::Weak);
  CHECK(wd.classification.M_hat == doctest::Approx(0.5).epsilon(1e-6));

  const Grid g5 = Grid::build(1.0, 2.0, 128, 201, 0.5);
  const auto sd = classified(make_power_law(1.5, 0.5), g5);
  CHECK(sd.classification.kind == Degeneracy::Strong);
  CHECK(std::abs(sd.classification.M_hat - 1.5) <= 1e-6);

  CHECK(classified(make_power_law(1.0, 0.5), g5).classification.kind == Degeneracy::Strong);
  CHECK(classified(make_power_law(2.5, 0.5), g5).classification.kind == Degeneracy::Invalid);
  CHECK(classified(make_constant(1.0, 0.3), g).classification.kind == Degeneracy::NonDegenerate);
}

TEST_CASE("classify is scale invariant") {
  const Grid g = Grid::build(1.0, 2.0, 64, 100, 0.3);
  for (double alpha : {0.5, 1.2, 1.7}) {
    const auto base = make_power_law(alpha, 0.3);
    const auto c1 = classify(base.k, base.kprime, 0.3, g);
    const auto c2 = classify([&](double x) { return 7.5 * base.k(x); }, [&](double x) { return 7.5 * base.kprime(x); },
                             0.3, g);
    CHECK(c1.kind == c2.kind);
    CHECK(c1.M_hat == doctest::Approx(c2.M_hat).epsilon(1e-14));
  }
}

TEST_CASE("classify rejects negative k") {
  const Grid g = Grid::build(1.0, 2.0, 64, 100, 0.3);
  const auto c = classify([](double x) { return x - 0.5; }, {}, 0.3, g);
  CHECK(c.kind == Degeneracy::Invalid);
  CHECK_FALSE(c.diagnostic.empty());
}

TEST_CASE("finite-difference M estimate converges to alpha") {
  for (double alpha : {0.5, 1.5}) {
    std::vector<double> err;
    for (int Nx : {100, 200, 400}) {
      const Grid g = Grid::build(1.0, 2.0, 16, Nx, 0.3);
      const auto k = make_power_law(alpha, 0.3);
      err.push_back(std::abs(classify(k.k, {}, 0.3, g).M_hat - alpha));
    }
    CHECK(err[1] < err[0]);
    CHECK(err[2] < err[1]);
    CHECK(std::log2(err[1] / err[2]) >= 1.0);
    CHECK(err[1] <= 1e-2);
  }
}

TEST_CASE("hypothesis 3.1 checks") {
  const Grid g = Grid::build(1.0, 2.0, 64, 200, 0.3);
  SUBCASE("alpha <= 4/3 exempts the monotonicity check") {
    for (double alpha : {0.5, 1.0, 1.3}) {
      const auto c = classified(make_power_law(alpha, 0.3), g);
      const auto rep = check_hypothesis_3_1(c, alpha / 2, 1.0, g);
      CHECK(rep.monotone_ratio.status == CheckStatus::NotApplicable);
      CHECK(rep.derivative_bound.status == CheckStatus::NotApplicable);
      CHECK(rep.all_ok());
    }
  }
  SUBCASE("alpha = theta = 1.5 with Gamma = 1.5") {
    const auto c = classified(make_power_law(1.5, 0.3), g);
    const auto rep = check_hypothesis_3_1(c, 1.5, 1.5, g);
    CHECK(rep.monotone_ratio.status == CheckStatus::Pass);
    CHECK(rep.monotone_ratio.measured <= 1e-12);  // ratio is identically one
    CHECK(rep.ratio_bounded_below.holds);
    CHECK(rep.derivative_bound.holds);
    // Independent grid-sample oracle for |k'| <= Gamma |x - x0|^{2 theta - 3}.
    for (int i = 0; i <= g.Nx(); ++i) {
      const double x = g.x(i);
      if (x == 0.3) continue;
      CHECK(std::abs(c.kprime(x)) <= 1.5 * std::pow(std::abs(x - 0.3), 0.0) + 1e-12);
    }
  }
  SUBCASE("theta above M is rejected") {
    const auto c = classified(make_power_law(1.5, 0.3), g);
    CHECK_THROWS_AS(check_hypothesis_3_1(c, 2.0, 1.0, g), ParameterError);
    CHECK_THROWS_AS(check_hypothesis_3_1(c, 0.0, 1.0, g), ParameterError);
  }
  SUBCASE("non-degenerate coefficients are rejected") {
    CHECK_THROWS_AS(check_hypothesis_3_1(classified(make_constant(1.0, 0.3), g), 0.5, 1.0, g), ParameterError);
  }
}

TEST_CASE("rate checks") {
  const Grid g = coarse_grid();
  CHECK(check_rates(zero_rates(1.0), g).all_ok());
  CHECK(check_rates(reference_rates(), g).all_ok());
  const RateSpec bad{[](double, double, double) { return 0.0; }, [](double, double) { return 1.0; }, 1.0};
  const auto rep = check_rates(bad, g);
  CHECK_FALSE(rep.beta_support);
  CHECK(rep.support_violation == 1.0);
  CHECK(rep.beta_nonnegative);
  const RateSpec neg{[](double, double, double) { return -0.5; }, [](double, double) { return 0.0; }, 0.25};
  CHECK(check_rates(neg, g).mu_violation == 0.5);
}

TEST_CASE("derivative falls back to differences") {
  auto c = make_power_law(1.5, 0.3);
  const double exact = c.kprime(0.7);
  c.kprime = {};
  CHECK(c.derivative(0.7, 1e-5) == doctest::Approx(exact).epsilon(1e-8));
}
