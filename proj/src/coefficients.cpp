#include "degpop/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "degpop/quadrature.hpp"

namespace degpop {

const char* to_string(Degeneracy d) noexcept {
  switch (d) {
    case Degeneracy::Weak: return "WD";
    case Degeneracy::Strong: return "SD";
    case Degeneracy::NonDegenerate: return "nondegenerate";
    case Degeneracy::Invalid: return "invalid";
  }
  return "?";
}

const char* to_string(CheckStatus s) noexcept {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::NotApplicable: return "n/a";
  }
  return "?";
}

double DiffusionCoefficient::derivative(double x, double h) const {
  if (kprime) return kprime(x);
  if (x - h < 0.0) return (-3.0 * k(x) + 4.0 * k(x + h) - k(x + 2 * h)) / (2 * h);
  if (x + h > 1.0) return (3.0 * k(x) - 4.0 * k(x - h) + k(x - 2 * h)) / (2 * h);
  return (k(x + h) - k(x - h)) / (2 * h);
}

DiffusionCoefficient make_power_law(double alpha, double x0) {
  if (!(alpha > 0)) throw ParameterError("power law: alpha must be positive");
  if (!(x0 > 0 && x0 < 1)) throw ParameterError("power law: x0 must lie in (0,1)");
  DiffusionCoefficient c;
  c.k = [alpha, x0](double x) { return std::pow(std::abs(x - x0), alpha); };
  c.kprime = [alpha, x0](double x) {
    const double d = x - x0;
    if (d == 0.0) return 0.0;
    return alpha * std::copysign(std::pow(std::abs(d), alpha - 1.0), d);
  };
  c.x0 = x0;
  c.power_alpha = alpha;
  c.name = "power_law";
  // (x - x0) k' = alpha k identically, so M = alpha.
  c.classification.M_hat = alpha;
  if (alpha < 1.0) {
    c.classification.kind = Degeneracy::Weak;
    c.integrability = Integrability::W11;
  } else if (alpha < 2.0) {
    c.classification.kind = Degeneracy::Strong;
    c.integrability = Integrability::W1Infinity;
  } else {
    c.classification.kind = Degeneracy::Invalid;
    c.classification.diagnostic = "M >= 2: outside the WD/SD scope (solver still usable)";
    c.integrability = Integrability::W1Infinity;
  }
  return c;
}

DiffusionCoefficient make_constant(double value, double x0) {
  if (!(value > 0)) throw ParameterError("constant coefficient must be positive");
  DiffusionCoefficient c;
  c.k = [value](double) { return value; };
  c.kprime = [](double) { return 0.0; };
  c.x0 = x0;
  c.name = "constant";
  c.classification = {Degeneracy::NonDegenerate, 0.0, ""};
  c.integrability = Integrability::W1Infinity;
  return c;
}

double classification_window(const Grid& grid) noexcept {
  // Shrinks slower than dx so the centered-difference bias of the quotient,
  // O((dx / r)^2), vanishes under refinement.
  return std::max(2.0 * grid.dx(), 0.25 * std::pow(grid.dx(), 0.25));
}

Classification classify(const std::function<double(double)>& k,
                        const std::function<double(double)>& kprime, double x0, const Grid& grid) {
  DiffusionCoefficient c;
  c.k = k;
  c.kprime = kprime;
  c.x0 = x0;

  const int nodes = grid.space_nodes();
  const double h = grid.dx();
  std::vector<double> kv(nodes);
  double kmax = 0.0;
  for (int i = 0; i < nodes; ++i) {
    kv[i] = k(grid.x(i));
    if (!std::isfinite(kv[i])) return {Degeneracy::Invalid, NAN, "k is not finite at a node"};
    if (kv[i] < 0.0) {
      return {Degeneracy::Invalid, NAN, "k is negative at x = " + std::to_string(grid.x(i))};
    }
    kmax = std::max(kmax, kv[i]);
  }
  const double tol = 1e-12 * std::max(kmax, 1.0);
  const double kx0 = k(x0);

  const double r = classification_window(grid);
  double M = -std::numeric_limits<double>::infinity();
  double kmin_off = std::numeric_limits<double>::infinity();
  for (int i = 0; i < nodes; ++i) {
    const double x = grid.x(i);
    if (std::abs(x - x0) <= r) continue;
    kmin_off = std::min(kmin_off, kv[i]);
    if (kv[i] <= tol) continue;
    M = std::max(M, (x - x0) * c.derivative(x, h) / kv[i]);
  }

  const double kmin_all = *std::min_element(kv.begin(), kv.end());
  if (kx0 > tol) {
    if (kmin_all > tol) return {Degeneracy::NonDegenerate, M, ""};
    return {Degeneracy::Invalid, M, "k(x0) > 0 while k vanishes elsewhere"};
  }
  if (kmin_off <= tol) return {Degeneracy::Invalid, M, "k vanishes away from x0"};
  for (int i = 0; i < nodes; ++i) {
    if (kv[i] <= tol && std::abs(grid.x(i) - x0) > 0.5 * h) {
      return {Degeneracy::Invalid, M, "k vanishes at a node other than x0"};
    }
  }
  // M = 1 sits on the WD/SD boundary; the estimate carries rounding noise.
  constexpr double kBoundaryTol = 1e-9;
  if (M > 0.0 && M < 1.0 - kBoundaryTol) return {Degeneracy::Weak, M, ""};
  if (M >= 1.0 - kBoundaryTol && M < 2.0) return {Degeneracy::Strong, M, ""};
  return {Degeneracy::Invalid, M, "estimated M outside (0,2)"};
}

DiffusionCoefficient classified(DiffusionCoefficient coeff, const Grid& grid) {
  coeff.classification = classify(coeff.k, coeff.kprime, coeff.x0, grid);
  return coeff;
}

bool StructureReport::all_ok() const noexcept {
  auto ok = [](const Check& c) { return c.status != CheckStatus::Fail; };
  return ok(monotone_ratio) && ok(ratio_bounded_below) && ok(derivative_bound);
}

namespace {

// Sample abscissae for the structural checks: grid nodes plus probes
// x0 +- 2^-m approaching the degeneracy point.
std::vector<double> structure_samples(double x0, const Grid& grid) {
  std::vector<double> xs;
  for (int i = 0; i < grid.space_nodes(); ++i) {
    if (std::abs(grid.x(i) - x0) > 0.5 * grid.dx()) xs.push_back(grid.x(i));
  }
  for (int m = 1; m <= 60; ++m) {
    const double d = std::ldexp(1.0, -m);
    if (x0 - d > 0.0) xs.push_back(x0 - d);
    if (x0 + d < 1.0) xs.push_back(x0 + d);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

}  // namespace

StructureReport check_hypothesis_3_1(const DiffusionCoefficient& coeff, double theta, double gamma,
                                     const Grid& grid) {
  if (!coeff.degenerate()) {
    throw ParameterError("structure check: coefficient must be classified WD or SD");
  }
  const double M = coeff.classification.M_hat;
  constexpr double kTol = 1e-9;
  if (!(theta > 0.0) || theta > M + kTol) throw ParameterError("structure check: theta must lie in (0, M]");
  if (!(gamma > 0.0)) throw ParameterError("structure check: Gamma must be positive");

  StructureReport rep;
  rep.M = M;
  rep.theta = theta;
  rep.gamma = gamma;
  const double x0 = coeff.x0;
  const auto xs = structure_samples(x0, grid);
  auto ratio = [&](double x) { return coeff.k(x) / std::pow(std::abs(x - x0), theta); };

  // (i) left side nonincreasing, right side nondecreasing (in increasing x).
  double worst_increase = 0.0;
  double prev_left = NAN, prev_right = NAN;
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (double x : xs) {
    const double r = ratio(x);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
    if (x < x0) {
      if (!std::isnan(prev_left)) worst_increase = std::max(worst_increase, (r - prev_left) / std::max(prev_left, 1e-300));
      prev_left = r;
    } else {
      if (!std::isnan(prev_right)) worst_increase = std::max(worst_increase, (prev_right - r) / std::max(prev_right, 1e-300));
      prev_right = r;
    }
  }
  rep.monotone_ratio.measured = worst_increase;
  rep.monotone_ratio.holds = worst_increase <= 1e-10;
  rep.monotone_ratio.status = M > 4.0 / 3.0 ? (rep.monotone_ratio.holds ? CheckStatus::Pass : CheckStatus::Fail)
                                            : CheckStatus::NotApplicable;

  // (ii) relative floor of the ratio over the samples (probes reach 2^-60).
  rep.ratio_bounded_below.measured = rmax > 0.0 ? rmin / rmax : 0.0;
  rep.ratio_bounded_below.holds = rep.ratio_bounded_below.measured >= 1e-6;

  // (iii) sup |k'| / |x - x0|^{2 theta - 3} against Gamma.
  double worst = 0.0;
  for (double x : xs) {
    const double d = std::abs(x - x0);
    worst = std::max(worst, std::abs(coeff.derivative(x, grid.dx())) / std::pow(d, 2.0 * theta - 3.0));
  }
  rep.derivative_bound.measured = worst;
  rep.derivative_bound.holds = worst <= gamma * (1.0 + 1e-10);

  const bool strong = M > 1.5;
  for (Check* c : {&rep.ratio_bounded_below, &rep.derivative_bound}) {
    c->status = strong ? (c->holds ? CheckStatus::Pass : CheckStatus::Fail) : CheckStatus::NotApplicable;
  }
  return rep;
}

RatesReport check_rates(const RateSpec& rates, const Grid& grid) {
  RatesReport rep;
  for (int n = 0; n < grid.time_levels(); ++n)
    for (int j = 0; j < grid.age_layers(); ++j)
      for (int i = 0; i < grid.space_nodes(); ++i) {
        const double m = rates.mu(grid.t(n), grid.a(j), grid.x(i));
        if (m < 0.0) rep.mu_violation = std::max(rep.mu_violation, -m);
      }
  std::vector<double> ages;
  for (int j = 0; j < grid.age_layers(); ++j) ages.push_back(grid.a(j));
  ages.push_back(0.0);
  ages.push_back(rates.abar);
  for (double a : ages) {
    for (int i = 0; i < grid.space_nodes(); ++i) {
      const double b = rates.beta(a, grid.x(i));
      if (b < 0.0) rep.beta_violation = std::max(rep.beta_violation, -b);
      if (a <= rates.abar && b != 0.0) rep.support_violation = std::max(rep.support_violation, std::abs(b));
    }
  }
  rep.mu_nonnegative = rep.mu_violation == 0.0;
  rep.beta_nonnegative = rep.beta_violation == 0.0;
  rep.beta_support = rep.support_violation == 0.0;
  return rep;
}

RateSpec zero_rates(double abar) {
  return {[](double, double, double) { return 0.0; }, [](double, double) { return 0.0; }, abar};
}

WitnessReport check_weight_witness(const DiffusionCoefficient& coeff, const WeightWitness& w,
                                   double x_lo, const Grid& grid) {
  if (!w.g || !w.h) throw ParameterError("witness: g and h must be supplied");
  const double x0 = coeff.x0;
  auto kt = [&](double x) { return x >= 0.0 ? coeff.k(x) : coeff.k(-x); };
  auto ktp = [&](double x) {
    return x >= 0.0 ? coeff.derivative(x, grid.dx()) : -coeff.derivative(-x, grid.dx());
  };

  WitnessReport rep;
  rep.min_g = std::numeric_limits<double>::infinity();
  const int samples = 41;
  for (int p = 0; p < samples; ++p) {
    const double x = x_lo + (1.0 - x_lo) * (p + 0.5) / samples;
    if (std::abs(x - x0) < grid.dx()) continue;
    rep.min_g = std::min(rep.min_g, w.g(x));
    const double b_hi = x < x0 ? x0 : 1.0;
    for (int q = 1; q < 8; ++q) {
      const double B = x + (b_hi - x) * q / 8.0;
      const double integral = quad::gauss(w.g, x, B);
      const double lhs = -ktp(x) / (2.0 * std::sqrt(kt(x))) * (integral + w.h0) + std::sqrt(kt(x)) * w.g(x);
      rep.max_identity_residual = std::max(rep.max_identity_residual, std::abs(lhs - w.h(x, B)));
    }
  }
  rep.g_bounded_below = rep.min_g >= w.g0 && w.g0 > 0.0;
  return rep;
}

}  // namespace degpop
