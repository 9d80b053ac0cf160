#pragma once

#include <functional>
#include <optional>
#include <string>

#include "degpop/core.hpp"

namespace degpop {

enum class Degeneracy { Weak, Strong, NonDegenerate, Invalid };

const char* to_string(Degeneracy d) noexcept;

struct Classification {
  Degeneracy kind = Degeneracy::Invalid;
  /// Estimated M = sup (x - x0) k'(x) / k(x); NaN when not computed.
  double M_hat = 0.0;
  std::string diagnostic;
};

/// Declared (not verified) integrability class of k.
enum class Integrability { Unspecified, W11, W1Infinity };

/// User-supplied witnesses for the W^{1,1} non-degenerate weight: functions
/// g, h(x, B) and constants g0, h0 (plus the scale r and shift c of the
/// resulting weight). Only checked pointwise, never constructed.
struct WeightWitness {
  std::function<double(double)> g;
  std::function<double(double, double)> h;
  double g0 = 0.0;
  double h0 = 0.0;
  double r = 1.0;
  double c = 1.0;
};

struct DiffusionCoefficient {
  std::function<double(double)> k;
  /// Analytic derivative; empty when only k is known.
  std::function<double(double)> kprime;
  double x0 = 0.5;
  Classification classification;
  std::optional<double> theta_exponent;
  std::optional<double> gamma_bound;
  /// Exponent alpha when k = |x - x0|^alpha (enables closed-form limits).
  std::optional<double> power_alpha;
  Integrability integrability = Integrability::Unspecified;
  std::optional<WeightWitness> witness;
  std::string name;

  double operator()(double x) const { return k(x); }
  bool degenerate() const noexcept {
    return classification.kind == Degeneracy::Weak || classification.kind == Degeneracy::Strong;
  }
  /// k'(x): analytic when available, otherwise a centered difference with
  /// step h (one-sided at the walls).
  double derivative(double x, double h) const;
};

/// k(x) = |x - x0|^alpha with analytic derivative. alpha >= 2 is accepted
/// (the solvers handle it) but classified Invalid for the Carleman theory.
DiffusionCoefficient make_power_law(double alpha, double x0);

/// k(x) = c > 0.
DiffusionCoefficient make_constant(double c, double x0);

/// Radius of the window around x0 excluded from the M estimate.
double classification_window(const Grid& grid) noexcept;

Classification classify(const std::function<double(double)>& k,
                        const std::function<double(double)>& kprime, double x0, const Grid& grid);

/// Classifies `coeff` on `grid` and returns a copy carrying the result.
DiffusionCoefficient classified(DiffusionCoefficient coeff, const Grid& grid);

enum class CheckStatus { Pass, Fail, NotApplicable };

const char* to_string(CheckStatus s) noexcept;

struct Check {
  CheckStatus status = CheckStatus::NotApplicable;
  /// Whether the condition holds on the samples, computed even when the
  /// condition is not required at the given M.
  bool holds = false;
  double measured = 0.0;
};

/// (i) x -> k/|x-x0|^theta monotone on each side, (ii) that ratio bounded
/// below away from zero, (iii) |k'| <= Gamma |x-x0|^{2 theta - 3}.
struct StructureReport {
  double M = 0.0;
  double theta = 0.0;
  double gamma = 0.0;
  Check monotone_ratio;
  Check ratio_bounded_below;
  Check derivative_bound;
  bool all_ok() const noexcept;
};

StructureReport check_hypothesis_3_1(const DiffusionCoefficient& coeff, double theta, double gamma,
                                     const Grid& grid);

struct RateSpec {
  std::function<double(double, double, double)> mu;  // mu(t, a, x)
  std::function<double(double, double)> beta;        // beta(a, x)
  double abar = 0.0;
};

struct RatesReport {
  bool mu_nonnegative = true;
  bool beta_nonnegative = true;
  bool beta_support = true;
  double mu_violation = 0.0;
  double beta_violation = 0.0;
  double support_violation = 0.0;
  bool all_ok() const noexcept { return mu_nonnegative && beta_nonnegative && beta_support; }
};

RatesReport check_rates(const RateSpec& rates, const Grid& grid);

/// mu = 0, beta = 0.
RateSpec zero_rates(double abar);

struct WitnessReport {
  double max_identity_residual = 0.0;
  double min_g = 0.0;
  bool g_bounded_below = false;
};

/// Checks the pointwise identity
///   -k~'(x)/(2 sqrt(k~(x))) (int_x^B g + h0) + sqrt(k~(x)) g(x) = h(x, B)
/// on sampled pairs x < B < x0 or x0 < x < B, with k~ the even reflection of k.
WitnessReport check_weight_witness(const DiffusionCoefficient& coeff, const WeightWitness& w,
                                   double x_lo, const Grid& grid);

}  // namespace degpop
