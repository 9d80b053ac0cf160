#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"

namespace degpop {

/// Floor applied to ||k'||_inf on intervals where k is constant.
inline constexpr double kDfrakFloor = 1e-6;

/// Smallest exponent passed to exp() when a log-space weight is used.
inline constexpr double kLogClamp = -700.0;
inline const double kExpClamp = std::exp(kLogClamp);

/// exp(max(log_factor, -700)).
inline double exp_weight(double log_factor) noexcept {
  return log_factor > kLogClamp ? std::exp(log_factor) : kExpClamp;
}

/// Theta(t, a) = 1 / ([t (T - t)]^4 a^4).
double theta(double t, double a, double T);

/// Shifted variant 1 / ((t - T1)^4 (T2 - t)^4 (a - delta)^4).
double theta_shifted(double t, double a, double T1, double T2, double delta);

/// Integral from x0 to x of (y - x0) / k(y) (graded toward x0).
double psi_integral(const DiffusionCoefficient& coeff, double x);

struct WeightParams {
  double c1 = 1.0;
  /// Default: 1.5 * max over [0,1] of psi_integral.
  std::optional<double> c2;
  double s = 1.0;
  double kappa = 1.0;
};

struct WeightValues {
  double theta;
  double psi;
  double phi;
  double log_exp_factor;  // 2 s phi
};

/// Degenerate Carleman weights psi(x) = c1 [int_{x0}^x (y - x0)/k dy - c2],
/// phi = Theta psi. psi is tabulated on the grid nodes at construction.
class WeightSet {
 public:
  WeightSet(const DiffusionCoefficient& coeff, const Grid& grid, WeightParams params = {});

  double c1() const noexcept { return c1_; }
  double c2() const noexcept { return c2_; }
  double s() const noexcept { return s_; }
  double kappa() const noexcept { return kappa_; }
  double T() const noexcept { return grid_.T(); }
  const Grid& grid() const noexcept { return grid_; }
  const DiffusionCoefficient& coeff() const noexcept { return coeff_; }

  /// Same weights with another Carleman parameter.
  WeightSet with_s(double s) const;

  double psi(double x) const;
  double psi_node(int i) const noexcept { return psi_nodes_[i]; }
  /// psi'(x) = c1 (x - x0) / k(x).
  double psi_x(double x) const;

 private:
  DiffusionCoefficient coeff_;
  Grid grid_;
  double c1_, c2_, s_, kappa_;
  std::vector<double> psi_nodes_;
};

/// Throws DomainError at t in {0, T}, a <= 0 or a > A.
WeightValues eval_weights(const WeightSet& ws, double t, double a, double x);

/// Non-degenerate weights on [B1, B2] where k > 0:
///   sigma(x) = d int_x^{B2} 1/k,  phat = Theta e^{kappa sigma},
///   Phi = Theta (e^{kappa sigma} - e^{2 kappa sigma_max}),
/// with d = sup |k'| on the interval (floored at kDfrakFloor).
class NondegWeights {
 public:
  NondegWeights(const WeightSet& ws, double B1, double B2);

  double B1() const noexcept { return B1_; }
  double B2() const noexcept { return B2_; }
  double dfrak() const noexcept { return dfrak_; }
  bool dfrak_floored() const noexcept { return floored_; }
  double sigma_max() const noexcept { return sigma_max_; }

  const WeightSet& weights() const noexcept { return ws_; }

  double sigma(double x) const;

 private:
  WeightSet ws_;
  double B1_, B2_;
  double dfrak_ = 0.0;
  bool floored_ = false;
  double sigma_max_ = 0.0;
};

struct NondegValues {
  double sigma;
  double phat;
  double Phi;
};

NondegValues eval_nondeg_weights(const NondegWeights& w, double t, double a, double x);

enum class HardyWeight { Power43, Adapted };  // |x-x0|^{4/3}, (k |x-x0|^4)^{1/3}

const char* to_string(HardyWeight h) noexcept;

/// [int p/(x-x0)^2 v^2] / [int p v_x^2] for a profile v, with the singular
/// integrand dropped on the node cell containing x0. Returns 0 for v = 0.
double hardy_poincare_ratio(HardyWeight choice, const Field& v, const DiffusionCoefficient& coeff);

}  // namespace degpop
