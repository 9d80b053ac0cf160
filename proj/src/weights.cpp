#include "degpop/weights.hpp"

#include <algorithm>
#include <cmath>

#include "degpop/quadrature.hpp"

namespace degpop {

double theta(double t, double a, double T) {
  if (!(t > 0.0 && t < T)) throw DomainError("Theta is singular at t = 0 and t = T");
  if (!(a > 0.0)) throw DomainError("Theta is singular at a = 0");
  const double q = t * (T - t) * a;
  return 1.0 / (q * q * q * q);
}

double theta_shifted(double t, double a, double T1, double T2, double delta) {
  if (!(t > T1 && t < T2)) throw DomainError("shifted Theta is singular outside (T1, T2)");
  if (!(a > delta)) throw DomainError("shifted Theta is singular at a = delta");
  const double q = (t - T1) * (T2 - t) * (a - delta);
  return 1.0 / (q * q * q * q);
}

double psi_integral(const DiffusionCoefficient& coeff, double x) {
  const double x0 = coeff.x0;
  if (x == x0) return 0.0;
  return quad::graded([&](double y) { return (y - x0) / coeff.k(y); }, x0, x);
}

WeightSet::WeightSet(const DiffusionCoefficient& coeff, const Grid& grid, WeightParams params)
    : coeff_(coeff), grid_(grid), c1_(params.c1), s_(params.s), kappa_(params.kappa) {
  if (!(c1_ > 0.0)) throw ParameterError("weights: c1 must be positive");
  if (!(s_ > 0.0)) throw ParameterError("weights: s must be positive");
  if (!(kappa_ > 0.0)) throw ParameterError("weights: kappa must be positive");
  const double reach = std::max(psi_integral(coeff, 0.0), psi_integral(coeff, 1.0));
  if (!std::isfinite(reach)) throw DomainError("weights: (x - x0)/k is not integrable");
  c2_ = params.c2.value_or(1.5 * reach);
  if (!(c2_ > reach)) throw ParameterError("weights: c2 must exceed max int_{x0}^x (y - x0)/k so that psi < 0");
  psi_nodes_.resize(grid.space_nodes());
  for (int i = 0; i < grid.space_nodes(); ++i) psi_nodes_[i] = psi(grid.x(i));
}

WeightSet WeightSet::with_s(double s) const {
  if (!(s > 0.0)) throw ParameterError("weights: s must be positive");
  WeightSet w = *this;
  w.s_ = s;
  return w;
}

double WeightSet::psi(double x) const { return c1_ * (psi_integral(coeff_, x) - c2_); }

double WeightSet::psi_x(double x) const { return c1_ * (x - coeff_.x0) / coeff_.k(x); }

WeightValues eval_weights(const WeightSet& ws, double t, double a, double x) {
  if (a > ws.grid().A()) throw DomainError("weights: a beyond A");
  const double th = theta(t, a, ws.T());
  const double ps = ws.psi(x);
  const double phi = th * ps;
  return {th, ps, phi, 2.0 * ws.s() * phi};
}

NondegWeights::NondegWeights(const WeightSet& ws, double B1, double B2) : ws_(ws), B1_(B1), B2_(B2) {
  if (!(B1 < B2)) throw ParameterError("nondegenerate weights: need B1 < B2");
  const auto& c = ws.coeff();
  constexpr int samples = 1000;
  double kmin = INFINITY;
  for (int q = 0; q <= samples; ++q) {
    const double x = B1 + (B2 - B1) * q / samples;
    kmin = std::min(kmin, c.k(x));
    dfrak_ = std::max(dfrak_, std::abs(c.derivative(x, 1e-6)));
  }
  if (!(kmin > 0.0)) throw DomainError("nondegenerate weights: k is not positive on the interval");
  if (dfrak_ < kDfrakFloor) {
    dfrak_ = kDfrakFloor;
    floored_ = true;
  }
  sigma_max_ = sigma(B1);
}

double NondegWeights::sigma(double x) const {
  if (x < B1_ || x > B2_) throw DomainError("nondegenerate weights: x outside [B1, B2]");
  constexpr int panels = 8;
  const auto& c = ws_.coeff();
  double total = 0.0;
  const double h = (B2_ - x) / panels;
  for (int p = 0; p < panels; ++p) {
    total += quad::gauss([&](double y) { return 1.0 / c.k(y); }, x + p * h, x + (p + 1) * h);
  }
  return dfrak_ * total;
}

NondegValues eval_nondeg_weights(const NondegWeights& w, double t, double a, double x) {
  const double th = theta(t, a, w.weights().T());
  const double sg = w.sigma(x);
  const double kappa = w.weights().kappa();
  const double e = std::exp(kappa * sg);
  return {sg, th * e, th * (e - std::exp(2.0 * kappa * w.sigma_max()))};
}

const char* to_string(HardyWeight h) noexcept {
  return h == HardyWeight::Power43 ? "power_4_3" : "adapted";
}

double hardy_poincare_ratio(HardyWeight choice, const Field& v, const DiffusionCoefficient& coeff) {
  if (v.rank() != Rank::Profile) throw ShapeError("hardy: expected a profile");
  const Grid& g = v.grid();
  const double x0 = coeff.x0;
  auto p = [&](double x) {
    const double d = std::abs(x - x0);
    if (choice == HardyWeight::Power43) return std::pow(d, 4.0 / 3.0);
    return std::cbrt(coeff.k(x) * d * d * d * d);
  };
  const int skip = g.x0_node();
  double num = 0.0, den = 0.0;
  for (int i = 0; i < g.space_nodes(); ++i) {
    if (i == skip) continue;
    const double d = g.x(i) - x0;
    num += space_weight(g, i) * p(g.x(i)) / (d * d) * v(0, 0, i) * v(0, 0, i);
  }
  for (int i = 0; i < g.Nx(); ++i) {
    const double vx = (v(0, 0, i + 1) - v(0, 0, i)) / g.dx();
    den += g.dx() * p(g.x_mid(i)) * vx * vx;
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

}  // namespace degpop
