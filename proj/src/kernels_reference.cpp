// Serial reference versions of the step maps. Deliberately plain: fresh
// buffers, textbook Thomas elimination, no caching.

#include <cmath>
#include <vector>

#include "degpop/kernels.hpp"

namespace degpop::kernels::reference {

namespace {

// Solves (I - c L) x = b on the interior nodes with the classic Thomas sweep.
std::vector<double> implicit_solve(const Discretization& d, const std::vector<double>& mu, double c,
                                   const std::vector<double>& b) {
  const int I = d.grid.space_nodes();
  const auto& C = d.stencil.conductance;
  const int m = I - 2;
  std::vector<double> lower(m), diag(m), upper(m), rhs(m);
  for (int p = 0; p < m; ++p) {
    const int i = p + 1;
    diag[p] = 1.0 + c * (C[i - 1] + C[i]) + (mu.empty() ? 0.0 : c * mu[i]);
    lower[p] = -c * C[i - 1];
    upper[p] = -c * C[i];
    rhs[p] = b[i];
  }
  std::vector<double> cp(m), dp(m);
  cp[0] = upper[0] / diag[0];
  dp[0] = rhs[0] / diag[0];
  for (int p = 1; p < m; ++p) {
    const double den = diag[p] - lower[p] * cp[p - 1];
    cp[p] = upper[p] / den;
    dp[p] = (rhs[p] - lower[p] * dp[p - 1]) / den;
  }
  std::vector<double> x(I, 0.0);
  x[m] = dp[m - 1];
  for (int p = m - 2; p >= 0; --p) x[p + 1] = dp[p] - cp[p] * x[p + 2];
  return x;
}

std::vector<double> operator_apply(const Discretization& d, const std::vector<double>& mu,
                                   const std::vector<double>& u) {
  const int I = d.grid.space_nodes();
  const auto& C = d.stencil.conductance;
  std::vector<double> y(I, 0.0);
  for (int i = 1; i < I - 1; ++i) {
    y[i] = C[i] * (u[i + 1] - u[i]) - C[i - 1] * (u[i] - u[i - 1]) - (mu.empty() ? 0.0 : mu[i] * u[i]);
  }
  return y;
}

std::vector<double> diffuse(const Discretization& d, int level, int j, std::vector<double> u) {
  const int I = d.grid.space_nodes();
  std::vector<double> mu;
  if (!d.mu.empty()) {
    const auto s = d.mu_layer(level, j);
    mu.assign(s.begin(), s.end());
  }
  u[0] = 0.0;
  u[I - 1] = 0.0;
  const double h = d.grid.dt();
  if (d.integrator == Integrator::BackwardEuler) return implicit_solve(d, mu, h, u);
  const double g = 1.0 - 1.0 / std::sqrt(2.0);
  const std::vector<double> y1 = implicit_solve(d, mu, g * h, u);
  const std::vector<double> ly1 = operator_apply(d, mu, y1);
  for (int i = 1; i < I - 1; ++i) u[i] += (1.0 - g) * h * ly1[i];
  return implicit_solve(d, mu, g * h, u);
}

}  // namespace

void forward_step(const Discretization& d, int n, std::span<const double> prev,
                  std::span<const double> source, std::span<double> next) {
  const int J = d.grid.age_layers(), I = d.grid.space_nodes();
  for (int j = 0; j < J; ++j) {
    std::vector<double> u(I, 0.0);
    if (j == 0) {
      for (int i = 0; i < I; ++i)
        for (int q = 0; q < J; ++q) u[i] += d.beta[q * I + i] * prev[q * I + i];
    } else {
      for (int i = 0; i < I; ++i) u[i] = prev[(j - 1) * I + i];
    }
    u = diffuse(d, n + 1, j, u);
    for (int i = 0; i < I; ++i) {
      if (!source.empty()) u[i] += d.grid.dt() * d.chi[i] * source[j * I + i];
      next[j * I + i] = u[i];
    }
  }
}

void backward_step(const Discretization& d, int n, std::span<const double> next,
                   std::span<const double> source, std::span<double> out, bool nonlocal) {
  const int J = d.grid.age_layers(), I = d.grid.space_nodes();
  std::vector<std::vector<double>> p(J);
  for (int j = 0; j < J; ++j) {
    std::vector<double> u(next.begin() + j * I, next.begin() + (j + 1) * I);
    p[j] = diffuse(d, n + 1, j, u);
  }
  for (int j = 0; j < J; ++j) {
    for (int i = 0; i < I; ++i) {
      double v = j + 1 < J ? p[j + 1][i] : 0.0;
      if (nonlocal) v += d.beta[j * I + i] * p[0][i];
      if (!source.empty() && i > 0 && i < I - 1) v -= d.grid.dt() * source[j * I + i];
      out[j * I + i] = v;
    }
  }
}

}  // namespace degpop::kernels::reference
