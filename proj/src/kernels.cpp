#include "degpop/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace degpop::kernels {

const char* to_string(Integrator i) noexcept {
  return i == Integrator::BackwardEuler ? "backward_euler" : "sdirk2";
}

TridiagFactor factor_tridiag(std::span<const double> diag, std::span<const double> off) {
  const std::size_t m = diag.size();
  TridiagFactor f;
  f.off.assign(off.begin(), off.end());
  f.inv_pivot.resize(m);
  f.upper.resize(m > 0 ? m - 1 : 0);
  double pivot = diag[0];
  for (std::size_t p = 0; p < m; ++p) {
    if (p > 0) pivot = diag[p] - off[p - 1] * f.upper[p - 1];
    if (pivot == 0.0 || !std::isfinite(pivot)) {
      f.ok = false;
      return f;
    }
    f.inv_pivot[p] = 1.0 / pivot;
    if (p + 1 < m) f.upper[p] = off[p] * f.inv_pivot[p];
  }
  return f;
}

void solve_tridiag(const TridiagFactor& f, std::span<double> r) noexcept {
  solve_tridiag_block(f, r.data(), r.size(), 1);
}

// Columns are swept together so that their recurrences overlap in the
// pipeline; each column sees exactly the operations of a single solve.
void solve_tridiag_block(const TridiagFactor& f, double* r, std::size_t stride, int count) noexcept {
  const std::size_t m = f.size();
  const double* inv = f.inv_pivot.data();
  const double* off = f.off.data();
  const double* up = f.upper.data();
  for (int b = 0; b < count; ++b) r[b * stride] *= inv[0];
  for (std::size_t p = 1; p < m; ++p)
    for (int b = 0; b < count; ++b) {
      double* c = r + b * stride;
      c[p] = (c[p] - off[p - 1] * c[p - 1]) * inv[p];
    }
  for (std::size_t p = m - 1; p-- > 0;)
    for (int b = 0; b < count; ++b) {
      double* c = r + b * stride;
      c[p] -= up[p] * c[p + 1];
    }
}

Stencil make_stencil(const DiffusionCoefficient& coeff, const Grid& grid) {
  Stencil s;
  s.nodes = grid.space_nodes();
  s.conductance.resize(grid.Nx());
  const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
  for (int i = 0; i < grid.Nx(); ++i) s.conductance[i] = coeff.k(grid.x_mid(i)) * inv_dx2;
  return s;
}

void apply_operator(const Stencil& s, std::span<const double> mu, std::span<const double> u,
                    std::span<double> y) noexcept {
  const int last = s.nodes - 1;
  const double* C = s.conductance.data();
  y[0] = 0.0;
  y[last] = 0.0;
  for (int i = 1; i < last; ++i) {
    double v = C[i] * (u[i + 1] - u[i]) - C[i - 1] * (u[i] - u[i - 1]);
    if (!mu.empty()) v -= mu[i] * u[i];
    y[i] = v;
  }
}

namespace {

// Diagonal and off-diagonal of I - c L on the interior nodes.
void implicit_matrix(const Stencil& s, std::span<const double> mu, double c, std::vector<double>& diag,
                     std::vector<double>& off) {
  const int m = s.nodes - 2;
  diag.resize(m);
  off.resize(m > 0 ? m - 1 : 0);
  const double* C = s.conductance.data();
  for (int p = 0; p < m; ++p) {
    const int i = p + 1;
    double d = 1.0 + c * (C[i - 1] + C[i]);
    if (!mu.empty()) d += c * mu[i];
    diag[p] = d;
    if (p + 1 < m) off[p] = -c * C[i];
  }
}

// max |(I - c L) x - b| and max |b| over the interior nodes. Four running
// maxima keep the reductions from serializing.
std::pair<double, double> residual_norms(const Stencil& s, std::span<const double> mu, double c, const double* x,
                                         const double* b) noexcept {
  const int last = s.nodes - 1;
  const double* C = s.conductance.data();
  const double* m = mu.empty() ? nullptr : mu.data();
  double r[4] = {0, 0, 0, 0}, q[4] = {0, 0, 0, 0};
  int i = 1;
  auto term = [&](int k) {
    double lx = C[k] * (x[k + 1] - x[k]) - C[k - 1] * (x[k] - x[k - 1]);
    if (m) lx -= m[k] * x[k];
    return std::abs(x[k] - c * lx - b[k]);
  };
  for (; i + 3 < last; i += 4)
    for (int l = 0; l < 4; ++l) {
      r[l] = std::max(r[l], term(i + l));
      q[l] = std::max(q[l], std::abs(b[i + l]));
    }
  for (; i < last; ++i) {
    r[0] = std::max(r[0], term(i));
    q[0] = std::max(q[0], std::abs(b[i]));
  }
  return {std::max(std::max(r[0], r[1]), std::max(r[2], r[3])), std::max(std::max(q[0], q[1]), std::max(q[2], q[3]))};
}

}  // namespace

LayerStepper::LayerStepper(const Stencil& stencil, double h, Integrator integrator)
    : stencil_(&stencil), h_(h), integrator_(integrator) {
  gamma_ = integrator == Integrator::Sdirk2 ? 1.0 - 1.0 / std::sqrt(2.0) : 1.0;
  cached_ = factor_for({});
  const std::size_t n = static_cast<std::size_t>(kBlock) * stencil.nodes;
  rhs_.resize(n);
  y1_.resize(n);
  lu_.resize(stencil.nodes);
}

TridiagFactor LayerStepper::factor_for(std::span<const double> mu) const {
  std::vector<double> diag, off;
  implicit_matrix(*stencil_, mu, gamma_ * h_, diag, off);
  return factor_tridiag(diag, off);
}

void LayerStepper::solve_checked(const TridiagFactor& f, std::span<const double> mu, double c, double* x,
                                 std::size_t stride, int count, double* residual) {
  const std::size_t I = stencil_->nodes;
  if (residual == nullptr) {
    solve_tridiag_block(f, x + 1, stride, count);
    return;
  }
  for (int b = 0; b < count; ++b) std::copy(x + b * stride, x + b * stride + I, rhs_.data() + b * I);
  solve_tridiag_block(f, x + 1, stride, count);
  for (int b = 0; b < count; ++b) {
    const auto [rmax, bmax] = residual_norms(*stencil_, mu, c, x + b * stride, rhs_.data() + b * I);
    if (bmax > 0.0) *residual = std::max(*residual, rmax / bmax);
  }
}

bool LayerStepper::step(std::span<const double> mu, std::span<double> u, double* residual) {
  return step_block(mu, u.data(), u.size(), 1, residual);
}

bool LayerStepper::step_block(std::span<const double> mu, double* u, std::size_t stride, int count,
                              double* residual) {
  const TridiagFactor* f = &cached_;
  if (!mu.empty()) {
    if (mu.data() != last_mu_) {
      last_ = factor_for(mu);
      last_mu_ = mu.data();
    }
    f = &last_;
  }
  if (!f->ok) return false;
  const std::size_t I = stencil_->nodes;
  const int last = stencil_->nodes - 1;
  const double c = gamma_ * h_;
  for (int b = 0; b < count; ++b) {
    u[b * stride] = 0.0;
    u[b * stride + last] = 0.0;
  }
  if (integrator_ == Integrator::BackwardEuler) {
    solve_checked(*f, mu, c, u, stride, count, residual);
    return true;
  }
  // Two-stage L-stable SDIRK:
  //   Y1 = M^{-1} u,  u <- M^{-1} (u + (1 - gamma) h L Y1),  M = I - gamma h L.
  for (int b = 0; b < count; ++b) std::copy(u + b * stride, u + b * stride + I, y1_.data() + b * I);
  solve_checked(*f, mu, c, y1_.data(), I, count, residual);
  const double w = (1.0 - gamma_) * h_;
  for (int b = 0; b < count; ++b) {
    apply_operator(*stencil_, mu, {y1_.data() + b * I, I}, lu_);
    double* ub = u + b * stride;
    for (int i = 1; i < last; ++i) ub[i] += w * lu_[i];
  }
  solve_checked(*f, mu, c, u, stride, count, residual);
  return true;
}

// ------------------------------------------------------- Discretization

Discretization::Discretization(const Grid& g, const DiffusionCoefficient& coeff, const RateSpec& rates,
                               std::vector<double> chi_, Integrator integrator_)
    : grid(g), stencil(make_stencil(coeff, g)), chi(std::move(chi_)), integrator(integrator_) {
  const int L = g.time_levels(), J = g.age_layers(), I = g.space_nodes();
  if (static_cast<int>(chi.size()) != I) throw ShapeError("discretization: indicator size mismatch");

  if (rates.mu) {
    std::vector<double> table(g.trajectory_size());
    bool any = false;
    std::size_t k = 0;
    for (int n = 0; n < L; ++n)
      for (int j = 0; j < J; ++j)
        for (int i = 0; i < I; ++i, ++k) {
          table[k] = rates.mu(g.t(n), g.a(j), g.x(i));
          any = any || table[k] != 0.0;
        }
    if (any) {
      // Collapse to one row when mu does not depend on (t, a).
      bool uniform = true;
      for (std::size_t q = I; q < table.size() && uniform; ++q) uniform = table[q] == table[q % I];
      if (uniform) table.resize(I);
      mu = std::move(table);
    }
  }
  beta.assign(g.slice_size(), 0.0);
  if (rates.beta) {
    std::size_t k = 0;
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i, ++k) {
        beta[k] = g.da() * rates.beta(g.a(j), g.x(i));
        has_beta = has_beta || beta[k] != 0.0;
      }
  }
}

std::span<const double> Discretization::mu_layer(int n, int j) const noexcept {
  if (mu.empty()) return {};
  const std::size_t I = grid.space_nodes();
  if (mu.size() == I) return mu;
  return std::span<const double>(mu).subspan((static_cast<std::size_t>(n) * grid.age_layers() + j) * I, I);
}

// ---------------------------------------------------------- step kernels

void renewal(const Discretization& d, std::span<const double> level, std::span<double> out,
             Execution exec) {
  const int J = d.grid.age_layers(), I = d.grid.space_nodes();
  const double* b = d.beta.data();
  const double* y = level.data();
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (int i = 0; i < I; ++i) {
    double s = 0.0;
    for (int j = 0; j < J; ++j) s += b[static_cast<std::size_t>(j) * I + i] * y[static_cast<std::size_t>(j) * I + i];
    out[i] = s;
  }
}

namespace {

struct ThreadState {
  LayerStepper stepper;
  StepStats stats;
};

// Runs body(j0, count, stepper, residual) over blocks of at most kBlock
// consecutive layers in [first, last). Blocks are fixed by layer index, so
// the arithmetic does not depend on the thread count.
template <class BlockBody>
StepStats for_each_block(const Discretization& d, int first, int last, bool check_residual, Execution exec,
                         BlockBody&& body) {
  const int blocks = (last - first + kBlock - 1) / kBlock;
  StepStats total;
#pragma omp parallel if (exec == Execution::Parallel)
  {
    ThreadState ts{LayerStepper(d.stencil, d.grid.dt(), d.integrator), {}};
    double* res = check_residual ? &ts.stats.max_residual : nullptr;
#pragma omp for schedule(static)
    for (int b = 0; b < blocks; ++b) {
      const int j0 = first + b * kBlock;
      if (!body(j0, std::min(kBlock, last - j0), ts.stepper, res)) ts.stats.breakdown = true;
    }
#pragma omp critical
    {
      total.max_residual = std::max(total.max_residual, ts.stats.max_residual);
      total.breakdown = total.breakdown || ts.stats.breakdown;
    }
  }
  return total;
}

// Diffuses `count` layers stored contiguously from `u`, layer j0 first.
bool diffuse_block(const Discretization& d, int level, int j0, int count, double* u, LayerStepper& stepper,
                   double* res) {
  const std::size_t I = d.grid.space_nodes();
  if (d.mu.size() <= I) return stepper.step_block(d.mu_layer(level, j0), u, I, count, res);
  bool ok = true;
  for (int b = 0; b < count; ++b) ok = stepper.step(d.mu_layer(level, j0 + b), {u + b * I, I}, res) && ok;
  return ok;
}

}  // namespace

StepStats forward_step(const Discretization& d, int n, std::span<const double> prev,
                       std::span<const double> source, std::span<double> next, bool check_residual,
                       Execution exec) {
  const int I = d.grid.space_nodes();
  const double dt = d.grid.dt();
  auto layer = [&](std::span<const double> s, int j) { return s.subspan(static_cast<std::size_t>(j) * I, I); };
  auto out_layer = [&](int j) { return next.subspan(static_cast<std::size_t>(j) * I, I); };

  // Layer 0 receives the newborns of the previous level.
  if (d.has_beta) {
    renewal(d, prev, out_layer(0), exec);
  } else {
    std::fill(out_layer(0).begin(), out_layer(0).end(), 0.0);
  }

  const int J = d.grid.age_layers();
  return for_each_block(d, 0, J, check_residual, exec,
                        [&](int j0, int count, LayerStepper& stepper, double* res) {
                          for (int j = std::max(j0, 1); j < j0 + count; ++j) {
                            const auto src = layer(prev, j - 1);
                            std::copy(src.begin(), src.end(), out_layer(j).begin());
                          }
                          if (!diffuse_block(d, n + 1, j0, count, out_layer(j0).data(), stepper, res)) return false;
                          if (!source.empty()) {
                            for (int j = j0; j < j0 + count; ++j) {
                              auto u = out_layer(j);
                              const auto f = layer(source, j);
                              for (int i = 0; i < I; ++i) u[i] += dt * d.chi[i] * f[i];
                            }
                          }
                          return true;
                        });
}

StepStats backward_step(const Discretization& d, int n, std::span<const double> next,
                        std::span<const double> source, std::span<double> out, bool nonlocal,
                        bool check_residual, Execution exec) {
  const int J = d.grid.age_layers(), I = d.grid.space_nodes();
  const double dt = d.grid.dt();
  auto out_layer = [&](int j) { return out.subspan(static_cast<std::size_t>(j) * I, I); };

  // p_j = K_{n+1,j} v^{n+1}_j is written to out layer j-1 (the shift S^T),
  // except p_0 which is needed by every layer for the renewal-dual term.
  std::vector<double> p0(next.begin(), next.begin() + I);
  StepStats stats;
  {
    LayerStepper stepper(d.stencil, dt, d.integrator);
    stats.breakdown = !stepper.step(d.mu_layer(n + 1, 0), p0, check_residual ? &stats.max_residual : nullptr);
  }
  const StepStats rest = for_each_block(d, 1, J, check_residual, exec,
                                        [&](int j0, int count, LayerStepper& stepper, double* res) {
                                          const auto src = next.subspan(static_cast<std::size_t>(j0) * I, count * I);
                                          std::copy(src.begin(), src.end(), out_layer(j0 - 1).begin());
                                          return diffuse_block(d, n + 1, j0, count, out_layer(j0 - 1).data(), stepper, res);
                                        });
  stats.max_residual = std::max(stats.max_residual, rest.max_residual);
  stats.breakdown = stats.breakdown || rest.breakdown;
  auto top = out_layer(J - 1);
  std::fill(top.begin(), top.end(), 0.0);

  const bool renewal_dual = nonlocal && d.has_beta;
  if (renewal_dual || !source.empty()) {
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
    for (int j = 0; j < J; ++j) {
      double* v = out.data() + static_cast<std::size_t>(j) * I;
      if (renewal_dual) {
        const double* b = d.beta.data() + static_cast<std::size_t>(j) * I;
        for (int i = 0; i < I; ++i) v[i] += b[i] * p0[i];
      }
      if (!source.empty()) {
        const double* f = source.data() + static_cast<std::size_t>(j) * I;
        for (int i = 1; i + 1 < I; ++i) v[i] -= dt * f[i];
      }
    }
  }
  return stats;
}

}  // namespace degpop::kernels
