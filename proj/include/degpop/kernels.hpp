#pragma once

// Per-step kernels shared by the forward and backward solvers.
//
// One time step of the state system is
//
//     y^{n+1} = K_{n+1} S y^n + dt chi f^{n+1}
//
// where S shifts every age layer one index along its characteristic and
// fills layer 0 with the renewal integral of y^n, and K_{n+1} applies one
// implicit step of u -> (k u_x)_x - mu(t_{n+1}, a_j, .) u to each layer.
// K is a rational function of a symmetric tridiagonal matrix, hence
// symmetric, so the exact transpose of the step is
//
//     v^n = S^T K_{n+1} v^{n+1},   (S^T p)_j = p_{j+1} + da beta_j p_0.
//
// Both maps come in two flavours: an OpenMP kernel (parallel over age
// layers) and a plain serial reference used by the tests and benchmarks.

#include <span>
#include <vector>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"

namespace degpop::kernels {

enum class Integrator { BackwardEuler, Sdirk2 };
enum class Execution { Serial, Parallel };

const char* to_string(Integrator i) noexcept;

/// LU factors of a symmetric tridiagonal matrix on the interior nodes.
struct TridiagFactor {
  std::vector<double> off;        // off-diagonal (size m-1)
  std::vector<double> inv_pivot;  // 1 / pivot (size m)
  std::vector<double> upper;      // eliminated super-diagonal (size m-1)
  bool ok = true;

  std::size_t size() const noexcept { return inv_pivot.size(); }
};

/// Factors the matrix with diagonal `diag` and off-diagonal `off`.
/// `ok` is false when a pivot is zero or not finite.
TridiagFactor factor_tridiag(std::span<const double> diag, std::span<const double> off);

/// Solves in place.
void solve_tridiag(const TridiagFactor& f, std::span<double> rhs) noexcept;

/// Solves `count` right-hand sides stored `stride` apart, in place.
void solve_tridiag_block(const TridiagFactor& f, double* rhs, std::size_t stride, int count) noexcept;

/// Age layers handled together by one thread.
inline constexpr int kBlock = 8;

/// Static part of the discrete diffusion operator: k evaluated at the flux
/// midpoints, divided by dx^2.
struct Stencil {
  std::vector<double> conductance;  // k(x_{i+1/2}) / dx^2, i = 0..Nx-1
  int nodes = 0;                    // Nx + 1
};

Stencil make_stencil(const DiffusionCoefficient& coeff, const Grid& grid);

/// y <- L u on the interior nodes, L u = (k u_x)_x - mu u. Walls of y are zero.
void apply_operator(const Stencil& s, std::span<const double> mu, std::span<const double> u,
                    std::span<double> y) noexcept;

/// Implicit diffusion-absorption step u <- r(h L) u for one age layer.
///
/// The matrices I - c h L depend on mu. The mu == 0 factors are built once;
/// otherwise the last factor is reused while the same mu row is passed.
class LayerStepper {
 public:
  LayerStepper(const Stencil& stencil, double h, Integrator integrator);

  /// Returns false on pivot breakdown. `residual` (if non-null) is raised to
  /// the max relative residual of the linear solves performed.
  bool step(std::span<const double> mu, std::span<double> u, double* residual);

  /// Same step for `count` <= kBlock profiles stored `stride` apart that
  /// share one mu row.
  bool step_block(std::span<const double> mu, double* u, std::size_t stride, int count, double* residual);

  double h() const noexcept { return h_; }
  Integrator integrator() const noexcept { return integrator_; }

 private:
  TridiagFactor factor_for(std::span<const double> mu) const;
  void solve_checked(const TridiagFactor& f, std::span<const double> mu, double c, double* x,
                     std::size_t stride, int count, double* residual);

  const Stencil* stencil_;
  double h_;
  Integrator integrator_;
  double gamma_;  // implicit coefficient of each stage
  TridiagFactor cached_;
  TridiagFactor last_;
  const double* last_mu_ = nullptr;
  std::vector<double> rhs_, y1_, lu_;
};

/// Everything about a problem that stays fixed across time steps: the
/// stencil, tabulated mu and beta, and the indicator of omega.
struct Discretization {
  Grid grid;
  Stencil stencil;
  std::vector<double> mu;    // trajectory layout, one row when uniform in (t, a), empty when 0
  std::vector<double> beta;  // slice layout, premultiplied by da
  bool has_beta = false;
  std::vector<double> chi;   // per space node
  Integrator integrator = Integrator::Sdirk2;

  Discretization(const Grid& g, const DiffusionCoefficient& coeff, const RateSpec& rates,
                 std::vector<double> chi, Integrator integrator);

  std::span<const double> mu_layer(int n, int j) const noexcept;
};

struct StepStats {
  double max_residual = 0.0;
  bool breakdown = false;
};

/// Renewal profile sum_j da beta_j level_j (beta already scaled by da).
void renewal(const Discretization& d, std::span<const double> level, std::span<double> out,
             Execution exec);

/// y^{n+1} = K_{n+1} S y^n + dt chi f^{n+1}; `source` may be empty.
StepStats forward_step(const Discretization& d, int n, std::span<const double> prev,
                       std::span<const double> source, std::span<double> next, bool check_residual,
                       Execution exec);

/// v^n = S^T K_{n+1} v^{n+1} - dt f^n; the renewal-dual term is included
/// when `nonlocal` is set; `source` may be empty.
StepStats backward_step(const Discretization& d, int n, std::span<const double> next,
                        std::span<const double> source, std::span<double> out, bool nonlocal,
                        bool check_residual, Execution exec);

namespace reference {

/// Serial, allocation-per-call implementations of the same maps, written
/// independently of the optimized kernels above.
void forward_step(const Discretization& d, int n, std::span<const double> prev,
                  std::span<const double> source, std::span<double> next);
void backward_step(const Discretization& d, int n, std::span<const double> next,
                   std::span<const double> source, std::span<double> out, bool nonlocal);

}  // namespace reference

}  // namespace degpop::kernels
