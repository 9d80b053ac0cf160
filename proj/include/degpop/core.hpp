#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "degpop/errors.hpp"

namespace degpop {

// Discretization of Q = (0,T) x (0,A) x (0,1).
//
//   time levels  t_n = n dt,          n = 0..Nt        (t = 0 and t = T are stored)
//   age layers   a_j = (j + 1/2) da,  j = 0..Na-1      (cell centers)
//   space nodes  x_i = i dx,          i = 0..Nx        (x = 0 and x = 1 are Dirichlet walls)
//
// dt == da, so one time step moves every age layer exactly one index along
// its characteristic t - a = const. The diffusion flux lives on the
// midpoints x_{i+1/2}; x0 is never allowed to sit on one of them.
class Grid {
 public:
  /// Strict constructor: throws ParameterError on any violated invariant.
  Grid(double T, double A, int Nt, int Na, int Nx, double x0);

  /// Builder used by front ends: derives Na = A / dt and bumps Nx by one
  /// when x0 would land on a flux midpoint.
  static Grid build(double T, double A, int Nt, int Nx, double x0);

  double T() const noexcept { return T_; }
  double A() const noexcept { return A_; }
  int Nt() const noexcept { return Nt_; }
  int Na() const noexcept { return Na_; }
  int Nx() const noexcept { return Nx_; }
  double x0() const noexcept { return x0_; }
  double dt() const noexcept { return dt_; }
  double da() const noexcept { return da_; }
  double dx() const noexcept { return dx_; }

  int time_levels() const noexcept { return Nt_ + 1; }
  int age_layers() const noexcept { return Na_; }
  int space_nodes() const noexcept { return Nx_ + 1; }

  double t(int n) const noexcept { return n * dt_; }
  double a(int j) const noexcept { return (j + 0.5) * da_; }
  double x(int i) const noexcept { return i * dx_; }
  double x_mid(int i) const noexcept { return (i + 0.5) * dx_; }

  /// Index of the space node closest to x0.
  int x0_node() const noexcept;

  /// Time level index for time t; throws ParameterError when t is not a
  /// level within dt * 1e-9.
  int level_of(double t) const;

  std::size_t slice_size() const noexcept {
    return static_cast<std::size_t>(Na_) * space_nodes();
  }
  std::size_t trajectory_size() const noexcept {
    return slice_size() * time_levels();
  }

  std::string summary() const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  double T_, A_;
  int Nt_, Na_, Nx_;
  double x0_;
  double dt_, da_, dx_;
};

/// Closed interval [lo, hi]; membership is inclusive.
struct Interval {
  double lo = -1e300;
  double hi = 1e300;
  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
  static Interval all() noexcept { return {}; }
};

/// Axis-aligned sub-box of Q. Unused axes of lower-rank fields are ignored.
struct Box {
  Interval t = Interval::all();
  Interval a = Interval::all();
  Interval x = Interval::all();

  static Box full() noexcept { return {}; }
  static Box ages(double lo, double hi) noexcept { return {Interval::all(), {lo, hi}, Interval::all()}; }
  static Box space(double lo, double hi) noexcept { return {Interval::all(), Interval::all(), {lo, hi}}; }
};

enum class Rank { Profile, Slice, Trajectory };

const char* to_string(Rank r) noexcept;

/// Scalar field sampled on a grid, stored row-major in (t, a, x) order.
class Field {
 public:
  Field(Grid grid, Rank rank);
  Field(Grid grid, Rank rank, std::vector<double> values);

  static Field zeros(const Grid& g, Rank r) { return Field(g, r); }
  static Field profile(const Grid& g, const std::function<double(double)>& fn);
  static Field slice(const Grid& g, const std::function<double(double, double)>& fn);
  static Field trajectory(const Grid& g, const std::function<double(double, double, double)>& fn);

  const Grid& grid() const noexcept { return grid_; }
  Rank rank() const noexcept { return rank_; }
  std::size_t size() const noexcept { return values_.size(); }

  int levels() const noexcept { return rank_ == Rank::Trajectory ? grid_.time_levels() : 1; }
  int layers() const noexcept { return rank_ == Rank::Profile ? 1 : grid_.age_layers(); }
  int nodes() const noexcept { return grid_.space_nodes(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator()(int n, int j, int i) noexcept { return values_[index(n, j, i)]; }
  double operator()(int n, int j, int i) const noexcept { return values_[index(n, j, i)]; }

  /// One (a, x) slice of a trajectory (or the whole field for a slice).
  std::span<double> level(int n) noexcept;
  std::span<const double> level(int n) const noexcept;
  /// One x profile at time level n and age layer j.
  std::span<double> layer(int n, int j) noexcept;
  std::span<const double> layer(int n, int j) const noexcept;

  /// Copies time level n of a trajectory into a slice field.
  Field slice_at(int n) const;

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  Field& operator*=(double c) noexcept;
  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  /// this += c * other
  Field& axpy(double c, const Field& other);

 private:
  std::size_t index(int n, int j, int i) const noexcept {
    return (static_cast<std::size_t>(n) * layers() + j) * nodes() + i;
  }
  void check_compatible(const Field& other) const;

  Grid grid_;
  Rank rank_;
  std::vector<double> values_;
};

Field operator*(double c, Field f);
Field operator+(Field lhs, const Field& rhs);
Field operator-(Field lhs, const Field& rhs);

/// Control region in x: one interval containing x0, or two intervals on
/// either side of it.
class ControlRegion {
 public:
  struct Single {
    double alpha, rho;
  };
  struct Pair {
    double lambda1, rho1, lambda2, rho2;
  };

  static ControlRegion single(double alpha, double rho, double x0);
  static ControlRegion pair(double lambda1, double rho1, double lambda2, double rho2, double x0);

  const std::variant<Single, Pair>& variant() const noexcept { return v_; }
  bool is_pair() const noexcept { return std::holds_alternative<Pair>(v_); }

  /// Open-set membership (the sharp indicator chi_omega).
  bool contains(double x) const noexcept;
  /// chi_omega sampled on the space nodes of g.
  std::vector<double> indicator(const Grid& g) const;
  /// The one or two open intervals forming the region.
  std::vector<Interval> intervals() const;
  std::string describe() const;

 private:
  explicit ControlRegion(std::variant<Single, Pair> v) : v_(v) {}
  std::variant<Single, Pair> v_;
};

// Quadrature weights of the composite rule used for every integral:
// trapezoid over time levels and space nodes, midpoint (the trapezoid rule
// on cell centers) over age layers.
double time_weight(const Grid& g, int n) noexcept;
double age_weight(const Grid& g, int j) noexcept;
double space_weight(const Grid& g, int i) noexcept;

using Weight = std::variant<double, std::reference_wrapper<const Field>>;

/// Quadrature approximation of  integral over `domain` of weight * field^2.
double weighted_norm(const Field& field, const Weight& weight = 1.0, const Box& domain = Box::full());

/// Quadrature approximation of  integral over `domain` of f * g.
double inner(const Field& f, const Field& g, const Box& domain = Box::full());

/// Copy of `field` that vanishes at nodes outside `domain`.
Field restrict(const Field& field, const Box& domain);

}  // namespace degpop
