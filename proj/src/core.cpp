#include "degpop/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace degpop {

namespace {

bool on_midpoint(double x0, int Nx) {
  const double dx = 1.0 / Nx;
  const double s = x0 / dx - 0.5;
  return std::abs(s - std::round(s)) * dx <= 1e-12 * dx;
}

}  // namespace

Grid::Grid(double T, double A, int Nt, int Na, int Nx, double x0)
    : T_(T), A_(A), Nt_(Nt), Na_(Na), Nx_(Nx), x0_(x0) {
  if (!(T > 0) || !(A > 0)) throw ParameterError("grid: T and A must be positive");
  if (Nt < 4 || Na < 4 || Nx < 4) throw ParameterError("grid: Nt, Na, Nx must be >= 4");
  if (!(x0 > 0 && x0 < 1)) throw ParameterError("grid: x0 must lie in (0,1)");
  dt_ = T / Nt;
  da_ = A / Na;
  dx_ = 1.0 / Nx;
  if (std::abs(dt_ - da_) > 1e-12 * std::max(dt_, da_)) {
    throw ParameterError("grid: dt = T/Nt must equal da = A/Na");
  }
  da_ = dt_;
  if (on_midpoint(x0, Nx)) throw ParameterError("grid: x0 coincides with a flux midpoint");
}

Grid Grid::build(double T, double A, int Nt, int Nx, double x0) {
  if (!(T > 0) || !(A > 0) || Nt < 1) throw ParameterError("grid: T, A, Nt must be positive");
  const double na = A * Nt / T;
  const long Na = std::lround(na);
  if (std::abs(na - static_cast<double>(Na)) > 1e-9 * na) {
    throw ParameterError("grid: A / (T/Nt) is not an integer; choose Nt so that dt divides A");
  }
  if (Nx >= 1 && x0 > 0 && x0 < 1 && on_midpoint(x0, Nx)) ++Nx;
  return Grid(T, A, Nt, static_cast<int>(Na), Nx, x0);
}

int Grid::x0_node() const noexcept {
  return static_cast<int>(std::lround(x0_ / dx_));
}

int Grid::level_of(double t) const {
  const double s = t / dt_;
  const long n = std::lround(s);
  if (n < 0 || n > Nt_ || std::abs(s - static_cast<double>(n)) > 1e-9) {
    throw ParameterError("grid: t = " + std::to_string(t) + " is not a time level");
  }
  return static_cast<int>(n);
}

std::string Grid::summary() const {
  std::ostringstream os;
  os.precision(17);
  os << "T=" << T_ << " A=" << A_ << " Nt=" << Nt_ << " Na=" << Na_ << " Nx=" << Nx_ << " x0=" << x0_;
  return os.str();
}

const char* to_string(Rank r) noexcept {
  switch (r) {
    case Rank::Profile: return "profile";
    case Rank::Slice: return "slice";
    case Rank::Trajectory: return "trajectory";
  }
  return "?";
}

// ---------------------------------------------------------------- Field

Field::Field(Grid grid, Rank rank) : grid_(grid), rank_(rank) {
  values_.assign(static_cast<std::size_t>(levels()) * layers() * nodes(), 0.0);
}

Field::Field(Grid grid, Rank rank, std::vector<double> values)
    : grid_(grid), rank_(rank), values_(std::move(values)) {
  const auto expected = static_cast<std::size_t>(levels()) * layers() * nodes();
  if (values_.size() != expected) {
    throw ShapeError("field: expected " + std::to_string(expected) + " values, got " +
                     std::to_string(values_.size()));
  }
}

Field Field::profile(const Grid& g, const std::function<double(double)>& fn) {
  Field f(g, Rank::Profile);
  for (int i = 0; i < f.nodes(); ++i) f(0, 0, i) = fn(g.x(i));
  return f;
}

Field Field::slice(const Grid& g, const std::function<double(double, double)>& fn) {
  Field f(g, Rank::Slice);
  for (int j = 0; j < f.layers(); ++j)
    for (int i = 0; i < f.nodes(); ++i) f(0, j, i) = fn(g.a(j), g.x(i));
  return f;
}

Field Field::trajectory(const Grid& g, const std::function<double(double, double, double)>& fn) {
  Field f(g, Rank::Trajectory);
  for (int n = 0; n < f.levels(); ++n)
    for (int j = 0; j < f.layers(); ++j)
      for (int i = 0; i < f.nodes(); ++i) f(n, j, i) = fn(g.t(n), g.a(j), g.x(i));
  return f;
}

std::span<double> Field::level(int n) noexcept {
  const std::size_t len = static_cast<std::size_t>(layers()) * nodes();
  return std::span<double>(values_).subspan(n * len, len);
}

std::span<const double> Field::level(int n) const noexcept {
  const std::size_t len = static_cast<std::size_t>(layers()) * nodes();
  return std::span<const double>(values_).subspan(n * len, len);
}

std::span<double> Field::layer(int n, int j) noexcept {
  return std::span<double>(values_).subspan(index(n, j, 0), nodes());
}

std::span<const double> Field::layer(int n, int j) const noexcept {
  return std::span<const double>(values_).subspan(index(n, j, 0), nodes());
}

Field Field::slice_at(int n) const {
  if (rank_ == Rank::Profile) throw ShapeError("slice_at: profile field has no age layers");
  const auto lv = level(n);
  return Field(grid_, Rank::Slice, std::vector<double>(lv.begin(), lv.end()));
}

bool Field::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Field::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void Field::check_compatible(const Field& other) const {
  if (!(grid_ == other.grid_) || rank_ != other.rank_) {
    throw ShapeError("field: grid or rank mismatch");
  }
}

Field& Field::operator*=(double c) noexcept {
  for (double& v : values_) v *= c;
  return *this;
}

Field& Field::operator+=(const Field& other) { return axpy(1.0, other); }

Field& Field::operator-=(const Field& other) { return axpy(-1.0, other); }

Field& Field::axpy(double c, const Field& other) {
  check_compatible(other);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += c * other.values_[k];
  return *this;
}

Field operator*(double c, Field f) {
  f *= c;
  return f;
}

Field operator+(Field lhs, const Field& rhs) {
  lhs += rhs;
  return lhs;
}

Field operator-(Field lhs, const Field& rhs) {
  lhs -= rhs;
  return lhs;
}

// -------------------------------------------------------- ControlRegion

ControlRegion ControlRegion::single(double alpha, double rho, double x0) {
  if (!(0 < alpha && alpha < x0 && x0 < rho && rho < 1)) {
    throw ParameterError("control region: single interval needs 0 < alpha < x0 < rho < 1");
  }
  return ControlRegion(Single{alpha, rho});
}

ControlRegion ControlRegion::pair(double lambda1, double rho1, double lambda2, double rho2, double x0) {
  if (!(0 < lambda1 && lambda1 < rho1 && rho1 < x0 && x0 < lambda2 && lambda2 < rho2 && rho2 < 1)) {
    throw ParameterError(
        "control region: pair needs 0 < lambda1 < rho1 < x0 < lambda2 < rho2 < 1");
  }
  return ControlRegion(Pair{lambda1, rho1, lambda2, rho2});
}

bool ControlRegion::contains(double x) const noexcept {
  if (const auto* s = std::get_if<Single>(&v_)) return s->alpha < x && x < s->rho;
  const auto& p = std::get<Pair>(v_);
  return (p.lambda1 < x && x < p.rho1) || (p.lambda2 < x && x < p.rho2);
}

std::vector<double> ControlRegion::indicator(const Grid& g) const {
  std::vector<double> chi(g.space_nodes());
  for (int i = 0; i < g.space_nodes(); ++i) chi[i] = contains(g.x(i)) ? 1.0 : 0.0;
  return chi;
}

std::vector<Interval> ControlRegion::intervals() const {
  if (const auto* s = std::get_if<Single>(&v_)) return {{s->alpha, s->rho}};
  const auto& p = std::get<Pair>(v_);
  return {{p.lambda1, p.rho1}, {p.lambda2, p.rho2}};
}

std::string ControlRegion::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (const auto* s = std::get_if<Single>(&v_)) {
    os << "single(" << s->alpha << "," << s->rho << ")";
  } else {
    const auto& p = std::get<Pair>(v_);
    os << "pair(" << p.lambda1 << "," << p.rho1 << ";" << p.lambda2 << "," << p.rho2 << ")";
  }
  return os.str();
}

// ----------------------------------------------------------- quadrature

double time_weight(const Grid& g, int n) noexcept {
  return (n == 0 || n == g.Nt()) ? 0.5 * g.dt() : g.dt();
}

double age_weight(const Grid& g, int) noexcept { return g.da(); }

double space_weight(const Grid& g, int i) noexcept {
  return (i == 0 || i == g.Nx()) ? 0.5 * g.dx() : g.dx();
}

namespace {

struct AxisWeights {
  std::vector<double> t, a, x;
};

// Quadrature weights restricted to the nodes of `domain` for the active axes.
AxisWeights masked_weights(const Field& f, const Box& domain) {
  const Grid& g = f.grid();
  AxisWeights w;
  w.t.assign(f.levels(), 1.0);
  w.a.assign(f.layers(), 1.0);
  w.x.resize(f.nodes());
  if (f.rank() == Rank::Trajectory) {
    for (int n = 0; n < f.levels(); ++n) w.t[n] = domain.t.contains(g.t(n)) ? time_weight(g, n) : 0.0;
  }
  if (f.rank() != Rank::Profile) {
    for (int j = 0; j < f.layers(); ++j) w.a[j] = domain.a.contains(g.a(j)) ? age_weight(g, j) : 0.0;
  }
  for (int i = 0; i < f.nodes(); ++i) w.x[i] = domain.x.contains(g.x(i)) ? space_weight(g, i) : 0.0;

  auto empty = [](const std::vector<double>& v) {
    return std::none_of(v.begin(), v.end(), [](double c) { return c != 0.0; });
  };
  if (empty(w.t) || empty(w.a) || empty(w.x)) throw DomainError("domain contains no grid nodes");
  return w;
}

template <class Integrand>
double integrate(const Field& f, const Box& domain, Integrand&& integrand) {
  const AxisWeights w = masked_weights(f, domain);
  double total = 0.0;
  for (int n = 0; n < f.levels(); ++n) {
    if (w.t[n] == 0.0) continue;
    double level_sum = 0.0;
    for (int j = 0; j < f.layers(); ++j) {
      if (w.a[j] == 0.0) continue;
      double layer_sum = 0.0;
      for (int i = 0; i < f.nodes(); ++i) {
        if (w.x[i] != 0.0) layer_sum += w.x[i] * integrand(n, j, i);
      }
      level_sum += w.a[j] * layer_sum;
    }
    total += w.t[n] * level_sum;
  }
  return total;
}

}  // namespace

double weighted_norm(const Field& field, const Weight& weight, const Box& domain) {
  if (const auto* c = std::get_if<double>(&weight)) {
    const double cw = *c;
    return integrate(field, domain, [&](int n, int j, int i) {
      const double v = field(n, j, i);
      return cw * v * v;
    });
  }
  const Field& wf = std::get<std::reference_wrapper<const Field>>(weight).get();
  if (!(wf.grid() == field.grid()) || wf.rank() != field.rank()) {
    throw ShapeError("weighted_norm: weight and field do not share a grid");
  }
  return integrate(field, domain, [&](int n, int j, int i) {
    const double v = field(n, j, i);
    return wf(n, j, i) * v * v;
  });
}

double inner(const Field& f, const Field& g, const Box& domain) {
  if (!(f.grid() == g.grid()) || f.rank() != g.rank()) {
    throw ShapeError("inner: fields do not share a grid");
  }
  return integrate(f, domain, [&](int n, int j, int i) { return f(n, j, i) * g(n, j, i); });
}

Field restrict(const Field& field, const Box& domain) {
  const Grid& g = field.grid();
  masked_weights(field, domain);  // DomainError on an empty intersection
  Field out(g, field.rank());
  for (int n = 0; n < field.levels(); ++n) {
    if (field.rank() == Rank::Trajectory && !domain.t.contains(g.t(n))) continue;
    for (int j = 0; j < field.layers(); ++j) {
      if (field.rank() != Rank::Profile && !domain.a.contains(g.a(j))) continue;
      for (int i = 0; i < field.nodes(); ++i) {
        if (domain.x.contains(g.x(i))) out(n, j, i) = field(n, j, i);
      }
    }
  }
  return out;
}

}  // namespace degpop
