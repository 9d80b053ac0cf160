#include "degpop/certify.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>

namespace degpop {

const char* to_string(InequalityId id) noexcept {
  switch (id) {
    case InequalityId::Carleman31: return "carleman";
    case InequalityId::CarlemanNondeg: return "carleman_nondeg";
    case InequalityId::CarlemanLocal: return "carleman_local";
    case InequalityId::Caccioppoli: return "caccioppoli";
    case InequalityId::Observability: return "observability";
  }
  return "?";
}

InequalityId parse_inequality(const std::string& name) {
  for (auto id : {InequalityId::Carleman31, InequalityId::CarlemanNondeg, InequalityId::CarlemanLocal,
                  InequalityId::Caccioppoli, InequalityId::Observability}) {
    if (name == to_string(id)) return id;
  }
  throw ParameterError("unknown inequality '" + name + "'");
}

void finalize(CertificateReport& r) {
  r.anomaly = r.anomaly || !(r.lhs >= 0.0) || !(r.rhs >= 0.0);
  if (r.rhs > 0.0) {
    r.ratio = r.lhs / r.rhs;
  } else if (r.lhs == 0.0) {
    r.ratio = 0.0;
  } else {
    r.ratio = INFINITY;
    r.anomaly = true;
  }
}

namespace {

inline double clamped_exp(double log_factor) { return exp_weight(log_factor); }

// A nonnegative quantity value * e^{log}.
struct Scaled {
  double value = 0.0;
  double log = 0.0;
  double log_abs() const { return value > 0.0 ? std::log(value) + log : -INFINITY; }
};

// Writes lhs and the sum of rhs terms on a common scale.
void set_sides(CertificateReport& r, Scaled lhs, std::initializer_list<Scaled> rhs) {
  double c = lhs.log_abs();
  for (const auto& t : rhs) c = std::max(c, t.log_abs());
  if (!std::isfinite(c)) c = 0.0;
  r.log_scale = c;
  r.lhs = lhs.value * std::exp(lhs.log - c);
  r.rhs = 0.0;
  for (const auto& t : rhs) r.rhs += t.value * std::exp(t.log - c);
  finalize(r);
}

std::mt19937_64 sample_engine(std::uint64_t seed, int sample_id, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample_id), stream};
  return std::mt19937_64(seq);
}

std::vector<double> sample_coefficients(std::uint64_t seed, int sample_id, std::uint32_t stream) {
  auto rng = sample_engine(seed, sample_id, stream);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> c(9);
  for (auto& v : c) v = u(rng);
  return c;
}

// Second-order one-sided derivatives at the walls.
double vx_left(std::span<const double> v, double dx) { return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx); }
double vx_right(std::span<const double> v, double dx) {
  const std::size_t N = v.size() - 1;
  return (3.0 * v[N] - 4.0 * v[N - 1] + v[N - 2]) / (2.0 * dx);
}

std::vector<double> thetas_for_level(const Grid& g, int n) {
  std::vector<double> th(g.age_layers());
  for (int j = 0; j < g.age_layers(); ++j) th[j] = theta(g.t(n), g.a(j), g.T());
  return th;
}

double theta_min(const Grid& g) {
  double m = INFINITY;
  for (int n = 1; n < g.Nt(); ++n) m = std::min(m, theta(g.t(n), g.a(g.age_layers() - 1), g.T()));
  return m;
}

void check_trajectory_pair(const Field& v, const Field& f, const Grid& g) {
  if (v.rank() != Rank::Trajectory || f.rank() != Rank::Trajectory || !(v.grid() == g) || !(f.grid() == g)) {
    throw ShapeError("certify: v and f must be trajectories on the weight grid");
  }
}

}  // namespace

// ----------------------------------------------------------------- samples

namespace {

// sin(n pi x_i) and (1 - a_j/A)^m tables shared by the separable samples.
struct ModeTables {
  std::vector<double> sx;  // [n][i]
  std::vector<double> ra;  // [m][j]
  explicit ModeTables(const Grid& g) : sx(3 * g.space_nodes()), ra(3 * g.age_layers()) {
    for (int n = 1; n <= 3; ++n)
      for (int i = 0; i < g.space_nodes(); ++i) sx[(n - 1) * g.space_nodes() + i] = std::sin(n * M_PI * g.x(i));
    for (int m = 1; m <= 3; ++m)
      for (int j = 0; j < g.age_layers(); ++j) ra[(m - 1) * g.age_layers() + j] = std::pow(1.0 - g.a(j) / g.A(), m);
  }
};

// sum_{m,n} c_mn w_m ra_m(a_j) sx_n(x_i) into a slice.
void fill_modes(const Grid& g, const ModeTables& tab, const std::vector<double>& c, const double* w,
                std::span<double> out) {
  const int I = g.space_nodes(), J = g.age_layers();
  for (int j = 0; j < J; ++j) {
    double* row = out.data() + static_cast<std::size_t>(j) * I;
    std::fill(row, row + I, 0.0);
    for (int m = 1; m <= 3; ++m)
      for (int n = 1; n <= 3; ++n) {
        const double amp = c[(m - 1) * 3 + (n - 1)] * w[m - 1] * tab.ra[(m - 1) * J + j];
        const double* sx = tab.sx.data() + (n - 1) * I;
        for (int i = 0; i < I; ++i) row[i] += amp * sx[i];
      }
  }
}

}  // namespace

Field sample_terminal(const Grid& g, std::uint64_t seed, int sample_id) {
  const auto c = sample_coefficients(seed, sample_id, 0);
  const double ones[3] = {1.0, 1.0, 1.0};
  Field out(g, Rank::Slice);
  fill_modes(g, ModeTables(g), c, ones, out.values());
  return out;
}

std::function<double(double, double, double)> sample_source(const Grid& g, std::uint64_t seed, int sample_id) {
  const auto d = sample_coefficients(seed, sample_id, 1);
  const double A = g.A(), T = g.T();
  return [d, A, T](double t, double a, double x) {
    double v = 0.0;
    for (int m = 1; m <= 3; ++m)
      for (int n = 1; n <= 3; ++n)
        v += d[(m - 1) * 3 + (n - 1)] * std::sin(n * M_PI * x) * std::pow(1.0 - a / A, m) * std::cos(m * M_PI * t / T);
    return v;
  };
}

Propagator::LevelSource sample_source_levels(const Grid& g, std::uint64_t seed, int sample_id) {
  auto tab = std::make_shared<const ModeTables>(g);
  auto d = sample_coefficients(seed, sample_id, 1);
  return [g, tab, d](int n, std::span<double> out) {
    double w[3];
    for (int m = 1; m <= 3; ++m) w[m - 1] = std::cos(m * M_PI * g.t(n) / g.T());
    fill_modes(g, *tab, d, w, out);
  };
}

Propagator::LevelSource level_source(const Grid& g, std::function<double(double, double, double)> f) {
  return [g, f = std::move(f)](int n, std::span<double> out) {
    const int I = g.space_nodes();
    for (int j = 0; j < g.age_layers(); ++j)
      for (int i = 0; i < I; ++i) out[static_cast<std::size_t>(j) * I + i] = f(g.t(n), g.a(j), g.x(i));
  };
}

// --------------------------------------------------------------- Carleman

CarlemanAccumulator::CarlemanAccumulator(const WeightSet& ws, std::vector<double> s_values)
    : ws_(ws), s_(std::move(s_values)) {
  if (s_.empty()) throw ParameterError("carleman: no s values");
  for (double s : s_)
    if (!(s > 0.0)) throw ParameterError("carleman: s must be positive");
  const Grid& g = ws.grid();
  const auto& c = ws.coeff();
  psi_mid_.resize(g.Nx());
  k_mid_.resize(g.Nx());
  for (int i = 0; i < g.Nx(); ++i) {
    psi_mid_[i] = ws.psi(g.x_mid(i));
    k_mid_[i] = c.k(g.x_mid(i));
  }
  // (x - x0)^2 / k, dropped on the cell of x0 (its limit is 0 for M < 2).
  sing_.resize(g.space_nodes());
  const int skip = g.x0_node();
  for (int i = 0; i < g.space_nodes(); ++i) {
    const double kx = c.k(g.x(i));
    const double d = g.x(i) - c.x0;
    sing_[i] = (i == skip || kx <= 0.0) ? 0.0 : d * d / kx;
  }
  psi_node_.resize(g.space_nodes());
  wx_.resize(g.space_nodes());
  wsing_.resize(g.space_nodes());
  for (int i = 0; i < g.space_nodes(); ++i) {
    psi_node_[i] = ws.psi_node(i);
    wx_[i] = space_weight(g, i);
    wsing_[i] = wx_[i] * sing_[i];
  }
  double psi_max = *std::max_element(psi_mid_.begin(), psi_mid_.end());
  for (int i = 0; i < g.space_nodes(); ++i) psi_max = std::max(psi_max, ws.psi_node(i));
  const double th_min = theta_min(g);
  base_shift_ = 2.0 * th_min * psi_max;
  for (std::size_t q = 0; q < s_.size(); ++q) {
    shift_.push_back(s_[q] * base_shift_);
    doubles_.push_back(q > 0 && s_[q] == 2.0 * s_[q - 1]);
  }
  lhs_.assign(s_.size(), 0.0);
  rhs_.assign(s_.size(), 0.0);
}

void CarlemanAccumulator::add_level(int n, std::span<const double> v, std::span<const double> f) {
  const Grid& g = ws_.grid();
  if (n <= 0 || n >= g.Nt()) return;
  const int I = g.space_nodes(), N = g.Nx();
  const double dx = g.dx(), tw = time_weight(g, n) * g.da();
  const auto& c = ws_.coeff();
  const double x0 = c.x0, c1 = ws_.c1();
  const double k0 = c.k(0.0), k1 = c.k(1.0);
  const auto th = thetas_for_level(g, n);
  const std::size_t K = s_.size();
  // Per-row scratch: integrand weights and exponents 2 Theta psi - shift / s.
  std::vector<double> wg(N), bm(N), em(N), wz(I), wf(I), bn(I), en(I);
  // e <- exp(s_q b) clamped. For an exact doubling of s the unclamped
  // factors are the squares of the previous ones (b <= 0, so s_q b > clamp
  // implies s_{q-1} b > clamp).
  auto factors = [&](std::size_t q, const std::vector<double>& bv, std::vector<double>& e) {
    const double s = s_[q];
    const std::size_t m = bv.size();
    if (q > 0 && doubles_[q]) {
      for (std::size_t i = 0; i < m; ++i) e[i] = s * bv[i] > kLogClamp ? e[i] * e[i] : kExpClamp;
    } else {
      for (std::size_t i = 0; i < m; ++i) e[i] = exp_weight(s * bv[i]);
    }
  };
  for (int j = 0; j < g.age_layers(); ++j) {
    const auto vl = v.subspan(static_cast<std::size_t>(j) * I, I);
    const std::span<const double> fl =
        f.empty() ? std::span<const double>{} : f.subspan(static_cast<std::size_t>(j) * I, I);
    const double T = th[j];
    for (int i = 0; i < N; ++i) {
      const double vx = (vl[i + 1] - vl[i]) / dx;
      wg[i] = dx * k_mid_[i] * vx * vx;
      bm[i] = 2.0 * T * psi_mid_[i] - base_shift_;
    }
    for (int i = 0; i < I; ++i) {
      wz[i] = wsing_[i] * vl[i] * vl[i];
      wf[i] = fl.empty() ? 0.0 : wx_[i] * fl[i] * fl[i];
      bn[i] = 2.0 * T * psi_node_[i] - base_shift_;
    }
    const double bx0 = vx_left(vl, dx), bx1 = vx_right(vl, dx);
    for (std::size_t q = 0; q < K; ++q) {
      factors(q, bm, em);
      factors(q, bn, en);
      double grad = 0.0, zero = 0.0, src = 0.0;
      for (int i = 0; i < N; ++i) grad += wg[i] * em[i];
      for (int i = 0; i < I; ++i) {
        zero += wz[i] * en[i];
        src += wf[i] * en[i];
      }
      const double s = s_[q];
      const double bnd = c1 * (k1 * (1.0 - x0) * bx1 * bx1 * en[N] + k0 * x0 * bx0 * bx0 * en[0]);
      lhs_[q] += tw * (s * T * grad + s * s * s * T * T * T * zero);
      rhs_[q] += tw * (src + s * T * bnd);
    }
  }
}

std::vector<CertificateReport> CarlemanAccumulator::reports() const {
  std::vector<CertificateReport> out;
  for (std::size_t q = 0; q < s_.size(); ++q) {
    CertificateReport r;
    r.id = InequalityId::Carleman31;
    r.s = s_[q];
    r.grid = ws_.grid().summary();
    r.lhs = lhs_[q];
    r.rhs = rhs_[q];
    r.log_scale = shift_[q];
    finalize(r);
    out.push_back(r);
  }
  return out;
}

CertificateReport carleman_report(const Field& v, const Field& f, const WeightSet& ws) {
  check_trajectory_pair(v, f, ws.grid());
  CarlemanAccumulator acc(ws, {ws.s()});
  for (int n = 0; n < v.levels(); ++n) acc.add_level(n, v.level(n), f.level(n));
  return acc.reports().front();
}

std::vector<CertificateReport> carleman_s_sweep(const CarlemanProblem& p, const std::vector<double>& s_values) {
  if (s_values.empty()) throw ParameterError("carleman sweep: empty s list");
  for (std::size_t q = 1; q < s_values.size(); ++q)
    if (!(s_values[q] > s_values[q - 1])) throw ParameterError("carleman sweep: s values must increase");
  if (p.samples < 1) throw ParameterError("carleman sweep: need at least one sample");
  const WeightSet ws(p.coeff, p.grid, p.weights);
  const Propagator prop(p.grid, p.coeff, p.rates, p.solver);
  const int S = p.samples, K = static_cast<int>(s_values.size());
  std::vector<CertificateReport> out(static_cast<std::size_t>(S) * K);
  std::vector<std::string> errors(S);
#pragma omp parallel for schedule(dynamic)
  for (int m = 0; m < S; ++m) {
    try {
      CarlemanAccumulator acc(ws, s_values);
      const Field vT = sample_terminal(p.grid, p.seed, m);
      prop.backward_visit(vT, sample_source_levels(p.grid, p.seed, m), false,
                          [&](int n, std::span<const double> v, std::span<const double> f) { acc.add_level(n, v, f); });
      auto reps = acc.reports();
      for (int q = 0; q < K; ++q) {
        reps[q].sample_id = m;
        reps[q].seed = p.seed;
        out[static_cast<std::size_t>(q) * S + m] = reps[q];
      }
    } catch (const std::exception& e) {
      errors[m] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw SolverError("carleman sweep: " + e, -1);
  return out;
}

SweepSummary summarize_sweep(const std::vector<CertificateReport>& reports) {
  SweepSummary sum;
  std::map<double, double> best;
  for (const auto& r : reports) {
    auto [it, fresh] = best.emplace(r.s, r.ratio);
    if (!fresh) it->second = std::max(it->second, r.ratio);
  }
  for (const auto& [s, m] : best) {
    sum.s.push_back(s);
    sum.max_ratio.push_back(m);
  }
  if (sum.s.empty()) throw ParameterError("sweep summary: no reports");
  sum.s0_proxy = sum.s.back();
  for (std::size_t q = 0; q + 1 < sum.s.size(); ++q) {
    if (sum.max_ratio[q + 1] <= sum.max_ratio[q]) {
      sum.s0_proxy = sum.s[q];
      break;
    }
  }
  return sum;
}

double carleman_reference_s(const CarlemanProblem& problem) {
  CarlemanProblem p = problem;
  p.samples = std::min(p.samples, kReferenceSamples);
  std::vector<double> scan;
  for (int k = -10; k <= 4; ++k) scan.push_back(std::ldexp(1.0, k));
  return summarize_sweep(carleman_s_sweep(p, scan)).s0_proxy;
}

// ---------------------------------------------- local and non-degenerate

CertificateReport carleman_nondeg_report(const Field& v, const Field& f, const NondegWeights& w) {
  const WeightSet& ws = w.weights();
  const Grid& g = ws.grid();
  check_trajectory_pair(v, f, g);
  const auto& c = ws.coeff();
  const double s = ws.s(), kappa = ws.kappa(), dx = g.dx();
  const int i1 = static_cast<int>(std::ceil(w.B1() / dx - 1e-9));
  const int i2 = static_cast<int>(std::floor(w.B2() / dx + 1e-9));
  if (i2 - i1 < 3) throw DomainError("nondegenerate report: interval spans fewer than three cells");
  std::vector<double> es_node(g.space_nodes(), 0.0), es_mid(g.Nx(), 0.0);
  for (int i = i1; i <= i2; ++i) es_node[i] = std::exp(kappa * w.sigma(g.x(i)));
  for (int i = i1; i < i2; ++i) es_mid[i] = std::exp(kappa * w.sigma(g.x_mid(i)));
  const double cap = std::exp(2.0 * kappa * w.sigma_max());
  double Psi_max = -INFINITY;
  for (int i = i1; i <= i2; ++i) Psi_max = std::max(Psi_max, es_node[i] - cap);
  for (int i = i1; i < i2; ++i) Psi_max = std::max(Psi_max, es_mid[i] - cap);
  const double shift = 2.0 * s * theta_min(g) * Psi_max;
  const double kb1 = c.k(g.x(i1)), kb2 = c.k(g.x(i2));

  double lhs = 0.0, src = 0.0, bnd = 0.0;
  for (int n = 1; n < g.Nt(); ++n) {
    const double tw = time_weight(g, n) * g.da();
    for (int j = 0; j < g.age_layers(); ++j) {
      const double T = theta(g.t(n), g.a(j), g.T());
      const auto vl = v.layer(n, j);
      const auto fl = f.layer(n, j);
      double l = 0.0, r = 0.0;
      for (int i = i1; i <= i2; ++i) {
        const double ph = T * es_node[i];
        const double e = clamped_exp(2.0 * s * T * (es_node[i] - cap) - shift);
        const double wq = (i == i1 || i == i2) ? 0.5 * dx : dx;
        l += wq * s * s * s * ph * ph * ph * vl[i] * vl[i] * e;
        r += wq * fl[i] * fl[i] * e;
      }
      for (int i = i1; i < i2; ++i) {
        const double vx = (vl[i + 1] - vl[i]) / dx;
        l += dx * s * T * es_mid[i] * vx * vx * clamped_exp(2.0 * s * T * (es_mid[i] - cap) - shift);
      }
      const double vx1 = (-3.0 * vl[i1] + 4.0 * vl[i1 + 1] - vl[i1 + 2]) / (2.0 * dx);
      const double vx2 = (3.0 * vl[i2] - 4.0 * vl[i2 - 1] + vl[i2 - 2]) / (2.0 * dx);
      auto trace = [&](int i, double kb, double vx) {
        return kb * clamped_exp(2.0 * s * T * (es_node[i] - cap) - shift) * T * es_node[i] * vx * vx;
      };
      lhs += tw * l;
      src += tw * r;
      bnd += tw * (trace(i2, kb2, vx2) - trace(i1, kb1, vx1));
    }
  }
  CertificateReport rep;
  rep.id = InequalityId::CarlemanNondeg;
  rep.s = s;
  rep.grid = g.summary();
  rep.log_scale = shift;
  rep.lhs = lhs;
  rep.rhs = src - s * kappa * bnd;
  if (rep.rhs < 0.0) {
    rep.rhs = 0.0;
    rep.anomaly = true;
    rep.note = "negative boundary term dominated; rhs clamped to 0";
  }
  if (w.dfrak_floored()) rep.note += (rep.note.empty() ? "" : "; ") + std::string("dfrak floored");
  const bool flagged = rep.anomaly;
  finalize(rep);
  rep.anomaly = rep.anomaly || flagged;
  return rep;
}

namespace {

// Per-node log weight 2 s Phi / Theta on [0,1] for the omega-local
// estimate: the non-degenerate Psi on each side of omega, psi on omega.
std::vector<double> local_profile(const WeightSet& ws, const ControlRegion& region) {
  const Grid& g = ws.grid();
  const auto iv = region.intervals();
  const double lo = iv.front().lo, hi = iv.back().hi;
  std::vector<double> prof(g.space_nodes());
  std::optional<NondegWeights> left, right;
  if (lo > 0.0) left.emplace(ws, 0.0, lo);
  if (hi < 1.0) right.emplace(ws, hi, 1.0);
  for (int i = 0; i < g.space_nodes(); ++i) {
    const double x = g.x(i);
    const NondegWeights* nd = x <= lo && left ? &*left : (x >= hi && right ? &*right : nullptr);
    if (nd) {
      prof[i] = std::exp(ws.kappa() * nd->sigma(x)) - std::exp(2.0 * ws.kappa() * nd->sigma_max());
    } else {
      prof[i] = ws.psi_node(i);
    }
  }
  return prof;
}

// int int int over nodes with weight mask of v^2 (all levels, trapezoid in t).
double masked_energy(const Field& v, const std::vector<double>& mask) {
  const Grid& g = v.grid();
  double total = 0.0;
  for (int n = 0; n < v.levels(); ++n) {
    double lev = 0.0;
    for (int j = 0; j < v.layers(); ++j) {
      const auto l = v.layer(n, j);
      double s = 0.0;
      for (int i = 0; i < g.space_nodes(); ++i) s += mask[i] * space_weight(g, i) * l[i] * l[i];
      lev += g.da() * s;
    }
    total += time_weight(g, n) * lev;
  }
  return total;
}

// int_Q f^2 e^{2 s Theta prof - shift} over interior levels.
double weighted_source(const Field& f, const WeightSet& ws, const std::vector<double>& prof, double shift) {
  const Grid& g = ws.grid();
  const double s = ws.s();
  double total = 0.0;
  for (int n = 1; n < g.Nt(); ++n) {
    double lev = 0.0;
    for (int j = 0; j < g.age_layers(); ++j) {
      const double T = theta(g.t(n), g.a(j), g.T());
      const auto l = f.layer(n, j);
      double acc = 0.0;
      for (int i = 0; i < g.space_nodes(); ++i)
        acc += space_weight(g, i) * l[i] * l[i] * clamped_exp(2.0 * s * T * prof[i] - shift);
      lev += g.da() * acc;
    }
    total += time_weight(g, n) * lev;
  }
  return total;
}

}  // namespace

CertificateReport carleman_local_report(const Field& v, const Field& f, const WeightSet& ws,
                                        const ControlRegion& region) {
  const Grid& g = ws.grid();
  check_trajectory_pair(v, f, g);
  const CertificateReport deg = carleman_report(v, f, ws);
  const auto prof = local_profile(ws, region);
  const double shift = 2.0 * ws.s() * theta_min(g) * *std::max_element(prof.begin(), prof.end());
  const auto chi = region.indicator(g);
  CertificateReport rep;
  rep.id = InequalityId::CarlemanLocal;
  rep.s = ws.s();
  rep.grid = g.summary();
  rep.region = region.describe();
  set_sides(rep, {deg.lhs, deg.log_scale}, {{weighted_source(f, ws, prof, shift), shift}, {masked_energy(v, chi), 0.0}});
  return rep;
}

CertificateReport caccioppoli_report(const Field& v, const Field& f, Interval inner, Interval omega,
                                     const WeightSet& ws) {
  const Grid& g = ws.grid();
  check_trajectory_pair(v, f, g);
  const double x0 = ws.coeff().x0;
  if (!(inner.lo < inner.hi) || !(omega.lo < omega.hi)) throw ParameterError("caccioppoli: empty interval");
  if (inner.lo <= x0 && x0 <= inner.hi) throw ParameterError("caccioppoli: x0 lies in the closure of omega'");
  if (!(omega.lo <= inner.lo && inner.hi <= omega.hi)) throw ParameterError("caccioppoli: omega' must lie in omega");

  // Midpoints strictly inside omega' carry the gradient term.
  std::vector<int> mids;
  double psi_in = -INFINITY, c_bound = 0.0;
  std::vector<double> psi_mid(g.Nx());
  for (int i = 0; i < g.Nx(); ++i) {
    const double x = g.x_mid(i);
    if (x > inner.lo && x < inner.hi) {
      mids.push_back(i);
      psi_mid[i] = ws.psi(x);
      psi_in = std::max(psi_in, psi_mid[i]);
      c_bound = std::max(c_bound, std::abs(ws.psi_x(x)) * std::sqrt(ws.coeff().k(x)));
    }
  }
  if (mids.empty()) throw DomainError("caccioppoli: omega' contains no grid cell");
  std::vector<double> prof(g.space_nodes());
  for (int i = 0; i < g.space_nodes(); ++i) prof[i] = ws.psi_node(i);
  const double th_min = theta_min(g), s = ws.s();
  const double shift_in = 2.0 * s * th_min * psi_in;
  const double shift_src = 2.0 * s * th_min * *std::max_element(prof.begin(), prof.end());

  double lhs = 0.0;
  for (int n = 1; n < g.Nt(); ++n) {
    double lev = 0.0;
    for (int j = 0; j < g.age_layers(); ++j) {
      const double T = theta(g.t(n), g.a(j), g.T());
      const auto l = v.layer(n, j);
      for (int i : mids) {
        const double vx = (l[i + 1] - l[i]) / g.dx();
        lev += g.da() * g.dx() * vx * vx * clamped_exp(2.0 * s * T * psi_mid[i] - shift_in);
      }
    }
    lhs += time_weight(g, n) * lev;
  }
  std::vector<double> mask(g.space_nodes());
  for (int i = 0; i < g.space_nodes(); ++i) mask[i] = omega.contains(g.x(i)) ? 1.0 : 0.0;

  CertificateReport rep;
  rep.id = InequalityId::Caccioppoli;
  rep.s = s;
  rep.grid = g.summary();
  char buf[160];
  std::snprintf(buf, sizeof buf, "omega'=(%.17g,%.17g) omega=(%.17g,%.17g) c=%.17g", inner.lo, inner.hi, omega.lo,
                omega.hi, c_bound);
  rep.region = buf;
  rep.note = "psi_x sqrt(k) bound c recorded in region";
  set_sides(rep, {lhs, shift_in}, {{masked_energy(v, mask), 0.0}, {weighted_source(f, ws, prof, shift_src), shift_src}});
  return rep;
}

// ----------------------------------------------------------- observability

namespace {

void check_regime(const Grid& g, double abar, double delta) {
  const double T = g.T(), A = g.A();
  if (!(abar < T)) throw ParameterError("observability: requires abar < T");
  if (T < A) {
    if (!(delta > T && delta < A)) throw ParameterError("observability: T < A requires delta in (T, A)");
  } else if (A < T) {
    if (!(delta > abar && delta < A)) throw ParameterError("observability: A < T requires delta in (abar, A)");
  } else {
    throw ParameterError("observability: T = A is not covered");
  }
}

std::vector<CertificateReport> observe(const Propagator& prop, const Field& vT, const ObservabilityProblem& base,
                                       const std::vector<ObservabilityQuery>& queries) {
  const Grid& g = base.grid;
  const int I = g.space_nodes(), J = g.age_layers();
  const int n_obs = g.level_of(g.T() - base.rates.abar);
  const std::size_t Q = queries.size();
  std::vector<std::vector<double>> chi(Q);
  for (std::size_t q = 0; q < Q; ++q) chi[q] = queries[q].region.indicator(g);

  double lhs = 0.0;
  std::vector<double> omega_term(Q, 0.0), young_term(Q, 0.0);
  prop.backward_visit(vT, nullptr, true, [&](int n, std::span<const double> v, std::span<const double>) {
    const double tw = time_weight(g, n);
    std::vector<double> layer_x(J);  // int v^2 dx per layer
    for (int j = 0; j < J; ++j) {
      double s = 0.0;
      for (int i = 0; i < I; ++i) {
        const double x = v[static_cast<std::size_t>(j) * I + i];
        s += space_weight(g, i) * x * x;
      }
      layer_x[j] = s;
    }
    if (n == n_obs)
      for (int j = 0; j < J; ++j) lhs += g.da() * layer_x[j];
    for (std::size_t q = 0; q < Q; ++q) {
      double om = 0.0, young = 0.0;
      for (int j = 0; j < J; ++j) {
        const double* l = v.data() + static_cast<std::size_t>(j) * I;
        double s = 0.0;
        for (int i = 0; i < I; ++i) s += chi[q][i] * space_weight(g, i) * l[i] * l[i];
        om += g.da() * s;
        if (g.a(j) <= queries[q].delta) young += g.da() * layer_x[j];
      }
      omega_term[q] += tw * om;
      young_term[q] += tw * young;
    }
  });

  std::vector<CertificateReport> out;
  for (std::size_t q = 0; q < Q; ++q) {
    CertificateReport r;
    r.id = InequalityId::Observability;
    r.delta = queries[q].delta;
    r.grid = g.summary();
    r.region = queries[q].region.describe();
    r.lhs = lhs;
    if (base.variant == ObservabilityVariant::OI) {
      r.rhs = weighted_norm(vT, 1.0, Box::ages(0.0, queries[q].delta)) + omega_term[q];
    } else {
      r.rhs = young_term[q] + weighted_norm(vT) + omega_term[q];
      r.note = "T<A variant";
    }
    finalize(r);
    out.push_back(r);
  }
  return out;
}

}  // namespace

void validate(const ObservabilityProblem& p) { check_regime(p.grid, p.rates.abar, p.delta); }

CertificateReport observability_report(const Field& vT, const ObservabilityProblem& problem) {
  validate(problem);
  if (!(vT.grid() == problem.grid) || vT.rank() != Rank::Slice) throw ShapeError("observability: vT must be a slice");
  const Propagator prop(problem.grid, problem.coeff, problem.rates, problem.solver);
  return observe(prop, vT, problem, {{problem.region, problem.delta}}).front();
}

std::vector<CertificateReport> observability_batch(const ObservabilityProblem& base,
                                                   const std::vector<ObservabilityQuery>& queries, int samples,
                                                   std::uint64_t seed) {
  if (samples < 1) throw ParameterError("observability: need at least one sample");
  if (queries.empty()) throw ParameterError("observability: no queries");
  for (const auto& q : queries) check_regime(base.grid, base.rates.abar, q.delta);
  const Propagator prop(base.grid, base.coeff, base.rates, base.solver);
  const std::size_t Q = queries.size();
  std::vector<CertificateReport> out(samples * Q);
  std::vector<std::string> errors(samples);
#pragma omp parallel for schedule(dynamic)
  for (int m = 0; m < samples; ++m) {
    try {
      auto reps = observe(prop, sample_terminal(base.grid, seed, m), base, queries);
      for (std::size_t q = 0; q < Q; ++q) {
        reps[q].sample_id = m;
        reps[q].seed = seed;
        out[m * Q + q] = reps[q];
      }
    } catch (const std::exception& e) {
      errors[m] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw SolverError("observability: " + e, -1);
  return out;
}

// ----------------------------------------------------------------- summary

EmpiricalConstant empirical_constant(const std::vector<CertificateReport>& reports) {
  if (reports.empty()) throw ParameterError("empirical constant: no reports");
  EmpiricalConstant c;
  for (const auto& r : reports) {
    if (r.id != reports.front().id) throw ParameterError("empirical constant: mixed inequality ids");
    c.value = std::max(c.value, r.ratio);
  }
  c.samples = static_cast<int>(reports.size());
  return c;
}

}  // namespace degpop
