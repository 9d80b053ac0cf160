#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "degpop/coefficients.hpp"
#include "degpop/core.hpp"
#include "degpop/solver.hpp"
#include "degpop/weights.hpp"

namespace degpop {

enum class InequalityId { Carleman31, CarlemanNondeg, CarlemanLocal, Caccioppoli, Observability };

const char* to_string(InequalityId id) noexcept;
InequalityId parse_inequality(const std::string& name);

/// Both sides of one inequality evaluated on one sample. Weighted reports
/// share a common factor: the true sides are lhs * e^{log_scale} and
/// rhs * e^{log_scale}; the ratio is unaffected.
struct CertificateReport {
  InequalityId id = InequalityId::Carleman31;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs; 0 for 0/0; +inf (with anomaly) for x/0
  double log_scale = 0.0;
  double s = 0.0;
  double delta = 0.0;
  int sample_id = 0;
  std::uint64_t seed = 0;
  std::string grid;
  std::string region;
  bool anomaly = false;
  std::string note;
};

/// Fills ratio and anomaly from lhs and rhs.
void finalize(CertificateReport& r);

// ---------------------------------------------------------------- samples

/// Terminal datum sum_{m,n<=3} c_mn sin(n pi x) (1 - a/A)^m with c_mn drawn
/// uniformly from (-1, 1); vanishes at a = A and at the walls.
Field sample_terminal(const Grid& g, std::uint64_t seed, int sample_id);

/// Source sum_{m,n<=3} d_mn sin(n pi x) (1 - a/A)^m cos(m pi t / T), drawn
/// from a stream independent of sample_terminal.
std::function<double(double, double, double)> sample_source(const Grid& g, std::uint64_t seed, int sample_id);

/// sample_source tabulated one time level at a time (separable, no
/// per-node transcendental calls).
Propagator::LevelSource sample_source_levels(const Grid& g, std::uint64_t seed, int sample_id);

/// Any source function tabulated one time level at a time.
Propagator::LevelSource level_source(const Grid& g, std::function<double(double, double, double)> f);

// --------------------------------------------------------------- Carleman

/// Degenerate Carleman estimate for the adjoint system with source f:
///   LHS = int_Q (s Theta k v_x^2 + s^3 Theta^3 (x-x0)^2/k v^2) e^{2 s phi}
///   RHS = int_Q f^2 e^{2 s phi}
///       + s c1 int int Theta e^{2 s phi} [k (x-x0) v_x^2]_{x=0}^{x=1}
/// Time levels 0 and Nt carry zero weight (Theta is infinite there). The
/// accumulator evaluates several s values in one pass over the levels.
class CarlemanAccumulator {
 public:
  CarlemanAccumulator(const WeightSet& ws, std::vector<double> s_values);

  void add_level(int n, std::span<const double> v, std::span<const double> f);
  /// One report per s value (id, sides, log_scale, s filled in).
  std::vector<CertificateReport> reports() const;

 private:
  WeightSet ws_;
  std::vector<double> s_;
  double base_shift_ = 0.0;    // max of 2 phi over the evaluated nodes
  std::vector<double> shift_;  // s * base_shift_
  std::vector<bool> doubles_;  // s_q == 2 s_{q-1}
  std::vector<double> psi_mid_, k_mid_;               // per midpoint
  std::vector<double> psi_node_, sing_, wx_, wsing_;  // per node
  std::vector<double> lhs_, rhs_;
};

CertificateReport carleman_report(const Field& v, const Field& f, const WeightSet& ws);

struct CarlemanProblem {
  DiffusionCoefficient coeff;
  RateSpec rates;
  Grid grid;
  WeightParams weights;
  int samples = 20;
  std::uint64_t seed = 42;
  SolverOptions solver;
};

/// Reports for every (s, sample) pair, ordered by s then sample id. Each
/// sample solves the adjoint system (no renewal-dual term) backward once.
std::vector<CertificateReport> carleman_s_sweep(const CarlemanProblem& problem, const std::vector<double>& s_values);

struct SweepSummary {
  std::vector<double> s;
  std::vector<double> max_ratio;
  /// Smallest s after which the max ratio stops increasing.
  double s0_proxy = 0.0;
};

SweepSummary summarize_sweep(const std::vector<CertificateReport>& reports);

/// Reference Carleman parameter: the point of a dyadic scan s = 2^k
/// (k = -10..4) where the max ratio over the first kReferenceSamples samples
/// stops growing.
inline constexpr int kReferenceSamples = 4;
double carleman_reference_s(const CarlemanProblem& problem);

// ---------------------------------------------- local and non-degenerate

/// Non-degenerate estimate on [B1, B2] (k > 0 there), with phat, Phi:
///   LHS = int (s^3 phat^3 v^2 + s phat v_x^2) e^{2 s Phi}
///   RHS = int f^2 e^{2 s Phi} - s kappa int int [k e^{2 s Phi} phat v_x^2]_{B1}^{B2}
/// A negative RHS is clamped to 0 and flagged as an anomaly. B1 and B2
/// are snapped to grid nodes.
CertificateReport carleman_nondeg_report(const Field& v, const Field& f, const NondegWeights& w);

/// omega-local estimate:
///   LHS as in carleman_report,
///   RHS = int_Q f^2 e^{2 s Phi} + int int int_omega v^2,
/// where Phi is the non-degenerate weight on the parts of [0,1] left and
/// right of omega and the degenerate phi on omega.
CertificateReport carleman_local_report(const Field& v, const Field& f, const WeightSet& ws,
                                        const ControlRegion& region);

/// Caccioppoli: LHS = int int int_{omega'} v_x^2 e^{2 s Theta psi},
/// RHS = int int int_omega v^2 + int_Q f^2 e^{2 s Theta psi}. Requires
/// x0 outside the closure of omega'. The note records the constant c in
/// |psi_x| sqrt(k) <= c on omega'.
CertificateReport caccioppoli_report(const Field& v, const Field& f, Interval omega_inner, Interval omega,
                                     const WeightSet& ws);

// ----------------------------------------------------------- observability

enum class ObservabilityVariant { OI, TLessA };

struct ObservabilityProblem {
  DiffusionCoefficient coeff;
  RateSpec rates;
  Grid grid;
  ControlRegion region;
  double delta = 0.0;
  ObservabilityVariant variant = ObservabilityVariant::OI;
  SolverOptions solver;
};

/// Throws ParameterError unless abar < T and delta lies in (T, A) when
/// T < A or in (abar, A) when A < T.
void validate(const ObservabilityProblem& p);

/// LHS = int int v^2(T - abar), RHS = int_0^delta int vT^2 + int int int_omega v^2
/// (TLessA adds int_0^T int_0^delta int v^2 and uses the full int vT^2),
/// v solving the system with the renewal-dual term from vT.
CertificateReport observability_report(const Field& vT, const ObservabilityProblem& problem);

/// Evaluates every (region, delta) query on one backward solve per sample.
/// Reports are ordered by sample, then region, then delta.
struct ObservabilityQuery {
  ControlRegion region;
  double delta;
};
std::vector<CertificateReport> observability_batch(const ObservabilityProblem& base,
                                                   const std::vector<ObservabilityQuery>& queries, int samples,
                                                   std::uint64_t seed);

// ----------------------------------------------------------------- summary

struct EmpiricalConstant {
  double value = 0.0;
  int samples = 0;
};

/// Max ratio over the reports; all must share one inequality id.
EmpiricalConstant empirical_constant(const std::vector<CertificateReport>& reports);

}  // namespace degpop
