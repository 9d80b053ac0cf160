#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "degpop/adjoint.hpp"
#include "degpop/forward.hpp"
#include "degpop/hum.hpp"
#include "degpop/io.hpp"

namespace degpop::cli {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ parsing

namespace {

/// One JSON object whose keys are consumed one by one; finish() rejects
/// whatever was not consumed.
class Block {
 public:
  Block(const ordered_json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw ConfigError(ctx_ + " must be an object");
  }

  const ordered_json* find(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void get(const char* key, double& out) {
    if (auto* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
      if (!std::isfinite(out)) fail(key, "a finite number");
    }
  }
  void get(const char* key, int& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      const auto w = v->get<long long>();
      if (w < INT32_MIN || w > INT32_MAX) fail(key, "a 32-bit integer");
      out = static_cast<int>(w);
    }
  }
  void get(const char* key, std::optional<int>& out) {
    if (find(key)) {
      int v = 0;
      get(key, v);
      out = v;
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, bool& out) {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out, std::initializer_list<const char*> allowed = {}) {
    if (auto* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
      if (allowed.size() && std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return out == a; })) {
        std::string list;
        for (const char* a : allowed) list += (list.empty() ? "" : " | ") + std::string(a);
        fail(key, "one of " + list);
      }
    }
  }

  std::string path(const char* key) const { return ctx_ + "." + key; }

  [[noreturn]] void fail(const char* key, const std::string& expected) const {
    throw ConfigError(path(key) + ": expected " + expected);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + ctx_ + "." + k + "'");
  }

 private:
  const ordered_json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void parse_datum(const ordered_json& j, const std::string& ctx, DatumConfig& d) {
  Block b(j, ctx);
  b.get("preset", d.preset, {"zero", "smooth", "sample", "csv"});
  b.get("scale", d.scale);
  b.get("sample_id", d.sample_id);
  b.get("path", d.path);
  b.finish();
  require(d.sample_id >= 0, ctx + ".sample_id must be nonnegative");
  require(d.preset != "csv" || !d.path.empty(), ctx + ".path is required for the csv preset");
}

ordered_json datum_json(const DatumConfig& d) {
  ordered_json j = {{"preset", d.preset}, {"scale", d.scale}};
  if (d.preset == "sample") j["sample_id"] = d.sample_id;
  if (d.preset == "csv") j["path"] = d.path;
  return j;
}

const std::set<std::string> kCommands = {"simulate", "adjoint", "certify", "control", "sweep"};

void parse_command(const ordered_json& j, CommandConfig& c) {
  Block b(j, "command");
  b.get("name", c.name);
  require(kCommands.count(c.name) > 0, "command.name: expected simulate | adjoint | certify | control | sweep");
  b.get("seed", c.seed);
  const bool uses_initial = c.name == "simulate" || c.name == "control";
  if (auto* v = b.find("initial")) {
    require(uses_initial, "command.initial is only valid for simulate and control");
    parse_datum(*v, "command.initial", c.datum);
  }
  if (auto* v = b.find("terminal")) {
    require(c.name == "adjoint", "command.terminal is only valid for adjoint");
    parse_datum(*v, "command.terminal", c.datum);
  }
  b.get("source", c.source, {"zero", "sample"});
  b.get("nonlocal", c.nonlocal);
  b.get("fields", c.fields, {"trajectory", "terminal"});
  b.get("inequality", c.inequality,
        {"carleman", "carleman_nondeg", "carleman_local", "caccioppoli", "observability"});
  if (auto* v = b.find("s")) {
    c.s.clear();
    if (v->is_number()) {
      c.s.push_back(v->get<double>());
    } else if (v->is_array()) {
      for (const auto& e : *v) {
        require(e.is_number(), "command.s: expected numbers");
        c.s.push_back(e.get<double>());
      }
    } else {
      require(v->is_string() && v->get<std::string>() == "auto", "command.s: expected a number, a list or \"auto\"");
    }
    for (double s : c.s) require(std::isfinite(s) && s > 0.0, "command.s: values must be positive");
  }
  b.get("samples", c.samples);
  b.get("variant", c.variant, {"oi", "t_less_a"});
  if (auto* v = b.find("omega_inner")) {
    require(v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number(),
            "command.omega_inner: expected [lo, hi]");
    c.omega_inner_lo = (*v)[0].get<double>();
    c.omega_inner_hi = (*v)[1].get<double>();
  }
  b.get("B1", c.B1);
  b.get("B2", c.B2);
  b.get("weight_table", c.weight_table);
  b.get("delta", c.delta);
  b.get("epsilon", c.epsilon);
  b.get("max_iters", c.max_iters);
  b.get("cg_tol", c.cg_tol);
  if (auto* v = b.find("run")) c.run = *v;
  if (auto* v = b.find("over")) {
    require(v->is_object(), "command.over: expected an object of lists");
    c.over.clear();
    for (const auto& [k, vals] : v->items()) {
      require(vals.is_array() && !vals.empty(), "command.over." + k + ": expected a non-empty list");
      c.over.emplace_back(k, std::vector<ordered_json>(vals.begin(), vals.end()));
    }
  }
  b.finish();

  require(c.samples >= 1, "command.samples must be at least 1");
  require(c.epsilon > 0.0, "command.epsilon must be positive");
  require(c.max_iters >= 0, "command.max_iters must be nonnegative");
  require(c.cg_tol > 0.0 && c.cg_tol < 1.0, "command.cg_tol must lie in (0, 1)");
  require(c.omega_inner_lo < c.omega_inner_hi, "command.omega_inner must be an interval");
  require(c.B1 < c.B2, "command.B1 must be below command.B2");
  if (c.name == "sweep") {
    require(c.run.is_object(), "command.run: a sweep needs the command block to repeat");
    require(!c.over.empty(), "command.over: a sweep needs at least one parameter");
  }
}

}  // namespace

ExperimentConfig parse_config(const ordered_json& doc) {
  ExperimentConfig c;
  Block top(doc, "config");
  if (auto* v = top.find("grid")) {
    Block b(*v, "grid");
    b.get("T", c.grid.T);
    b.get("A", c.grid.A);
    b.get("Nt", c.grid.Nt);
    b.get("Na", c.grid.Na);
    b.get("Nx", c.grid.Nx);
    b.get("x0", c.grid.x0);
    b.finish();
  }
  if (auto* v = top.find("coefficient")) {
    Block b(*v, "coefficient");
    b.get("preset", c.coefficient.preset, {"power_law", "constant"});
    b.get("alpha", c.coefficient.alpha);
    b.get("value", c.coefficient.value);
    b.finish();
  }
  if (auto* v = top.find("rates")) {
    Block b(*v, "rates");
    if (auto* m = b.find("mu")) {
      Block bm(*m, "rates.mu");
      bm.get("preset", c.rates.mu.preset, {"zero", "constant", "gaussian_bump"});
      bm.get("value", c.rates.mu.value);
      bm.get("amplitude", c.rates.mu.amplitude);
      bm.get("center_a", c.rates.mu.center_a);
      bm.get("center_x", c.rates.mu.center_x);
      bm.get("width", c.rates.mu.width);
      bm.finish();
      require(c.rates.mu.width > 0.0, "rates.mu.width must be positive");
    }
    if (auto* m = b.find("beta")) {
      Block bb(*m, "rates.beta");
      bb.get("preset", c.rates.beta.preset, {"zero", "ramp", "bump"});
      bb.get("slope", c.rates.beta.slope);
      bb.get("amplitude", c.rates.beta.amplitude);
      bb.finish();
    }
    b.get("abar", c.rates.abar);
    b.finish();
  }
  if (auto* v = top.find("region")) {
    Block b(*v, "region");
    b.get("kind", c.region.kind, {"single", "pair"});
    for (auto [key, field] : {std::pair{"alpha", &c.region.alpha}, {"rho", &c.region.rho},
                              {"lambda1", &c.region.lambda1}, {"rho1", &c.region.rho1},
                              {"lambda2", &c.region.lambda2}, {"rho2", &c.region.rho2}})
      b.get(key, *field);
    b.finish();
  }
  if (auto* v = top.find("weights")) {
    if (!(v->is_string() && v->get<std::string>() == "auto")) {
      Block b(*v, "weights");
      b.get("s", c.weights.params.s);
      b.get("c1", c.weights.params.c1);
      if (auto* c2 = b.find("c2")) {
        if (c2->is_number()) {
          c.weights.params.c2 = c2->get<double>();
        } else {
          require(c2->is_string() && c2->get<std::string>() == "auto", "weights.c2: expected a number or \"auto\"");
        }
      }
      b.get("kappa", c.weights.params.kappa);
      b.finish();
      c.weights.automatic = false;
    }
  }
  if (auto* v = top.find("solver")) {
    Block b(*v, "solver");
    b.get("integrator", c.solver.integrator, {"sdirk2", "backward_euler"});
    b.get("execution", c.solver.execution, {"parallel", "serial"});
    b.get("check_residual", c.solver.check_residual);
    b.finish();
  }
  const auto* cmd = top.find("command");
  require(cmd != nullptr, "config.command is required");
  parse_command(*cmd, c.command);
  top.finish();
  return c;
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["grid"] = {{"T", c.grid.T}, {"A", c.grid.A}, {"Nt", c.grid.Nt}};
  if (c.grid.Na) j["grid"]["Na"] = *c.grid.Na;
  j["grid"]["Nx"] = c.grid.Nx;
  j["grid"]["x0"] = c.grid.x0;
  j["coefficient"] = {{"preset", c.coefficient.preset}};
  if (c.coefficient.preset == "power_law") {
    j["coefficient"]["alpha"] = c.coefficient.alpha;
  } else {
    j["coefficient"]["value"] = c.coefficient.value;
  }
  const auto& mu = c.rates.mu;
  ordered_json jm = {{"preset", mu.preset}};
  if (mu.preset != "zero") jm["value"] = mu.value;
  if (mu.preset == "gaussian_bump") {
    jm["amplitude"] = mu.amplitude;
    jm["center_a"] = mu.center_a;
    jm["center_x"] = mu.center_x;
    jm["width"] = mu.width;
  }
  const auto& beta = c.rates.beta;
  ordered_json jb = {{"preset", beta.preset}};
  if (beta.preset == "ramp") jb["slope"] = beta.slope;
  if (beta.preset == "bump") jb["amplitude"] = beta.amplitude;
  j["rates"] = {{"mu", jm}, {"beta", jb}, {"abar", c.rates.abar}};
  if (c.region.kind == "single") {
    j["region"] = {{"kind", "single"}, {"alpha", c.region.alpha}, {"rho", c.region.rho}};
  } else {
    j["region"] = {{"kind", "pair"},           {"lambda1", c.region.lambda1}, {"rho1", c.region.rho1},
                   {"lambda2", c.region.lambda2}, {"rho2", c.region.rho2}};
  }
  if (c.weights.automatic) {
    j["weights"] = "auto";
  } else {
    const auto& p = c.weights.params;
    j["weights"] = {{"s", p.s}, {"c1", p.c1}};
    if (p.c2) {
      j["weights"]["c2"] = *p.c2;
    } else {
      j["weights"]["c2"] = "auto";
    }
    j["weights"]["kappa"] = p.kappa;
  }
  j["solver"] = {{"integrator", c.solver.integrator},
                 {"execution", c.solver.execution},
                 {"check_residual", c.solver.check_residual}};

  const auto& m = c.command;
  ordered_json jc = {{"name", m.name}, {"seed", m.seed}};
  if (m.name == "simulate" || m.name == "adjoint") {
    jc[m.name == "simulate" ? "initial" : "terminal"] = datum_json(m.datum);
    jc["source"] = m.source;
    if (m.name == "adjoint") jc["nonlocal"] = m.nonlocal;
    jc["fields"] = m.fields;
  } else if (m.name == "certify") {
    jc["inequality"] = m.inequality;
    if (m.s.empty()) {
      jc["s"] = "auto";
    } else {
      jc["s"] = m.s;
    }
    jc["samples"] = m.samples;
    if (m.inequality == "observability") {
      jc["delta"] = m.delta;
      jc["variant"] = m.variant;
    }
    if (m.inequality == "caccioppoli") jc["omega_inner"] = {m.omega_inner_lo, m.omega_inner_hi};
    if (m.inequality == "carleman_nondeg") {
      jc["B1"] = m.B1;
      jc["B2"] = m.B2;
    }
    jc["weight_table"] = m.weight_table;
  } else if (m.name == "control") {
    jc["initial"] = datum_json(m.datum);
    jc["delta"] = m.delta;
    jc["epsilon"] = m.epsilon;
    jc["max_iters"] = m.max_iters;
    jc["cg_tol"] = m.cg_tol;
    jc["fields"] = m.fields;
  } else {
    jc["run"] = m.run;
    ordered_json over = ordered_json::object();
    for (const auto& [k, v] : m.over) over[k] = v;
    jc["over"] = over;
  }
  j["command"] = jc;
  return j;
}

// ------------------------------------------------------------ model objects

Grid make_grid(const GridConfig& c) {
  Grid g = Grid::build(c.T, c.A, c.Nt, c.Nx, c.x0);
  if (c.Na && *c.Na != g.Na())
    throw ParameterError("grid: Na = " + std::to_string(*c.Na) + " contradicts dt = da (A / dt = " +
                         std::to_string(g.Na()) + ")");
  return g;
}

DiffusionCoefficient make_coefficient(const CoefficientConfig& c, const Grid& g) {
  if (c.preset == "constant") return make_constant(c.value, g.x0());
  return classified(make_power_law(c.alpha, g.x0()), g);
}

RateSpec make_rates(const RatesConfig& c, double A) {
  RateSpec r;
  r.abar = c.abar;
  const MuConfig mu = c.mu;
  if (mu.preset == "zero") {
    r.mu = [](double, double, double) { return 0.0; };
  } else if (mu.preset == "constant") {
    r.mu = [v = mu.value](double, double, double) { return v; };
  } else {
    r.mu = [mu](double, double a, double x) {
      const double da = a - mu.center_a, dx = x - mu.center_x;
      return mu.value + mu.amplitude * std::exp(-(da * da + dx * dx) / (2.0 * mu.width * mu.width));
    };
  }
  const BetaConfig beta = c.beta;
  const double abar = c.abar;
  if (beta.preset == "zero") {
    r.beta = [](double, double) { return 0.0; };
  } else if (beta.preset == "ramp") {
    r.beta = [s = beta.slope, abar](double a, double) { return s * std::max(0.0, a - abar); };
  } else {
    r.beta = [amp = beta.amplitude, abar, A](double a, double) {
      if (a <= abar || a >= A) return 0.0;
      const double q = std::sin(M_PI * (a - abar) / (A - abar));
      return amp * q * q;
    };
  }
  return r;
}

ControlRegion make_region(const RegionConfig& c, double x0) {
  if (c.kind == "single") return ControlRegion::single(c.alpha, c.rho, x0);
  return ControlRegion::pair(c.lambda1, c.rho1, c.lambda2, c.rho2, x0);
}

SolverOptions make_solver(const SolverConfig& c) {
  SolverOptions o;
  o.integrator = c.integrator == "backward_euler" ? kernels::Integrator::BackwardEuler : kernels::Integrator::Sdirk2;
  o.execution = c.execution == "serial" ? kernels::Execution::Serial : kernels::Execution::Parallel;
  o.check_residual = c.check_residual;
  return o;
}

// ---------------------------------------------------------------- commands

namespace {

struct Model {
  Grid grid;
  DiffusionCoefficient coeff;
  RateSpec rates;
  ControlRegion region;
  SolverOptions solver;
};

Model build_model(const ExperimentConfig& c) {
  Grid g = make_grid(c.grid);
  Model m{g, make_coefficient(c.coefficient, g), make_rates(c.rates, g.A()), make_region(c.region, g.x0()),
          make_solver(c.solver)};
  const auto rr = check_rates(m.rates, g);
  if (!rr.mu_nonnegative) throw ParameterError("rates: mu takes negative values");
  if (!rr.beta_nonnegative) throw ParameterError("rates: beta takes negative values");
  if (!rr.beta_support) throw ParameterError("rates: beta does not vanish below abar");
  return m;
}

Field make_datum(const DatumConfig& d, const Grid& g, std::uint64_t seed) {
  Field f(g, Rank::Slice);
  if (d.preset == "smooth") {
    const double A = g.A();
    f = Field::slice(g, [A](double a, double x) { return a * (A - a) * std::sin(M_PI * x); });
  } else if (d.preset == "sample") {
    f = sample_terminal(g, seed, d.sample_id);
  } else if (d.preset == "csv") {
    f = io::import_field_csv(d.path, g);
    if (f.rank() != Rank::Slice) throw ShapeError("datum csv " + d.path + ": expected an (a, x) slice");
  }
  f *= d.scale;
  return f;
}

std::optional<Field> make_source(const CommandConfig& c, const Grid& g) {
  if (c.source == "zero") return std::nullopt;
  return Field::trajectory(g, sample_source(g, c.seed, c.datum.sample_id));
}

double l2(const Field& f) { return std::sqrt(weighted_norm(f)); }

ordered_json model_summary(const Model& m) {
  return {{"grid", m.grid.summary()},
          {"coefficient", m.coeff.name},
          {"classification", to_string(m.coeff.classification.kind)},
          {"region", m.region.describe()}};
}

ordered_json run_simulate(const ExperimentConfig& c, const fs::path& dir) {
  const Model m = build_model(c);
  ForwardProblem p{m.coeff, m.rates, m.region, m.grid, make_datum(c.command.datum, m.grid, c.command.seed),
                   make_source(c.command, m.grid)};
  const auto sol = solve_forward(p, m.solver);
  if (c.command.fields == "trajectory") {
    io::export_field_csv(sol.y, dir / "state.csv");
  } else {
    io::export_field_csv(sol.y.slice_at(m.grid.Nt()), dir / "state_T.csv");
  }
  const double yT = l2(sol.y.slice_at(m.grid.Nt()));
  return {{"model", model_summary(m)},
          {"headline", {{"terminal_norm", yT}, {"sup_norm2", sol.energy.sup_norm2}}},
          {"y0_norm", l2(p.y0)},
          {"terminal_norm", yT},
          {"sup_norm2", sol.energy.sup_norm2},
          {"dissipation", sol.energy.dissipation},
          {"max_linear_residual", sol.energy.max_residual}};
}

ordered_json run_adjoint(const ExperimentConfig& c, const fs::path& dir) {
  const Model m = build_model(c);
  AdjointProblem p{m.coeff, m.rates, m.grid, make_datum(c.command.datum, m.grid, c.command.seed),
                   make_source(c.command, m.grid), c.command.nonlocal};
  const Field v = solve_backward(p, m.solver);
  if (c.command.fields == "trajectory") {
    io::export_field_csv(v, dir / "adjoint.csv");
  } else {
    io::export_field_csv(v.slice_at(0), dir / "adjoint_0.csv");
  }
  const double v0 = l2(v.slice_at(0));
  return {{"model", model_summary(m)},
          {"headline", {{"initial_norm", v0}}},
          {"terminal_norm", l2(p.vT)},
          {"initial_norm", v0}};
}

Interval enclosing_interval(const ControlRegion& region, double lo, double hi) {
  for (const auto& iv : region.intervals())
    if (iv.lo <= lo && hi <= iv.hi) return iv;
  throw ParameterError("caccioppoli: omega_inner is not contained in the control region");
}

ordered_json run_certify(const ExperimentConfig& c, const fs::path& dir) {
  const Model m = build_model(c);
  const auto& cmd = c.command;
  const WeightSet ws(m.coeff, m.grid, c.weights.params);
  const InequalityId id = parse_inequality(cmd.inequality);
  std::vector<CertificateReport> reports;
  std::vector<double> s_values = cmd.s;
  ordered_json extra = ordered_json::object();

  if (id == InequalityId::Carleman31) {
    CarlemanProblem p{m.coeff, m.rates, m.grid, c.weights.params, cmd.samples, cmd.seed, m.solver};
    if (s_values.empty()) {
      const double s_ref = carleman_reference_s(p);
      s_values = {s_ref, 2 * s_ref, 4 * s_ref, 8 * s_ref};
      extra["s_ref"] = s_ref;
    }
    std::sort(s_values.begin(), s_values.end());
    s_values.erase(std::unique(s_values.begin(), s_values.end()), s_values.end());
    reports = carleman_s_sweep(p, s_values);
  } else if (id == InequalityId::Observability) {
    ObservabilityProblem p{m.coeff,   m.rates,
                           m.grid,    m.region,
                           cmd.delta, cmd.variant == "oi" ? ObservabilityVariant::OI : ObservabilityVariant::TLessA,
                           m.solver};
    validate(p);
    reports = observability_batch(p, {{m.region, cmd.delta}}, cmd.samples, cmd.seed);
    s_values.clear();
  } else {
    if (s_values.empty()) s_values = {ws.s()};
    const Propagator prop(m.grid, m.coeff, m.rates, m.solver);
    std::optional<NondegWeights> nondeg;
    Interval inner{cmd.omega_inner_lo, cmd.omega_inner_hi}, outer;
    if (id == InequalityId::Caccioppoli) outer = enclosing_interval(m.region, inner.lo, inner.hi);
    for (int k = 0; k < cmd.samples; ++k) {
      const Field vT = sample_terminal(m.grid, cmd.seed, k);
      const Field f = Field::trajectory(m.grid, sample_source(m.grid, cmd.seed, k));
      const Field v = prop.backward(vT, &f, false);
      for (double s : s_values) {
        const WeightSet wk = ws.with_s(s);
        CertificateReport r;
        if (id == InequalityId::CarlemanNondeg) {
          r = carleman_nondeg_report(v, f, NondegWeights(wk, cmd.B1, cmd.B2));
        } else if (id == InequalityId::CarlemanLocal) {
          r = carleman_local_report(v, f, wk, m.region);
        } else {
          r = caccioppoli_report(v, f, inner, outer, wk);
        }
        r.sample_id = k;
        r.seed = cmd.seed;
        reports.push_back(r);
      }
    }
    // Same order as the Carleman sweep: s, then sample.
    std::stable_sort(reports.begin(), reports.end(),
                     [](const CertificateReport& a, const CertificateReport& b) { return a.s < b.s; });
  }

  io::export_reports_csv(reports, dir / "reports.csv");
  if (cmd.weight_table) io::export_weight_table_csv(ws.with_s(s_values.empty() ? ws.s() : s_values.front()),
                                                    dir / "weights.csv");

  // Empirical constant per s (one row when s does not apply).
  std::vector<std::vector<double>> rows;
  ordered_json per_s = ordered_json::array();
  std::vector<double> keys = s_values.empty() ? std::vector<double>{0.0} : s_values;
  for (double s : keys) {
    std::vector<CertificateReport> sub;
    for (const auto& r : reports)
      if (s_values.empty() || r.s == s) sub.push_back(r);
    const auto ec = empirical_constant(sub);
    const auto anomalies = std::count_if(sub.begin(), sub.end(), [](const auto& r) { return r.anomaly; });
    rows.push_back({s, ec.value, static_cast<double>(ec.samples), static_cast<double>(anomalies)});
    per_s.push_back({{"s", s}, {"max_ratio", ec.value}, {"samples", ec.samples}, {"anomalies", anomalies}});
  }
  io::export_table_csv({"s", "max_ratio", "samples", "anomalies"}, rows, dir / "constants.csv");

  double max_ratio = 0.0;
  bool all_finite = true;
  for (const auto& r : reports) {
    max_ratio = std::max(max_ratio, r.ratio);
    all_finite = all_finite && std::isfinite(r.ratio);
  }
  ordered_json out = {{"model", model_summary(m)},
                      {"headline", {{"max_ratio", max_ratio}}},
                      {"inequality", cmd.inequality},
                      {"samples", cmd.samples},
                      {"seed", cmd.seed},
                      {"reports", reports.size()},
                      {"all_finite", all_finite},
                      {"max_ratio", max_ratio},
                      {"constants", per_s}};
  for (const auto& [k, v] : extra.items()) out[k] = v;
  return out;
}

void write_control_outputs(const HumResult& r, const Gramian& G, const HumProblem& p, const CommandConfig& cmd,
                           const fs::path& dir) {
  io::export_field_csv(r.terminal_data, dir / "terminal_data.csv");
  io::export_field_csv(G.terminal(p.y0, r.control), dir / "terminal_state.csv");
  std::vector<std::vector<double>> trace;
  for (std::size_t k = 0; k < r.cg_residual_trace.size(); ++k)
    trace.push_back({static_cast<double>(k), r.cg_residual_trace[k], r.energy_trace[k]});
  io::export_table_csv({"iteration", "relative_residual", "energy"}, trace, dir / "cg_trace.csv");
  if (cmd.fields == "trajectory") io::export_field_csv(r.control, dir / "control.csv");
}

ordered_json run_control(const ExperimentConfig& c, const fs::path& dir) {
  const Model m = build_model(c);
  const auto& cmd = c.command;
  HumProblem p{m.coeff,   m.rates,     m.region,      m.grid,    make_datum(cmd.datum, m.grid, cmd.seed),
               cmd.delta, cmd.epsilon, cmd.max_iters, cmd.cg_tol};
  validate(p);
  const Gramian G(p, m.solver);
  std::optional<HumResult> solved;
  try {
    solved = synthesize_control(p, m.solver);
  } catch (const ConvergenceError& e) {
    write_control_outputs(e.partial(), G, p, cmd, dir);
    throw;
  }
  const HumResult& r = *solved;
  write_control_outputs(r, G, p, cmd, dir);
  const NullReport nr = verify_null(r, p, m.solver);
  const double rel = r.y0_norm > 0.0 ? r.terminal_residual / r.y0_norm : 0.0;
  return {{"model", model_summary(m)},
          {"headline", {{"relative_residual", rel}, {"cost_ratio", r.cost_ratio}, {"iterations", r.iterations}}},
          {"delta", cmd.delta},
          {"epsilon", cmd.epsilon},
          {"seed", cmd.seed},
          {"iterations", r.iterations},
          {"terminal_residual", r.terminal_residual},
          {"relative_residual", rel},
          {"replayed_residual", nr.terminal_residual},
          {"control_norm", r.control_norm},
          {"y0_norm", r.y0_norm},
          {"cost_ratio", r.cost_ratio},
          {"outside_max", nr.outside_max}};
}

// Sets a dotted path inside a config document.
void set_path(ordered_json& doc, const std::string& path, const ordered_json& value) {
  ordered_json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("command.over: malformed path '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = ordered_json::object();
    node = &(*node)[key];
    if (!node->is_object()) throw ConfigError("command.over: '" + path + "' does not name a config block");
    start = dot + 1;
  }
}

std::string cell(const ordered_json& v) {
  if (v.is_number()) return io::format_double(v.get<double>());
  const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

ordered_json run_sweep(const ExperimentConfig& c, const fs::path& dir, int& status) {
  // Expand the cartesian product (last parameter fastest) and validate
  // every point before running any of them.
  ordered_json base = to_json(c);
  base["command"] = c.command.run;
  const auto& over = c.command.over;
  std::size_t total = 1;
  for (const auto& o : over) total *= o.second.size();
  std::vector<ExperimentConfig> points;
  std::vector<std::vector<ordered_json>> chosen;
  for (std::size_t k = 0; k < total; ++k) {
    ordered_json doc = base;
    std::vector<ordered_json> pick(over.size());
    std::size_t rem = k;
    for (std::size_t q = over.size(); q-- > 0;) {
      pick[q] = over[q].second[rem % over[q].second.size()];
      rem /= over[q].second.size();
    }
    for (std::size_t q = 0; q < over.size(); ++q) set_path(doc, over[q].first, pick[q]);
    ExperimentConfig point = parse_config(doc);
    if (point.command.name == "sweep") throw ConfigError("command.run: sweeps do not nest");
    points.push_back(std::move(point));
    chosen.push_back(std::move(pick));
  }

  std::vector<std::string> metric_names;
  std::vector<std::string> lines;
  ordered_json runs = ordered_json::array();
  status = kExitOk;
  for (std::size_t k = 0; k < points.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%04zu", k);
    const int code = run(points[k], dir / name);
    status = std::max(status, code);
    ordered_json headline = ordered_json::object();
    if (code == kExitOk) {
      std::ifstream is(dir / name / "summary.json");
      headline = ordered_json::parse(is).value("headline", ordered_json::object());
      if (metric_names.empty())
        for (const auto& [key, v] : headline.items()) metric_names.push_back(key);
    }
    std::string line = std::to_string(k);
    for (const auto& v : chosen[k]) line += "," + cell(v);
    line += "," + std::to_string(code);
    lines.push_back(line);
    runs.push_back({{"run", name}, {"exit_code", code}, {"headline", headline}});
  }
  std::string text = "index";
  for (const auto& [path, vals] : c.command.over) text += "," + path;
  text += ",exit_code";
  for (const auto& mname : metric_names) text += "," + mname;
  text += '\n';
  for (std::size_t k = 0; k < lines.size(); ++k) {
    text += lines[k];
    for (const auto& mname : metric_names) {
      const auto& h = runs[k]["headline"];
      text += "," + (h.contains(mname) ? cell(h[mname]) : std::string("nan"));
    }
    text += '\n';
  }
  io::write_text(dir / "sweep.csv", text);
  return {{"headline", ordered_json::object()}, {"points", points.size()}, {"runs", runs}};
}

}  // namespace

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitConvergence;
  if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const DomainError*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e))
    return kExitValidation;
  return kExitSolver;
}

void write_error(const fs::path& run_dir, const std::exception& e, int code) {
  ordered_json j = {{"status", "error"}, {"exit_code", code}};
  if (const auto* de = dynamic_cast<const Error*>(&e)) {
    j["kind"] = de->kind();
  } else {
    j["kind"] = "internal";
  }
  j["message"] = e.what();
  if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
    j["iterations"] = ce->partial().iterations;
    j["relative_residual"] = ce->partial().cg_residual_trace.empty() ? 1.0 : ce->partial().cg_residual_trace.back();
  }
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  io::write_text(run_dir / "error.json", j.dump(2) + "\n");
}

int run(const ExperimentConfig& config, const fs::path& run_dir) {
  try {
    std::error_code ec;
    fs::create_directories(run_dir, ec);
    if (ec) throw IoError("cannot create run directory (" + ec.message() + ")", run_dir.string());
    fs::remove(run_dir / "error.json", ec);
    fs::remove(run_dir / "summary.json", ec);
    io::write_text(run_dir / "config.json", to_json(config).dump(2) + "\n");
    const std::string& name = config.command.name;
    ordered_json summary;
    int status = kExitOk;
    if (name == "simulate") {
      summary = run_simulate(config, run_dir);
    } else if (name == "adjoint") {
      summary = run_adjoint(config, run_dir);
    } else if (name == "certify") {
      summary = run_certify(config, run_dir);
    } else if (name == "control") {
      summary = run_control(config, run_dir);
    } else {
      summary = run_sweep(config, run_dir, status);
    }
    ordered_json doc = {{"status", status == kExitOk ? "ok" : "partial"}, {"command", name}};
    for (const auto& [k, v] : summary.items()) doc[k] = v;
    io::write_text(run_dir / "summary.json", doc.dump(2) + "\n");
    return status;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    try {
      write_error(run_dir, e, code);
    } catch (...) {
    }
    return code;
  }
}

}  // namespace degpop::cli
