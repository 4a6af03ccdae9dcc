#include "cosaf/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cosaf/errors.hpp"

namespace cosaf {

double Amplitude::value(double t) const {
  switch (kind) {
    case Kind::constant:
      return amplitude;
    case Kind::ramp:
      return rate * t;
    case Kind::triangle: {
      const double ph = t / period - std::floor(t / period);
      if (ph < 0.25) return 4.0 * amplitude * ph;
      if (ph < 0.75) return amplitude * (2.0 - 4.0 * ph);
      return amplitude * (4.0 * ph - 4.0);
    }
    case Kind::sine:
      return amplitude * std::sin(2.0 * M_PI * t / period);
    case Kind::table: {
      if (table.empty()) return 0.0;
      if (t <= table.front().first) return table.front().second;
      if (t >= table.back().first) return table.back().second;
      auto it = std::upper_bound(table.begin(), table.end(), t,
                                 [](double x, const std::pair<double, double>& p) { return x < p.first; });
      const auto& [t1, v1] = *it;
      const auto& [t0, v0] = *(it - 1);
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return 0.0;
}

Amplitude::Kind Amplitude::parse_kind(const std::string& s) {
  if (s == "constant") return Kind::constant;
  if (s == "ramp") return Kind::ramp;
  if (s == "triangle") return Kind::triangle;
  if (s == "sine") return Kind::sine;
  if (s == "table") return Kind::table;
  throw ParseError("unknown amplitude type '" + s + "'");
}

std::string Amplitude::kind_name(Kind k) {
  switch (k) {
    case Kind::constant: return "constant";
    case Kind::ramp: return "ramp";
    case Kind::triangle: return "triangle";
    case Kind::sine: return "sine";
    case Kind::table: return "table";
  }
  return "?";
}

std::vector<double> LoadingProgram::uniform_grid(double t_end, double dt) {
  if (!(t_end > 0.0) || !(dt > 0.0)) throw std::invalid_argument("t_end and dt must be positive");
  const long n = std::max(1L, std::lround(t_end / dt));
  std::vector<double> t(n + 1);
  for (long i = 0; i <= n; ++i) t[i] = t_end * static_cast<double>(i) / static_cast<double>(n);
  return t;
}

PointTrajectory run_material_point(const LoadingProgram& program, const RunConfig& cfg,
                                   const MaterialParams& params, const PointState& init,
                                   const std::function<void(const PointSample&)>& on_step) {
  if (!program.strain) throw Error(ErrorClass::Config, "material-point run needs a strain program");
  if (program.times.size() < 2) throw Error(ErrorClass::Config, "time grid needs two points");
  PointTrajectory tr;
  PointSample s0;
  s0.t = program.times[0];
  s0.strain = program.strain(s0.t);
  s0.state = init;
  s0.state.strain = s0.strain;
  s0.t_e = elastic_stress_at(s0.strain, init.eps_p, params);
  tr.samples.push_back(s0);
  if (on_step) on_step(s0);
  for (size_t n = 1; n < program.times.size(); ++n) {
    const PointSample& prev = tr.samples.back();
    PointSample s;
    s.t = program.times[n];
    s.strain = program.strain(s.t);
    auto [st, fr] = step_point(prev.state, s.strain, s.t - prev.t, params, cfg.flow, cfg.local);
    s.state = st;
    s.flow = fr;
    s.t_e = elastic_stress_at(s.strain, st.eps_p, params);
    tr.samples.push_back(s);
    if (on_step) on_step(s);
  }
  return tr;
}

namespace {

struct Advance {
  FieldState state;
  StepInfo info;
  bool ok = false;
};

double vec_norm(const std::vector<Sym3>& v) {
  double s = 0.0;
  for (const auto& x : v) s += dot(x, x);
  return std::sqrt(s);
}

bool same(const DevSym3& a, const DevSym3& b) {
  return a.xx == b.xx && a.yy == b.yy && a.xy == b.xy && a.xz == b.xz && a.yz == b.yz;
}

// One staggered solve from `from` (at t0) to t1 without splitting.
Advance try_advance(const CosseratSolver& solver, const BoundaryData& data, const RunConfig& cfg,
                    const MaterialParams& p, const FieldState& from, double t1) {
  const double dt = t1 - from.time;
  const int nqp = static_cast<int>(from.qp.size());
  std::vector<DevSym3> ep(nqp);
  for (int q = 0; q < nqp; ++q) ep[q] = from.qp[q].eps_p;
  std::vector<Sym3> te_prev;
  double res_prev = std::numeric_limits<double>::infinity();
  Advance out;
  for (int it = 1; it <= cfg.stagger_max; ++it) {
    out.info.stagger_iterations = it;
    const LinearSolution sol = solver.solve(ep, data, t1);
    std::vector<PointState> qp(nqp);
    std::vector<Sym3> te(nqp);
    bool fixed = true;
    for (int q = 0; q < nqp; ++q) {
      auto [st, fr] = step_point(from.qp[q], sol.strain[q], dt, p, cfg.flow, cfg.local);
      qp[q] = st;
      te[q] = elastic_stress_at(sol.strain[q], st.eps_p, p);
      out.info.local_iterations += fr.iterations;
      out.info.local_substeps = std::max(out.info.local_substeps, fr.substeps);
      fixed = fixed && same(st.eps_p, ep[q]);
    }
    if (fixed) {
      // the linear solve already used the final plastic strain
      out.info.stagger_residual = 0.0;
      out.state = make_field_state(t1, sol, std::move(qp));
      out.ok = true;
      return out;
    }
    if (it > 1) {
      std::vector<Sym3> d(nqp);
      for (int q = 0; q < nqp; ++q) d[q] = te[q] - te_prev[q];
      const double res = vec_norm(d) / std::max(vec_norm(te), 1e-300);
      out.info.stagger_residual = res;
      if (res <= cfg.stagger_tol) {
        std::vector<DevSym3> ep_new(nqp);
        for (int q = 0; q < nqp; ++q) ep_new[q] = qp[q].eps_p;
        const LinearSolution fin = solver.solve(ep_new, data, t1);
        out.state = make_field_state(t1, fin, std::move(qp));
        out.ok = true;
        return out;
      }
      if (res >= res_prev) return out;  // not contracting
      res_prev = res;
    }
    te_prev = std::move(te);
    for (int q = 0; q < nqp; ++q) ep[q] = qp[q].eps_p;
  }
  return out;
}

Advance advance(const CosseratSolver& solver, const BoundaryData& data, const RunConfig& cfg,
                const MaterialParams& p, const FieldState& from, double t1, int depth) {
  Advance a = try_advance(solver, data, cfg, p, from, t1);
  a.info.halvings = depth;
  if (a.ok) return a;
  if (depth >= cfg.max_halvings)
    throw StaggeredNonConvergence("staggered iteration did not converge at t = " +
                                  std::to_string(t1) + " after " + std::to_string(depth) +
                                  " step halvings (residual " +
                                  std::to_string(a.info.stagger_residual) +
                                  "); use a smaller dt or a larger nu");
  const double tm = 0.5 * (from.time + t1);
  Advance first = advance(solver, data, cfg, p, from, tm, depth + 1);
  Advance second = advance(solver, data, cfg, p, first.state, t1, depth + 1);
  second.info.stagger_iterations += first.info.stagger_iterations + a.info.stagger_iterations;
  second.info.local_iterations += first.info.local_iterations + a.info.local_iterations;
  second.info.local_substeps = std::max(second.info.local_substeps, first.info.local_substeps);
  second.info.halvings = std::max(second.info.halvings, first.info.halvings);
  return second;
}

}  // namespace

FieldTrajectory run_quasistatic(const CosseratSolver& solver, const LoadingProgram& program,
                                const RunConfig& cfg, const MaterialParams& params,
                                const std::vector<DevSym3>& eps_p0, const std::vector<DevSym3>& b0,
                                const std::function<void(const FieldState&, const StepInfo&)>& on_step) {
  const auto& sp = solver.params();
  if (sp.moduli.mu != params.moduli.mu || sp.moduli.lambda != params.moduli.lambda ||
      sp.mu_c != params.mu_c || sp.l_c != params.l_c)
    throw Error(ErrorClass::Internal, "local law and solver disagree on elastic parameters");
  if (program.times.size() < 2) throw Error(ErrorClass::Config, "time grid needs two points");
  if (std::abs(program.times[0]) > 0.0)
    throw Error(ErrorClass::Config, "field programs start at t = 0");

  FieldTrajectory tr;
  tr.has_rates = cfg.store_rates;
  InitialReport init = solve_initial(solver, eps_p0, b0, program.data, cfg.policy);
  tr.initial_violations = init.violations + init.backstress_violations;
  tr.snapshots.push_back(std::move(init.state));
  tr.info.push_back({});
  if (on_step) on_step(tr.snapshots.back(), tr.info.back());

  FieldState current = tr.snapshots.back();
  for (size_t n = 1; n < program.times.size(); ++n) {
    Advance a = advance(solver, program.data, cfg, params, current, program.times[n], 0);
    current = std::move(a.state);
    if (on_step) on_step(current, a.info);
    if (cfg.store_rates || n + 1 == program.times.size()) {
      tr.snapshots.push_back(current);
      tr.info.push_back(a.info);
    }
  }
  return tr;
}

RunSeries series_of(const PointTrajectory& tr) {
  RunSeries s;
  s.weight = {1.0};
  for (const auto& x : tr.samples) {
    s.t.push_back(x.t);
    s.t_e.push_back({x.t_e});
    s.b.push_back({x.state.b});
  }
  return s;
}

RunSeries series_of(const FieldTrajectory& tr, const GridMesh& mesh) {
  RunSeries s;
  s.weight.assign(mesh.num_qp(), mesh.qp_weight());
  for (const auto& f : tr.snapshots) {
    s.t.push_back(f.time);
    s.t_e.push_back(f.t_e);
    std::vector<DevSym3> b(f.qp.size());
    for (size_t q = 0; q < f.qp.size(); ++q) b[q] = f.qp[q].b;
    s.b.push_back(std::move(b));
  }
  return s;
}

RateNorms point_rate_norms(const PointTrajectory& tr, const MaterialParams& p) {
  RateNorms r;
  for (size_t n = 1; n < tr.samples.size(); ++n) {
    const double dt = tr.samples[n].t - tr.samples[n - 1].t;
    const Sym3 dte = tr.samples[n].t_e - tr.samples[n - 1].t_e;
    r.c_inv_te += dot(compliance(dte, p.moduli), dte) / dt;
  }
  return r;
}

SweepEntry summarize(const RunSeries& s, const MaterialParams& p) {
  SweepEntry e;
  e.nu = p.nu;
  e.max_yield_gap = -std::numeric_limits<double>::infinity();
  const double lim = p.backstress_limit();
  std::vector<double> func(s.t.size()), raw(s.t.size());
  for (size_t n = 0; n < s.t.size(); ++n) {
    double f = 0.0, r = 0.0;
    for (size_t q = 0; q < s.weight.size(); ++q) {
      const double gap = yield_gap(s.t_e[n][q], s.b[n][q], p);
      e.max_yield_gap = std::max(e.max_yield_gap, gap);
      const double o = std::max(0.0, gap);
      e.overstress_sup = std::max(e.overstress_sup, o);
      r += s.weight[q] * o * o;
      f += s.weight[q] * o * o / (2.0 * p.nu);
      if (std::isfinite(lim))
        e.max_backstress_ratio = std::max(e.max_backstress_ratio, norm(s.b[n][q]) / lim);
    }
    func[n] = f;
    raw[n] = r;
  }
  double wi = 0.0, ri = 0.0, fmax = 0.0;
  for (size_t n = 0; n < s.t.size(); ++n) {
    fmax = std::max(fmax, func[n]);
    if (n == 0) continue;
    const double dt = s.t[n] - s.t[n - 1];
    wi += 0.5 * (func[n] + func[n - 1]) * dt;
    ri += 0.5 * (raw[n] + raw[n - 1]) * dt;
  }
  e.overstress_weighted = std::sqrt(wi);
  e.overstress_raw = std::sqrt(ri);
  e.rate_bound_sup = fmax;  // accumulators added by the caller
  return e;
}

namespace {

double series_distance(const RunSeries& a, const RunSeries& b) {
  if (a.t.size() != b.t.size() || a.weight.size() != b.weight.size())
    throw Error(ErrorClass::Internal, "sweep runs have different grids");
  double worst = 0.0;
  for (size_t n = 0; n < a.t.size(); ++n) {
    double s = 0.0;
    for (size_t q = 0; q < a.weight.size(); ++q) {
      const double x = norm(a.t_e[n][q] - b.t_e[n][q]);
      const double y = norm(a.b[n][q] - b.b[n][q]);
      s += a.weight[q] * (x * x + y * y);
    }
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

}  // namespace

SweepReport nu_sweep(const MaterialParams& base, const std::vector<double>& nus,
                     const std::function<std::pair<RunSeries, RateNorms>(const MaterialParams&)>& run) {
  if (nus.empty()) throw Error(ErrorClass::Config, "nu sweep needs at least one value");
  for (size_t i = 0; i < nus.size(); ++i) {
    if (!(nus[i] > 0.0)) throw Error(ErrorClass::Config, "nu values must be positive");
    if (i > 0 && !(nus[i] < nus[i - 1]))
      throw Error(ErrorClass::Config, "nu values must be strictly decreasing");
  }
  SweepReport rep;
  RunSeries prev;
  for (size_t i = 0; i < nus.size(); ++i) {
    MaterialParams p = base;
    p.nu = nus[i];
    auto [series, rates] = run(p);
    SweepEntry e = summarize(series, p);
    e.rates = rates;
    e.rate_bound_sup += rates.c_inv_te + rates.couple + rates.curvature;
    if (i > 0) e.diff_to_prev = series_distance(series, prev);
    rep.entries.push_back(e);
    prev = std::move(series);
  }
  for (size_t i = 2; i < rep.entries.size(); ++i)
    if (!(rep.entries[i].diff_to_prev < rep.entries[i - 1].diff_to_prev))
      rep.differences_monotone = false;
  double num = 0.0, den = 0.0;
  for (const auto& e : rep.entries) {
    num += std::max(0.0, e.max_yield_gap) * std::sqrt(e.nu);
    den += e.nu;
  }
  rep.envelope_c = num / den;
  const auto& last = rep.entries.back();
  rep.admissibility_ok = std::max(0.0, last.max_yield_gap) <= 3.0 * rep.envelope_c * std::sqrt(last.nu);
  const double ref = rep.entries.front().rate_bound_sup;
  for (const auto& e : rep.entries)
    if (e.rate_bound_sup > 1.1 * ref + 1e-300) rep.bounded = false;
  return rep;
}

SweepReport nu_sweep_point(const LoadingProgram& program, const RunConfig& cfg,
                           const MaterialParams& base, const std::vector<double>& nus,
                           const PointState& init) {
  return nu_sweep(base, nus, [&](const MaterialParams& p) {
    const PointTrajectory tr = run_material_point(program, cfg, p, init);
    return std::make_pair(series_of(tr), point_rate_norms(tr, p));
  });
}

}  // namespace cosaf
