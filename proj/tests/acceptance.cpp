// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cosaf/diagnostics.hpp"
#include "cosaf/evolution.hpp"
#include "oracles.hpp"

using namespace cosaf;

namespace {

const Sym3 kShear{0.0, 0.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 0.0};
const std::vector<double> kNus{0.1, 0.05, 0.025, 0.0125};

MaterialParams standard() {
  MaterialParams p;
  p.moduli = {50.0, 75.0};
  p.mu_c = 25.0;
  p.l_c = 0.1;
  p.c = 1.0;
  p.d = 1.0;
  p.sigma_y = 1.0;
  p.nu = 1e-2;
  return p;
}

Amplitude triangle(double a, double period) {
  Amplitude amp;
  amp.kind = Amplitude::Kind::triangle;
  amp.amplitude = a;
  amp.period = period;
  return amp;
}

// 10 shear cycles, dt = 1e-3
LoadingProgram cyclic(double a) {
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(10.0, 1e-3);
  const Amplitude amp = triangle(a, 1.0);
  prog.strain = [amp](double t) { return amp.value(t) * kShear; };
  return prog;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Line {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};
std::vector<Line> lines;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  lines.push_back({id, name, pass, detail});
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Largest reconstructed |tr eps_p|, |tr b| seen by any run below.
double trace_max = 0.0;
long trace_checks = 0;

void watch_trace(const PointState& s) {
  trace_max = std::max({trace_max, std::abs(trace(s.eps_p.to_sym())), std::abs(trace(s.b.to_sym()))});
  ++trace_checks;
}

void watch_trace(const FieldState& s) {
  for (const auto& q : s.qp) watch_trace(q);
}

// max over the run of |b|
double max_backstress(const PointTrajectory& tr) {
  double m = 0.0;
  for (const auto& s : tr.samples) m = std::max(m, norm(s.state.b));
  return m;
}

SweepReport point_sweep(const LoadingProgram& prog, const MaterialParams& base) {
  return nu_sweep(base, kNus, [&](const MaterialParams& p) {
    const auto tr = run_material_point(prog, RunConfig{}, p, PointState{},
                                       [](const PointSample& s) { watch_trace(s.state); });
    return std::make_pair(series_of(tr), point_rate_norms(tr, p));
  });
}

// Twist of the top face about the vertical axis through the centre; the
// bottom is clamped and the sides are traction free.
SweepReport torsion_sweep(const MaterialParams& base) {
  const GridMesh mesh = GridMesh::box(3, 3, 3, {1.0, 1.0, 1.0},
                                      {FaceTag::neumann, FaceTag::neumann, FaceTag::neumann,
                                       FaceTag::neumann, FaceTag::dirichlet, FaceTag::dirichlet});
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(1.0, 0.01);
  const Amplitude amp = triangle(0.15, 2.0);
  prog.data.g_D = [amp](const Vec3& x, double t) {
    const double th = amp.value(t) * x.z;
    return Vec3{-th * (x.y - 0.5), th * (x.x - 0.5), 0.0};
  };
  return nu_sweep(base, kNus, [&](const MaterialParams& p) {
    const CosseratSolver solver(mesh, p);
    const auto tr = run_quasistatic(solver, prog, RunConfig{}, p, {}, {},
                                    [](const FieldState& s, const StepInfo&) { watch_trace(s); });
    return std::make_pair(series_of(tr, mesh), rate_norm_accumulators(solver, tr, p).back());
  });
}

// (max - min) / max of one accumulator over the sweep; 0 when it vanishes.
double variation(const SweepReport& r, double RateNorms::*field) {
  double lo = INFINITY, hi = 0.0;
  for (const auto& e : r.entries) {
    lo = std::min(lo, e.rates.*field);
    hi = std::max(hi, e.rates.*field);
  }
  return hi > 0.0 ? (hi - lo) / hi : 0.0;
}

// Bilinear response of linear kinematic hardening under monotone shear
// strain s (shear component along kShear): plastic part
// p = max(0, (2 mu s - sigma_y) / (2 mu + c)), stress 2 mu (s - p).
double bilinear_stress(double s, const MaterialParams& p) {
  const double mu = p.moduli.mu;
  const double pl = std::max(0.0, (2.0 * mu * s - p.sigma_y) / (2.0 * mu + p.c));
  return 2.0 * mu * (s - pl);
}

}  // namespace

int main() {
  const MaterialParams p = standard();

  // 1. backstress bound on the standard cyclic point, plus a large-amplitude variant
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto tr = run_material_point(cyclic(0.2), RunConfig{}, p, PointState{},
                                       [](const PointSample& s) { watch_trace(s.state); });
    const double dt_run = seconds_since(t0);
    const double m = max_backstress(tr);
    const auto big = run_material_point(cyclic(1.0), RunConfig{}, p, PointState{},
                                        [](const PointSample& s) { watch_trace(s.state); });
    const double mb = max_backstress(big);
    const double lim = p.c / p.d + 1e-9;
    report(1, "backstress bound", m <= lim && mb <= lim && dt_run < 1.0,
           fmt("max|b| = %.6g (amplitude 1.0: %.6g), limit %.10g, runtime %.3f s", m, mb, lim, dt_run));
  }

  // 3. Melan-Prager limit
  {
    MaterialParams mp = p;
    mp.d = 0.0;
    mp.c = 10.0;
    mp.nu = 1e-4;
    LoadingProgram prog;
    prog.times = LoadingProgram::uniform_grid(50.0, 1e-4);
    const double rate = 1e-3;
    prog.strain = [rate](double t) { return (rate * t) * kShear; };
    double worst = 0.0, plastic = 0.0;
    run_material_point(prog, RunConfig{}, mp, PointState{}, [&](const PointSample& s) {
      watch_trace(s.state);
      if (s.t == 0.0) return;
      const double tau = bilinear_stress(rate * s.t, mp);
      worst = std::max(worst, std::abs(dot(s.t_e, kShear) - tau) / tau);
      plastic = std::max(plastic, norm(s.state.eps_p));
    });
    report(3, "Melan-Prager limit", worst <= 1e-6 && plastic > 0.0,
           fmt("max relative stress error %.3g (limit 1e-6), final |eps_p| %.3g", worst, plastic));
  }

  // 4, 5, 10. the standard nu sweep
  {
    const auto t0 = std::chrono::steady_clock::now();
    const SweepReport rep = point_sweep(cyclic(0.2), p);
    const double dt_run = seconds_since(t0);
    double rmin = INFINITY, rmax = 0.0;
    for (size_t i = 1; i < rep.entries.size(); ++i) {
      const double r = rep.entries[i].overstress_weighted / rep.entries[i - 1].overstress_weighted;
      rmin = std::min(rmin, r);
      rmax = std::max(rmax, r);
    }
    report(4, "overstress decay", rmin >= 0.60 && rmax <= 0.85 && dt_run < 10.0,
           fmt("ratio per halving in [%.4f, %.4f], runtime %.2f s", rmin, rmax, dt_run));

    const SweepReport tor = torsion_sweep(p);
    const double v0 = variation(rep, &RateNorms::c_inv_te);
    const double v1 = variation(tor, &RateNorms::c_inv_te);
    const double v2 = variation(tor, &RateNorms::couple);
    const double v3 = variation(tor, &RateNorms::curvature);
    const SweepEntry& tl = tor.entries.back();
    const bool nonzero = tl.rates.couple > 0.0 && tl.rates.curvature > 0.0 && tl.overstress_sup > 0.0;
    report(5, "nu-uniform rate bounds", std::max({v0, v1, v2, v3}) < 0.10 && nonzero,
           fmt("variation point %.3g; torsion stress %.3g couple %.3g curvature %.3g", v0, v1, v2, v3) +
               fmt(" (torsion overstress sup %.3g)", tl.overstress_sup));

    const SweepEntry& last = rep.entries.back();
    const double env = 3.0 * rep.envelope_c * std::sqrt(last.nu);
    report(10, "admissibility at small nu", rep.admissibility_ok && last.max_yield_gap <= env,
           fmt("max yield gap %.4g at nu = %.4g, 3 C sqrt(nu) = %.4g", last.max_yield_gap, last.nu, env));
  }

  // 6. energy inequality on the uniform plastic element
  {
    const auto t0 = std::chrono::steady_clock::now();
    const GridMesh m = GridMesh::box(1, 1, 1);
    const CosseratSolver solver(m, p);
    LoadingProgram prog;
    prog.times = LoadingProgram::uniform_grid(2.0, 1e-3);
    const Amplitude amp = triangle(0.05, 1.0);
    prog.data.g_D = [amp](const Vec3& x, double t) { return (amp.value(t) * kShear).to_mat() * x; };
    const auto tr = run_quasistatic(solver, prog, RunConfig{}, p, {}, {},
                                    [](const FieldState& s, const StepInfo&) { watch_trace(s); });
    const auto rep = energy_inequality(solver, tr, prog.data, p, {});
    const double dt_run = seconds_since(t0);
    const double ep = norm(tr.snapshots.back().qp[0].eps_p);
    report(6, "energy inequality",
           rep.passed(1e-6) && rep.labels.size() == 2 && rep.rejected_pairs == 0 && ep > 0.0 && dt_run < 5.0,
           fmt("worst residual %.3g, scale %.4g, final |eps_p| %.3g, runtime %.2f s", rep.worst(),
               rep.energy_scale, ep, dt_run));
  }

  // 7. coercivity probe on 8^3
  {
    const GridMesh m = GridMesh::box(8, 8, 8);
    MaterialParams strong = p;
    strong.mu_c = 0.5 * p.moduli.mu;
    MaterialParams weak = p;
    weak.mu_c = 1e-6 * p.moduli.mu;
    const auto a = coercivity_probe(m, strong, 16, 11);
    const auto b = coercivity_probe(m, strong, 32, 11);
    const auto w = coercivity_probe(m, weak, 16, 11);
    const double drift = std::abs(b.min_random_ratio - a.min_random_ratio) / a.min_random_ratio;
    const double rel = w.adversarial_ratio / a.min_ratio;
    report(7, "coercivity probe", a.min_ratio > 0.0 && b.min_ratio > 0.0 && drift <= 0.2 && rel < 1e-4,
           fmt("min ratio %.4g (16 samples) %.4g (32), random-min drift %.3g, weak/strong %.3g",
               a.min_ratio, b.min_ratio, drift, rel));
  }

  // 8. manufactured solution
  {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ms = oracle::standard_manufactured(p.moduli.mu, p.moduli.lambda, p.mu_c, p.l_c);
    const BoundaryData bd = ms.data();
    std::vector<double> eu, ea;
    for (int n : {4, 8, 16}) {
      const GridMesh m = GridMesh::box(n, n, n);
      const LinearSolution sol = assemble_and_solve(m, p, {}, bd, 0.0);
      eu.push_back(oracle::l2_error(m, sol.u, [&](const Vec3& x) { return ms.u.value(x); }));
      ea.push_back(oracle::l2_error(m, sol.a, [&](const Vec3& x) { return ms.a.value(x); }));
    }
    const double dt_run = seconds_since(t0);
    const double r[4] = {eu[0] / eu[1], eu[1] / eu[2], ea[0] / ea[1], ea[1] / ea[2]};
    bool ok = dt_run < 120.0;
    for (double x : r) ok = ok && x >= 3.4 && x <= 4.6;
    report(8, "manufactured convergence", ok,
           fmt("u ratios %.3f %.3f, axl A ratios %.3f %.3f", r[0], r[1], r[2], r[3]) +
               fmt(", runtime %.1f s", dt_run));
  }

  // 9. G_nu perturbation inequality on random pairs
  {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    const auto random_dev = [&](double scale) {
      DevSym3 d{g(rng), g(rng), g(rng), g(rng), g(rng)};
      return (scale / norm(d)) * d;
    };
    const double cs[3] = {0.3, 1.0, 2.0};
    int violations = 0;
    const int pairs = 100000;
    for (int i = 0; i < pairs; ++i) {
      MaterialParams q = p;
      q.c = cs[i % 3];
      q.nu = 0.1;
      const double k = q.c * q.c * (q.c + 0.5) / q.nu;
      const Sym3 t1 = u(rng) * Sym3{g(rng), g(rng), g(rng), g(rng), g(rng), g(rng)};
      const Sym3 t2 = u(rng) * Sym3{g(rng), g(rng), g(rng), g(rng), g(rng), g(rng)};
      const DevSym3 b1 = random_dev(u(rng)), b2 = random_dev(u(rng));
      const auto [x1, y1] = g_nu(t1, b1, q);
      const auto [x2, y2] = g_nu(t2, b2, q);
      const double lhs = dot(x1 - x2, t1 - t2) + dot(y1 - y2, b1 - b2);
      const double dt = norm(t1 - t2), db = norm(b1 - b2);
      const double rhs = -k * (dt * dt + db * db);
      if (lhs < rhs - 1e-10 * std::abs(rhs)) ++violations;
    }
    const double dt_run = seconds_since(t0);
    report(9, "G_nu perturbation bound", violations == 0 && dt_run < 5.0,
           fmt("%.0f pairs, %.0f violations, runtime %.2f s", pairs, violations, dt_run));
  }

  // 2. traces over every run above
  report(2, "trace conservation", trace_max <= 1e-14 && trace_checks > 0,
         fmt("max |tr| %.3g over %.0f states", trace_max, static_cast<double>(trace_checks)));

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& l : lines) {
    if (!l.pass) ++failures;
    std::printf("criterion %2d %-26s %s  %s\n", l.id, l.name.c_str(), l.pass ? "PASS" : "FAIL",
                l.detail.c_str());
  }
  return failures == 0 ? 0 : 1;
}
