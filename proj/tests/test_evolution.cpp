#include <algorithm>
#include <cmath>

#include "cosaf/errors.hpp"
#include "cosaf/evolution.hpp"
#include "doctest.h"

using namespace cosaf;

namespace {

MaterialParams params() {
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

// unit deviatoric shear direction
const Sym3 kShear{0.0, 0.0, 0.0, 1.0 / std::sqrt(2.0), 0.0, 0.0};

LoadingProgram shear_program(const Amplitude& amp, double t_end, double dt) {
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(t_end, dt);
  prog.strain = [amp](double t) { return amp.value(t) * kShear; };
  return prog;
}

Amplitude triangle(double a, double period) {
  Amplitude amp;
  amp.kind = Amplitude::Kind::triangle;
  amp.amplitude = a;
  amp.period = period;
  return amp;
}

double shear_part(const DevSym3& x) { return dot(x, kShear); }
double shear_part(const Sym3& x) { return dot(x, kShear); }

}  // namespace

TEST_CASE("amplitude profiles") {
  Amplitude tri = triangle(2.0, 4.0);
  CHECK(tri.value(0.0) == doctest::Approx(0.0));
  CHECK(tri.value(1.0) == doctest::Approx(2.0));
  CHECK(tri.value(2.0) == doctest::Approx(0.0));
  CHECK(tri.value(3.0) == doctest::Approx(-2.0));
  CHECK(tri.value(4.5) == doctest::Approx(1.0));
  Amplitude sine;
  sine.kind = Amplitude::Kind::sine;
  sine.amplitude = 3.0;
  sine.period = 2.0;
  CHECK(sine.value(0.5) == doctest::Approx(3.0));
  Amplitude ramp;
  ramp.kind = Amplitude::Kind::ramp;
  ramp.rate = 0.5;
  CHECK(ramp.value(3.0) == doctest::Approx(1.5));
  Amplitude tab;
  tab.kind = Amplitude::Kind::table;
  tab.table = {{0.0, 0.0}, {1.0, 2.0}, {3.0, -2.0}};
  CHECK(tab.value(-1.0) == 0.0);
  CHECK(tab.value(0.5) == doctest::Approx(1.0));
  CHECK(tab.value(2.0) == doctest::Approx(0.0));
  CHECK(tab.value(9.0) == -2.0);
  CHECK(Amplitude::parse_kind("sine") == Amplitude::Kind::sine);
  CHECK(Amplitude::kind_name(Amplitude::Kind::table) == "table");
  CHECK_THROWS_AS(Amplitude::parse_kind("square"), ParseError);
}

TEST_CASE("uniform time grid") {
  const auto t = LoadingProgram::uniform_grid(1.0, 0.25);
  REQUIRE(t.size() == 5);
  CHECK(t.back() == 1.0);
  CHECK(t[2] == 0.5);
  CHECK_THROWS(LoadingProgram::uniform_grid(1.0, 0.0));
}

TEST_CASE("material point below yield stays elastic") {
  const MaterialParams p = params();
  const auto prog = shear_program(triangle(0.005, 1.0), 2.0, 0.01);
  const auto tr = run_material_point(prog, RunConfig{}, p, PointState{});
  REQUIRE(tr.samples.size() == 201);
  for (const auto& s : tr.samples) {
    CHECK(norm(s.state.eps_p) == 0.0);
    CHECK(norm(s.t_e - elastic_stress(s.strain, p.moduli)) <= 1e-15);
  }
}

TEST_CASE("cyclic d = 0 response follows the linear-hardening play operator") {
  MaterialParams p = params();
  p.d = 0.0;
  p.c = 10.0;
  p.nu = 1e-6;
  const double dt = 1e-3;
  const auto prog = shear_program(triangle(0.05, 1.0), 3.0, dt);
  const auto tr = run_material_point(prog, RunConfig{}, p, PointState{});
  // rate-independent oracle: |2 mu s - (2 mu + c) e| <= sigma_y, e moves only on the boundary
  const double k = 2.0 * p.moduli.mu + p.c;
  double e = 0.0, worst = 0.0;
  for (const auto& smp : tr.samples) {
    const double s = shear_part(smp.strain);
    e = std::clamp(e, (2.0 * p.moduli.mu * s - p.sigma_y) / k, (2.0 * p.moduli.mu * s + p.sigma_y) / k);
    const double tau = 2.0 * p.moduli.mu * (s - e);
    worst = std::max(worst, std::abs(shear_part(smp.t_e) - tau));
    CHECK(shear_part(smp.state.b) == doctest::Approx(p.c * shear_part(smp.state.eps_p)).epsilon(1e-12));
  }
  // the Yosida lag is of order nu * (strain rate) * (2 mu)
  CHECK(worst <= 1e-3 * p.sigma_y);
}

TEST_CASE("hysteresis loop stabilizes under cyclic loading") {
  const MaterialParams p = params();
  const double dt = 1e-3;
  const auto prog = shear_program(triangle(0.06, 1.0), 10.0, dt);
  const auto tr = run_material_point(prog, RunConfig{}, p, PointState{});
  std::vector<double> area(10, 0.0);
  double bmax = 0.0;
  for (size_t n = 1; n < tr.samples.size(); ++n) {
    const auto& a = tr.samples[n - 1];
    const auto& b = tr.samples[n];
    const int cycle = std::min(9, static_cast<int>(a.t + 1e-12));
    area[cycle] += dot(0.5 * (a.t_e + b.t_e), b.strain - a.strain);
    bmax = std::max(bmax, norm(b.state.b));
  }
  CHECK(bmax <= p.backstress_limit() + 1e-12);
  for (double x : area) CHECK(x > 0.0);
  CHECK(std::abs(area[9] - area[8]) <= 1e-3 * area[9]);
}

TEST_CASE("only nu/dt enters: scaling time and nu together changes nothing") {
  MaterialParams p = params();
  const double kappa = 8.0;
  const auto prog1 = shear_program(triangle(0.03, 1.0), 2.0, 1.0 / 256.0);
  auto tr1 = run_material_point(prog1, RunConfig{}, p, PointState{});
  MaterialParams q = p;
  q.nu = kappa * p.nu;
  const auto prog2 = shear_program(triangle(0.03, kappa), 2.0 * kappa, kappa / 256.0);
  auto tr2 = run_material_point(prog2, RunConfig{}, q, PointState{});
  REQUIRE(tr1.samples.size() == tr2.samples.size());
  double worst = 0.0;
  for (size_t n = 0; n < tr1.samples.size(); ++n) {
    worst = std::max(worst, norm(tr1.samples[n].t_e - tr2.samples[n].t_e));
    worst = std::max(worst, norm(tr1.samples[n].state.b - tr2.samples[n].state.b));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("material point callback sees every step") {
  const auto prog = shear_program(triangle(0.03, 1.0), 1.0, 0.01);
  int calls = 0;
  run_material_point(prog, RunConfig{}, params(), PointState{}, [&](const PointSample&) { ++calls; });
  CHECK(calls == 101);
}

namespace {

BoundaryData affine_data(const Amplitude& amp) {
  BoundaryData bd;
  bd.g_D = [amp](const Vec3& x, double t) { return (amp.value(t) * kShear).to_mat() * x; };
  return bd;
}

}  // namespace

TEST_CASE("homogeneous field run matches the material point") {
  const MaterialParams p = params();
  const Amplitude amp = triangle(0.04, 1.0);
  const GridMesh m = GridMesh::box(2, 2, 2);
  const CosseratSolver solver(m, p);
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(1.5, 0.01);
  prog.data = affine_data(amp);
  const auto field = run_quasistatic(solver, prog, RunConfig{}, p, {}, {});
  const auto point = run_material_point(shear_program(amp, 1.5, 0.01), RunConfig{}, p, PointState{});
  REQUIRE(field.snapshots.size() == point.samples.size());
  double worst = 0.0;
  for (size_t n = 0; n < point.samples.size(); ++n)
    for (size_t q = 0; q < field.snapshots[n].qp.size(); ++q) {
      worst = std::max(worst, norm(field.snapshots[n].t_e[q] - point.samples[n].t_e));
      worst = std::max(worst, norm(field.snapshots[n].qp[q].b - point.samples[n].state.b));
    }
  CHECK(worst <= 1e-8);
  CHECK(norm(point.samples.back().state.eps_p) > 1e-3);
}

namespace {

// Bottom fixed, top twisted about the vertical axis, sides traction free.
struct Torsion {
  GridMesh mesh = GridMesh::box(2, 2, 2, {1.0, 1.0, 1.0},
                                {FaceTag::neumann, FaceTag::neumann, FaceTag::neumann,
                                 FaceTag::neumann, FaceTag::dirichlet, FaceTag::dirichlet});
  LoadingProgram program(double rate, double t_end, double dt) const {
    LoadingProgram prog;
    prog.times = LoadingProgram::uniform_grid(t_end, dt);
    prog.data.g_D = [rate](const Vec3& x, double t) {
      const double th = rate * t * x.z;
      return Vec3{-th * (x.y - 0.5), th * (x.x - 0.5), 0.0};
    };
    return prog;
  }
};

}  // namespace

TEST_CASE("staggered iteration in torsion") {
  const MaterialParams p = params();
  const Torsion tor;
  const CosseratSolver solver(tor.mesh, p);
  const auto prog = tor.program(0.2, 0.5, 0.01);
  const auto tr = run_quasistatic(solver, prog, RunConfig{}, p, {}, {});
  int max_iter = 0;
  for (const auto& i : tr.info) {
    max_iter = std::max(max_iter, i.stagger_iterations);
    CHECK(i.stagger_residual <= 1e-8);
  }
  CHECK(max_iter >= 3);  // plastic flow really happened
  double ep = 0.0;
  for (const auto& q : tr.snapshots.back().qp) ep = std::max(ep, norm(q.eps_p));
  CHECK(ep > 1e-3);

  SUBCASE("step halving recovers from a tight sweep budget") {
    RunConfig tight;
    tight.stagger_max = 10;
    const auto tr2 = run_quasistatic(solver, prog, tight, p, {}, {});
    int halvings = 0;
    for (const auto& i : tr2.info) halvings = std::max(halvings, i.halvings);
    CHECK(halvings > 0);
    double diff = 0.0, scale = 0.0;
    for (size_t q = 0; q < tr.snapshots.back().t_e.size(); ++q) {
      diff = std::max(diff, norm(tr.snapshots.back().t_e[q] - tr2.snapshots.back().t_e[q]));
      scale = std::max(scale, norm(tr.snapshots.back().t_e[q]));
    }
    CHECK(diff <= 0.05 * scale);
  }
  SUBCASE("exhausted halvings throw") {
    RunConfig cfg;
    cfg.stagger_max = 1;
    cfg.max_halvings = 2;
    CHECK_THROWS_AS(run_quasistatic(solver, prog, cfg, p, {}, {}), StaggeredNonConvergence);
  }
}

TEST_CASE("field run bookkeeping") {
  const MaterialParams p = params();
  const GridMesh m = GridMesh::box(1, 1, 1);
  const CosseratSolver solver(m, p);
  LoadingProgram prog;
  prog.times = LoadingProgram::uniform_grid(0.5, 0.05);
  prog.data = affine_data(triangle(0.04, 1.0));
  int calls = 0;
  RunConfig cfg;
  cfg.store_rates = false;
  const auto tr = run_quasistatic(solver, prog, cfg, p, {}, {},
                                  [&](const FieldState&, const StepInfo&) { ++calls; });
  CHECK(calls == 11);
  CHECK(tr.snapshots.size() == 2);
  CHECK_FALSE(tr.has_rates);

  MaterialParams other = p;
  other.moduli.mu = 40.0;
  CHECK_THROWS_AS(run_quasistatic(solver, prog, RunConfig{}, other, {}, {}), Error);

  std::vector<DevSym3> ep0(m.num_qp(), DevSym3{0.0, 0.0, 0.5, 0.0, 0.0});
  RunConfig strict;
  strict.policy = AdmissibilityPolicy::fail;
  CHECK_THROWS_AS(run_quasistatic(solver, prog, strict, p, ep0, {}), InitialAdmissibilityViolated);
  const auto warned = run_quasistatic(solver, prog, RunConfig{}, p, ep0, {});
  CHECK(warned.initial_violations == m.num_qp());
}

TEST_CASE("summary statistics of a series") {
  MaterialParams p = params();
  p.nu = 0.1;
  RunSeries s;
  s.t = {0.0, 1.0};
  s.weight = {0.5, 0.5};
  // overstress 0.2 at the first QP of the second sample
  const Sym3 over{0.0, 0.0, 0.0, 1.2 / std::sqrt(2.0), 0.0, 0.0};
  s.t_e = {{Sym3{}, Sym3{}}, {over, Sym3{}}};
  s.b = {{DevSym3{}, DevSym3{}}, {DevSym3{}, DevSym3{}}};
  const SweepEntry e = summarize(s, p);
  CHECK(e.overstress_sup == doctest::Approx(0.2));
  CHECK(e.max_yield_gap == doctest::Approx(0.2));
  // int_0^1 of a linear ramp 0 -> 0.5 * 0.04 / (2 nu)
  CHECK(e.overstress_weighted == doctest::Approx(std::sqrt(0.5 * 0.5 * 0.04 / 0.2)));
  CHECK(e.overstress_raw == doctest::Approx(std::sqrt(0.5 * 0.5 * 0.04)));
  CHECK(e.rate_bound_sup == doctest::Approx(0.5 * 0.04 / 0.2));
}

TEST_CASE("elastic ramp rate accumulator") {
  const MaterialParams p = params();
  Amplitude ramp;
  ramp.kind = Amplitude::Kind::ramp;
  ramp.rate = 0.004;
  const auto tr = run_material_point(shear_program(ramp, 2.0, 0.1), RunConfig{}, p, PointState{});
  const Sym3 rate = elastic_stress(ramp.rate * kShear, p.moduli);
  CHECK(point_rate_norms(tr, p).c_inv_te ==
        doctest::Approx(2.0 * dot(compliance(rate, p.moduli), rate)).epsilon(1e-12));
}

TEST_CASE("nu sweep on the cyclic material point") {
  const MaterialParams p = params();
  const auto prog = shear_program(triangle(0.05, 1.0), 3.0, 1e-3);
  const std::vector<double> nus{0.1, 0.05, 0.025, 0.0125};
  const SweepReport rep = nu_sweep_point(prog, RunConfig{}, p, nus, PointState{});
  REQUIRE(rep.entries.size() == 4);
  CHECK(rep.differences_monotone);
  CHECK(rep.bounded);
  CHECK(rep.admissibility_ok);
  for (size_t i = 1; i < 4; ++i) {
    const double r = rep.entries[i].overstress_weighted / rep.entries[i - 1].overstress_weighted;
    CHECK(r >= 0.6);
    CHECK(r <= 0.85);
    CHECK(rep.entries[i].max_backstress_ratio <= 1.0 + 1e-12);
  }
  CHECK(rep.entries[0].diff_to_prev == 0.0);
  CHECK_THROWS_AS(nu_sweep_point(prog, RunConfig{}, p, {0.1, 0.2}, PointState{}), Error);
}
