#pragma once

// Quasistatic time stepping: material-point driver, staggered global/local
// field driver, loading programs and nu-sweeps.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cosaf/constitutive.hpp"
#include "cosaf/solver.hpp"

namespace cosaf {

/// Scalar time profile. Triangle and sine start at 0 and have the given
/// period; the triangle peaks at +amplitude at period/4.
struct Amplitude {
  enum class Kind { constant, ramp, triangle, sine, table };
  Kind kind = Kind::constant;
  double amplitude = 1.0;
  double period = 1.0;
  double rate = 1.0;  ///< slope for ramp
  std::vector<std::pair<double, double>> table;  ///< (t, value), increasing t

  double value(double t) const;
  /// Parses "constant", "ramp", ... ; throws ParseError.
  static Kind parse_kind(const std::string& s);
  static std::string kind_name(Kind k);
};

/// Time grid plus data. `strain` drives material-point runs, `data` drives
/// field runs.
struct LoadingProgram {
  std::vector<double> times;
  BoundaryData data;
  std::function<Sym3(double)> strain;

  static std::vector<double> uniform_grid(double t_end, double dt);
};

struct RunConfig {
  FlowMode flow = FlowMode::yosida;
  double stagger_tol = 1e-8;  ///< relative QP stress change between sweeps
  int stagger_max = 50;
  int max_halvings = 12;      ///< dyadic time-step splits per program step
  StepOptions local{};
  bool store_rates = true;    ///< keep every snapshot (needed for rates)
  AdmissibilityPolicy policy = AdmissibilityPolicy::warn;
};

struct PointSample {
  double t = 0.0;
  Sym3 strain;
  PointState state;
  Sym3 t_e;
  FlowResult flow;
};

struct PointTrajectory {
  std::vector<PointSample> samples;
};

/// Strain-driven single material point. The first sample is the initial
/// state at times[0].
PointTrajectory run_material_point(const LoadingProgram& program, const RunConfig& cfg,
                                   const MaterialParams& params, const PointState& init,
                                   const std::function<void(const PointSample&)>& on_step = {});

struct StepInfo {
  int stagger_iterations = 0;
  int halvings = 0;
  int local_iterations = 0;
  int local_substeps = 0;
  double stagger_residual = 0.0;
};

struct FieldTrajectory {
  std::vector<FieldState> snapshots;
  std::vector<StepInfo> info;  ///< info[n] describes the step into snapshots[n]
  bool has_rates = true;
  int initial_violations = 0;
};

/// Staggered global/local integration of the field problem. The local law
/// uses `params` (its elastic part must match the solver's). Each staggered
/// sweep solves the linear problem at frozen plastic strain, then updates
/// every QP from the converged state of the previous step. A non-monotone or
/// stalled sweep sequence halves the step.
///
/// Throws StaggeredNonConvergence after max_halvings, and propagates
/// NonConvergence from the local solver.
FieldTrajectory run_quasistatic(const CosseratSolver& solver, const LoadingProgram& program,
                                const RunConfig& cfg, const MaterialParams& params,
                                const std::vector<DevSym3>& eps_p0, const std::vector<DevSym3>& b0,
                                const std::function<void(const FieldState&, const StepInfo&)>& on_step = {});

/// QP stresses and backstresses over time with quadrature weights; the
/// common currency of the sweep.
struct RunSeries {
  std::vector<double> t;
  std::vector<std::vector<Sym3>> t_e;
  std::vector<std::vector<DevSym3>> b;
  std::vector<double> weight;  ///< per QP
};

RunSeries series_of(const PointTrajectory& tr);
RunSeries series_of(const FieldTrajectory& tr, const GridMesh& mesh);

struct RateNorms {
  double c_inv_te = 0.0;   ///< int int C^-1 T_E,t : T_E,t
  double couple = 0.0;     ///< 2 mu_c int int |skew grad u_t - A_t|^2
  double curvature = 0.0;  ///< 4 l_c int int |grad a_t|^2
};

struct SweepEntry {
  double nu = 0.0;
  double overstress_weighted = 0.0;  ///< (int_0^T int (1/2nu){.}_+^2)^(1/2)
  double overstress_raw = 0.0;       ///< (int_0^T int {.}_+^2)^(1/2)
  double overstress_sup = 0.0;       ///< max over time and QPs of {.}_+
  double max_yield_gap = 0.0;
  double max_backstress_ratio = 0.0;  ///< max |b| d / c
  RateNorms rates;
  double rate_bound_sup = 0.0;  ///< max over time of overstress functional + accumulators
  double diff_to_prev = 0.0;  ///< trajectory distance to the previous nu (0 for the first)
};

struct SweepReport {
  std::vector<SweepEntry> entries;
  bool differences_monotone = true;
  double envelope_c = 0.0;       ///< least-squares C in max_gap ~ C sqrt(nu)
  bool admissibility_ok = true;  ///< max_gap(nu_min) <= 3 C sqrt(nu_min)
  bool bounded = true;           ///< rate_bound_sup <= 1.1 * value at the largest nu
};

/// Runs one trajectory per nu (strictly decreasing) and compares them.
/// `run` returns the series and rate accumulators for a parameter set.
SweepReport nu_sweep(const MaterialParams& base, const std::vector<double>& nus,
                     const std::function<std::pair<RunSeries, RateNorms>(const MaterialParams&)>& run);

/// Material-point sweep convenience.
SweepReport nu_sweep_point(const LoadingProgram& program, const RunConfig& cfg,
                           const MaterialParams& base, const std::vector<double>& nus,
                           const PointState& init);

/// Summary statistics of one series (used by nu_sweep, exposed for tests).
SweepEntry summarize(const RunSeries& s, const MaterialParams& p);

/// Rate accumulators of a material-point run (only the C^-1 term is nonzero).
RateNorms point_rate_norms(const PointTrajectory& tr, const MaterialParams& p);

}  // namespace cosaf
