#pragma once

// Energies, monitors, the coercivity probe and the energy-inequality residual.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cosaf/evolution.hpp"
#include "cosaf/solver.hpp"

namespace cosaf {

struct EnergyParts {
  double elastic = 0.0;     ///< mu|eps - eps_p|^2 + (lambda/2) tr^2 = (1/2) C^-1 T_E : T_E
  double couple = 0.0;      ///< mu_c |skew grad u - A|^2
  double curvature = 0.0;   ///< 2 l_c |grad a|^2
  double backstress = 0.0;  ///< |b|^2 / 2c
  double total() const { return elastic + couple + curvature + backstress; }
};

/// Stored energy of a field state by Gauss quadrature.
EnergyParts free_energy(const GridMesh& mesh, const MaterialParams& p, const FieldState& s);

/// Stored energy density of a material point (couple and curvature terms vanish).
EnergyParts free_energy(const MaterialParams& p, const Sym3& t_e, const DevSym3& b);

/// int (1/2 nu) {|dev T_E - b| - sigma_y}_+^2 over the mesh.
double overstress_functional(const GridMesh& mesh, const MaterialParams& p, const FieldState& s);

struct FieldMonitors {
  double max_yield_gap = 0.0;
  double max_backstress_ratio = 0.0;  ///< max |b| d / c
  double max_trace = 0.0;             ///< max reconstructed |tr eps_p|, |tr b| (relative)
  bool projection_identity = true;    ///< Pi(b) == b at every QP
};

FieldMonitors field_monitors(const MaterialParams& p, const FieldState& s);

struct EnergyReport {
  double time = 0.0;
  EnergyParts energy;
  double overstress = 0.0;  ///< overstress functional at this time
  RateNorms rate_norms;     ///< accumulated up to this time
  std::optional<double> coercivity_ratio;
  std::optional<double> energy_inequality_residual;
};

/// Running rate accumulators, one entry per snapshot (first is zero).
/// Rates are backward differences of consecutive snapshots.
/// Throws MissingRates when the trajectory was recorded without rates.
std::vector<RateNorms> rate_norm_accumulators(const CosseratSolver& solver,
                                              const FieldTrajectory& tr, const MaterialParams& p);

/// Energy ratio E / (|u|_H1^2 + |A|_H1^2 + |b|^2) for one discrete state with
/// homogeneous boundary values. |A|_H1^2 = 2(|a|^2 + |grad a|^2).
double coercivity_ratio(const GridMesh& mesh, const MaterialParams& p, const std::vector<Vec3>& u,
                        const std::vector<Vec3>& a, const std::vector<DevSym3>& eps_p,
                        const std::vector<DevSym3>& b);

struct CoercivityResult {
  double min_ratio = 0.0;          ///< over random samples and the adversarial one
  double min_random_ratio = 0.0;
  double adversarial_ratio = 0.0;
  int samples = 0;
};

/// Samples random fields vanishing on the boundary and one deterministic
/// adversarial state: u is a discretely isochoric field, eps_p = eps(u),
/// A = 0, b = 0, so only the couple term of the energy survives.
CoercivityResult coercivity_probe(const GridMesh& mesh, const MaterialParams& p, int n_samples,
                                  std::uint64_t seed);

/// The adversarial displacement of the probe (zero on the boundary, element
/// mean divergence zero up to solver tolerance).
std::vector<Vec3> isochoric_bump(const GridMesh& mesh);

struct TestFunctionPair {
  std::string label;
  std::vector<Sym3> t_hat;     ///< per QP
  std::vector<DevSym3> b_hat;  ///< per QP
  std::vector<Vec3> div;       ///< weak nodal divergence of t_hat
};

/// Admissible test pairs at time t: the zero pair and theta T*_E with b = 0,
/// where T*_E is the elastic stress of the linear solve with the initial
/// plastic strain and theta = min(1, sigma_y / (max |dev T*_E| + 1e-12)).
/// Pairs whose traction on a Neumann face is nonzero are dropped.
/// Throws InadmissibleScenario when the prescribed traction is nonzero.
std::vector<TestFunctionPair> build_test_functions(const CosseratSolver& solver,
                                                   const BoundaryData& bd, double t,
                                                   const std::vector<DevSym3>& eps_p0);

/// Residual LHS - RHS of the energy inequality at every snapshot for a
/// test pair given per snapshot (pairs[n] belongs to snapshot n). Time
/// integrals use endpoint averages times increments.
std::vector<double> energy_inequality_series(const CosseratSolver& solver,
                                             const FieldTrajectory& tr, const BoundaryData& bd,
                                             const MaterialParams& p,
                                             const std::vector<TestFunctionPair>& pairs);

/// Residual at snapshot n only.
double energy_inequality_residual(const CosseratSolver& solver, const FieldTrajectory& tr,
                                  const BoundaryData& bd, const MaterialParams& p,
                                  const std::vector<TestFunctionPair>& pairs, int n);

struct InequalityReport {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> residual;  ///< [pair][snapshot]
  double energy_scale = 0.0;                  ///< max(E(0), max_t E(t))
  int rejected_pairs = 0;
  double worst() const;                       ///< max residual over pairs and snapshots
  bool passed(double rel_tol) const { return worst() <= rel_tol * energy_scale; }
};

/// Builds the test family at every snapshot and evaluates the residuals.
InequalityReport energy_inequality(const CosseratSolver& solver, const FieldTrajectory& tr,
                                   const BoundaryData& bd, const MaterialParams& p,
                                   const std::vector<DevSym3>& eps_p0);

}  // namespace cosaf
