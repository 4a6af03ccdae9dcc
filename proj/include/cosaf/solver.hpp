#pragma once

// Linear Cosserat subproblem: balance of forces and the microrotation
// equation for (u, a = axl A) at frozen plastic strain.
//
// Weak form, obtained by varying the stored energy
//   mu|eps - eps_p|^2 + (lambda/2) tr^2 + mu_c|skew grad u - A|^2 + 2 l_c|grad a|^2:
//
//   int C(eps(u) - eps_p) : eps(v) + 2 mu_c (skew grad u - A) : (skew grad v - W)
//     + 4 l_c grad a : grad w  =  int f.v + int_N g_N.v + 4 int m.w
//
// Since (skew grad u - A) : W = 2 (axl skew grad u - a).w, the w-equation is
// -l_c lap a = mu_c (axl skew grad u - a) + m. The body couple m is zero for
// physical runs; it exists to drive manufactured solutions.
//
// Discretization: Q1 hexahedra, 2x2x2 Gauss, mean-dilatation (B-bar) volumetric
// strain. eps(u) below always means the B-bar strain
// dev sym grad u + (1/3)(element mean div u) 1.

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cosaf/constitutive.hpp"
#include "cosaf/mesh.hpp"
#include "cosaf/tensor.hpp"

namespace cosaf {

using PointField = std::function<Vec3(const Vec3& x, double t)>;
using TractionField = std::function<Vec3(const Vec3& x, const Vec3& normal, double t)>;

/// Time-dependent data. Empty functions mean zero.
struct BoundaryData {
  PointField g_D;        ///< displacement on Dirichlet faces
  TractionField g_N;     ///< traction on Neumann faces
  PointField a_D;        ///< axial vector of A on the whole boundary
  PointField f;          ///< body force, sampled at nodes and interpolated
  PointField couple;     ///< body couple m, sampled at nodes and interpolated

  bool traction_free() const { return !g_N; }
};

/// Per quadrature point kinematic quantities of a discrete (u, a) pair.
struct QpKinematics {
  Sym3 strain;   ///< B-bar strain
  Mat3 grad_u;
  Skew3 rel;     ///< skew grad u - A
  Mat3 grad_a;
  Vec3 u, a;
};

/// Quadrature point index of Gauss point q in element e.
inline int qp_index(int e, int q) { return 8 * e + q; }

std::vector<QpKinematics> kinematics(const GridMesh& mesh, const std::vector<Vec3>& u,
                                     const std::vector<Vec3>& a);

/// Result of one linear solve.
struct LinearSolution {
  std::vector<Vec3> u, a;
  std::vector<Sym3> strain;   ///< B-bar strain per QP
  std::vector<Sym3> t_e;      ///< elastic stress C(eps - eps_p)
  std::vector<Skew3> t_skew;  ///< T - T_E = 2 mu_c (skew grad u - A)
  /// Nodal reactions at prescribed dofs (zero elsewhere): K x - F.
  std::vector<Vec3> reaction_u, reaction_a;
  double residual = 0.0;  ///< relative residual of the reduced system
};

/// Owns the assembled, factorized matrix for one mesh and parameter set.
/// The matrix does not depend on the plastic state, so it is factored once.
class CosseratSolver {
 public:
  CosseratSolver(const GridMesh& mesh, const MaterialParams& params);
  ~CosseratSolver();
  CosseratSolver(CosseratSolver&&) noexcept;
  CosseratSolver& operator=(CosseratSolver&&) noexcept;

  const GridMesh& mesh() const { return mesh_; }
  const MaterialParams& params() const { return params_; }
  const RefElement& ref() const { return ref_; }

  /// eps_p has one entry per quadrature point (empty means zero).
  LinearSolution solve(const std::vector<DevSym3>& eps_p, const BoundaryData& bd, double t) const;

  /// Consistent nodal load of the external data (f, g_N, m) at time t,
  /// per node: (force, couple). Used for work bookkeeping.
  std::pair<std::vector<Vec3>, std::vector<Vec3>> external_load(const BoundaryData& bd,
                                                                double t) const;

  /// Largest relative asymmetry of the assembled matrix.
  double matrix_asymmetry() const;
  int num_free_dofs() const;

 private:
  struct Impl;
  GridMesh mesh_;
  MaterialParams params_;
  RefElement ref_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper (assembles and factors on every call).
LinearSolution assemble_and_solve(const GridMesh& mesh, const MaterialParams& params,
                                  const std::vector<DevSym3>& eps_p, const BoundaryData& bd,
                                  double t);

/// Full discrete state of a field run at one time.
struct FieldState {
  double time = 0.0;
  std::vector<Vec3> u, a;
  std::vector<PointState> qp;
  std::vector<Sym3> t_e;
  std::vector<Skew3> t_skew;
  std::vector<Vec3> reaction_u, reaction_a;
};

enum class AdmissibilityPolicy { warn, fail };

struct InitialReport {
  FieldState state;
  int violations = 0;         ///< QPs where the initial yield condition fails
  int backstress_violations = 0;
  double max_yield_gap = 0.0;
};

/// Initial linear problem at t = 0 with the given plastic state (one entry
/// per QP, or empty for zero). Checks |b0| <= c/d and
/// |dev T_E0 - b0| <= sigma_y at every QP; with policy fail a violation
/// throws InitialAdmissibilityViolated.
InitialReport solve_initial(const CosseratSolver& solver, const std::vector<DevSym3>& eps_p0,
                            const std::vector<DevSym3>& b0, const BoundaryData& bd,
                            AdmissibilityPolicy policy = AdmissibilityPolicy::warn);

/// Builds a FieldState from a linear solution and QP history.
FieldState make_field_state(double t, const LinearSolution& sol, std::vector<PointState> qp);

/// Weak nodal divergence of a QP stress field: -int T : grad(phi_i) per node.
/// At nodes away from the boundary this is the discrete div T tested with phi_i.
std::vector<Vec3> weak_divergence(const GridMesh& mesh, const std::vector<Mat3>& t);

}  // namespace cosaf
