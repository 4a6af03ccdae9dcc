#pragma once

// Local (per material point) inelastic machinery for Armstrong-Frederick
// kinematic hardening with a Yosida-regularized flow rule.

#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cosaf/tensor.hpp"

namespace cosaf {

struct MaterialParams {
  ElasticModuli moduli{};
  double mu_c = 0.0;     ///< Cosserat couple modulus
  double l_c = 1.0;      ///< internal length parameter
  double c = 1.0;        ///< hardening modulus
  double d = 1.0;        ///< recall coefficient; d = 0 gives Melan-Prager
  double sigma_y = 1.0;  ///< yield limit
  double nu = 1e-2;      ///< Yosida parameter
  std::optional<double> k;  ///< cut-off level for the cut-function mode

  /// Saturation radius c/d of the backstress (infinity when d = 0).
  double backstress_limit() const {
    return d > 0.0 ? c / d : std::numeric_limits<double>::infinity();
  }

  /// Human-readable list of positivity violations; empty when valid.
  /// d = 0 is accepted (linear kinematic hardening).
  std::vector<std::string> violations() const;

  /// Throws NonPositiveParams listing every violation.
  void validate() const;
};

enum class FlowMode { yosida, yosida_cut_k };

/// History variables at one material point. `strain` is the total strain at
/// which (eps_p, b) were last equilibrated; substepping interpolates from it.
struct PointState {
  DevSym3 eps_p{};
  DevSym3 b{};
  Sym3 strain{};
};

struct FlowResult {
  DevSym3 eps_p_rate{};
  DevSym3 b_rate{};
  double overstress = 0.0;  ///< {|dev T_E - b| - sigma_y}_+ at the end state
  int iterations = 0;
  int substeps = 1;
};

/// |dev(T_E) - b| - sigma_y; admissible iff <= 0.
double yield_gap(const Sym3& t_e, const DevSym3& b, const MaterialParams& p);

/// Membership in the test-function set |dev(T) - b| + d/(2c)|b|^2 <= sigma_y.
bool kstar_member(const Sym3& t_hat, const DevSym3& b_hat, const MaterialParams& p);

/// (1/nu){|X| - sigma_y}_+ X/|X| with X = dev(T_E) - b. Exact zero inside the
/// yield set.
DevSym3 yosida_flow(const Sym3& t_e, const DevSym3& b, const MaterialParams& p);

/// c eps_p_rate - d |eps_p_rate| b
DevSym3 backstress_rate(const DevSym3& eps_p_rate, const DevSym3& b, const MaterialParams& p);

/// Projection onto the ball |b| <= c/d.
DevSym3 project_pi(const DevSym3& b, const MaterialParams& p);

/// min(s, k). Throws std::invalid_argument for s < 0 or k <= 0.
double cut_ck(double s, double k);

/// The coupled operator G_nu(T, b) of the modified flow rule, evaluated
/// literally (Pi is always applied to b).
std::pair<DevSym3, DevSym3> g_nu(const Sym3& t, const DevSym3& b, const MaterialParams& p);

struct StepOptions {
  int max_iterations = 200;
  int max_substep_depth = 20;
  double tolerance = 1e-13;  ///< relative, on the plastic multiplier increment
};

/// Backward-Euler update of (eps_p, b) from `state` to total strain
/// `strain_new` over dt. The implicit equations reduce to a monotone scalar
/// equation in gamma = |eps_p_new - eps_p_old|; it is solved by Newton's
/// method safeguarded with bisection. On failure the step is split
/// dyadically (strain interpolated linearly) up to max_substep_depth.
///
/// Throws NonConvergence when the scalar solve fails at maximum depth.
std::pair<PointState, FlowResult> step_point(const PointState& state, const Sym3& strain_new,
                                             double dt, const MaterialParams& p,
                                             FlowMode mode = FlowMode::yosida,
                                             const StepOptions& opts = {});

/// Elastic stress T_E = C(strain - eps_p).
inline Sym3 elastic_stress_at(const Sym3& strain, const DevSym3& eps_p, const MaterialParams& p) {
  return elastic_stress(strain - eps_p.to_sym(), p.moduli);
}

}  // namespace cosaf
