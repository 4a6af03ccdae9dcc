#include "cosaf/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cosaf/errors.hpp"

namespace cosaf {

std::vector<std::string> MaterialParams::violations() const {
  std::vector<std::string> v;
  auto need_pos = [&](double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) v.push_back(std::string(name) + " must be > 0 (got " + std::to_string(x) + ")");
  };
  need_pos(moduli.mu, "mu");
  need_pos(moduli.lambda, "lambda");
  need_pos(mu_c, "mu_c");
  need_pos(l_c, "l_c");
  need_pos(c, "c");
  need_pos(sigma_y, "sigma_y");
  need_pos(nu, "nu");
  if (!(d >= 0.0) || !std::isfinite(d)) v.push_back("d must be >= 0 (got " + std::to_string(d) + ")");
  if (k && !(*k > 0.0)) v.push_back("k must be > 0 when given (got " + std::to_string(*k) + ")");
  return v;
}

void MaterialParams::validate() const {
  auto v = violations();
  if (v.empty()) return;
  std::string msg = "non-positive material parameters:";
  for (const auto& s : v) msg += " " + s + ";";
  throw NonPositiveParams(msg);
}

double yield_gap(const Sym3& t_e, const DevSym3& b, const MaterialParams& p) {
  return norm(dev(t_e) - b) - p.sigma_y;
}

bool kstar_member(const Sym3& t_hat, const DevSym3& b_hat, const MaterialParams& p) {
  const double nb = norm(b_hat);
  return norm(dev(t_hat) - b_hat) + p.d / (2.0 * p.c) * nb * nb <= p.sigma_y;
}

DevSym3 yosida_flow(const Sym3& t_e, const DevSym3& b, const MaterialParams& p) {
  const DevSym3 xi = dev(t_e) - b;
  const double n = norm(xi);
  const double over = n - p.sigma_y;
  if (!(over > 0.0)) return {};
  return (over / (p.nu * n)) * xi;
}

DevSym3 backstress_rate(const DevSym3& eps_p_rate, const DevSym3& b, const MaterialParams& p) {
  return p.c * eps_p_rate - (p.d * norm(eps_p_rate)) * b;
}

DevSym3 project_pi(const DevSym3& b, const MaterialParams& p) {
  const double lim = p.backstress_limit();
  const double n = norm(b);
  if (n <= lim) return b;
  return (lim / n) * b;
}

double cut_ck(double s, double k) {
  if (s < 0.0) throw std::invalid_argument("cut_ck: negative argument " + std::to_string(s));
  if (!(k > 0.0)) throw std::invalid_argument("cut_ck: k must be positive");
  return std::min(s, k);
}

std::pair<DevSym3, DevSym3> g_nu(const Sym3& t, const DevSym3& b, const MaterialParams& p) {
  const DevSym3 x = dev(t) - p.c * b;
  const double n = norm(x);
  const double over = n - p.sigma_y;
  if (!(over > 0.0)) return {DevSym3{}, DevSym3{}};
  const DevSym3 g1 = (over / (p.nu * n)) * x;
  const DevSym3 g2 = p.c * g1 + (p.c * p.d * over / p.nu) * project_pi(b, p);
  return {g1, g2};
}

namespace {

struct ScalarSolve {
  double gamma = 0.0;
  int iterations = 0;
  bool ok = false;
};

// Plastic corrector for one (sub)step. S is the trial deviatoric stress
// 2 mu (dev eps_new - eps_p_old). The residual in gamma is
//   f(g) = (nu/dt + 2 mu) g + sigma_y + h(g) - |Y(g)|
// where h and Y depend on the backstress update variant.
class Corrector {
 public:
  Corrector(const DevSym3& s, const DevSym3& b_old, double dt, const MaterialParams& p,
            FlowMode mode)
      : s_(s), b_(b_old), dt_(dt), p_(p), mode_(mode) {
    a_ = p.nu / dt + 2.0 * p.moduli.mu;
    const double lim = p.backstress_limit();
    over_limit_ = norm(b_old) > lim;
    pb_ = project_pi(b_old, p);
    if (mode == FlowMode::yosida_cut_k) {
      if (!p.k) throw NonPositiveParams("cut mode requires k");
      kdt_ = *p.k * dt;
    }
  }

  double kappa(double g) const { return mode_ == FlowMode::yosida_cut_k ? std::min(g, kdt_) : g; }
  double dkappa(double g) const { return mode_ == FlowMode::yosida_cut_k && g > kdt_ ? 0.0 : 1.0; }

  /// Vector whose direction is the flow direction at multiplier g.
  DevSym3 y(double g) const {
    const double k = kappa(g);
    if (explicit_pi()) return s_ - b_ + (p_.d * k) * pb_;
    return s_ - (1.0 / (1.0 + p_.d * k)) * b_;
  }

  double f(double g) const {
    const double k = kappa(g);
    const double h = explicit_pi() ? p_.c * k : p_.c * k / (1.0 + p_.d * k);
    return a_ * g + p_.sigma_y + h - norm(y(g));
  }

  double df(double g) const {
    const double k = kappa(g);
    const double dk = dkappa(g);
    const DevSym3 yy = y(g);
    const double ny = norm(yy);
    if (explicit_pi()) {
      const double dny = ny > 0.0 ? p_.d * dot(yy, pb_) / ny : 0.0;
      return a_ + dk * (p_.c - dny);
    }
    const double q = 1.0 + p_.d * k;
    const double dny = ny > 0.0 ? p_.d * dot(yy, b_) / (ny * q * q) : 0.0;
    return a_ + dk * (p_.c / (q * q) - dny);
  }

  DevSym3 b_new(double g, const DevSym3& n) const {
    const double k = kappa(g);
    if (explicit_pi()) return b_ + (p_.c * k) * n - (p_.d * k) * pb_;
    return (1.0 / (1.0 + p_.d * k)) * (b_ + (p_.c * k) * n);
  }

  double upper_bracket() const { return (norm(s_) + norm(b_)) / a_; }

 private:
  // Cut mode with an over-limit backstress applies Pi to the old value so the
  // residual stays monotone; otherwise the backstress update is implicit.
  bool explicit_pi() const { return mode_ == FlowMode::yosida_cut_k && over_limit_; }

  DevSym3 s_, b_, pb_;
  double dt_, a_ = 0.0, kdt_ = 0.0;
  const MaterialParams& p_;
  FlowMode mode_;
  bool over_limit_ = false;
};

ScalarSolve solve_gamma(const Corrector& cor, const StepOptions& opts) {
  ScalarSolve r;
  double lo = 0.0, hi = cor.upper_bracket();
  double g = 0.0;
  double fg = cor.f(g);
  if (fg >= 0.0) {
    r.ok = true;
    return r;
  }
  for (int it = 1; it <= opts.max_iterations; ++it) {
    r.iterations = it;
    if (fg < 0.0) lo = g; else hi = g;
    const double dfg = cor.df(g);
    double gn = dfg > 0.0 ? g - fg / dfg : 0.5 * (lo + hi);
    if (!(gn > lo && gn < hi)) gn = 0.5 * (lo + hi);
    const double step = std::abs(gn - g);
    g = gn;
    fg = cor.f(g);
    if (fg == 0.0 || step <= opts.tolerance * std::max(g, 1e-300) ||
        hi - lo <= opts.tolerance * std::max(hi, 1e-300)) {
      r.gamma = g;
      r.ok = true;
      return r;
    }
  }
  r.gamma = g;
  return r;
}

struct SubResult {
  PointState state;
  int iterations = 0;
  int substeps = 0;
  double overstress = 0.0;
};

SubResult step_rec(const PointState& st, const Sym3& strain_new, double dt, const MaterialParams& p,
                   FlowMode mode, const StepOptions& opts, int depth) {
  const double mu = p.moduli.mu;
  const DevSym3 s = (2.0 * mu) * (dev(strain_new) - st.eps_p);
  SubResult out;
  out.state = st;
  out.state.strain = strain_new;
  out.substeps = 1;
  if (norm(s - st.b) - p.sigma_y <= 0.0) return out;

  const Corrector cor(s, st.b, dt, p, mode);
  const ScalarSolve sol = solve_gamma(cor, opts);
  if (!sol.ok) {
    if (depth >= opts.max_substep_depth)
      throw NonConvergence("local return map did not converge after " +
                           std::to_string(opts.max_iterations) + " iterations at substep depth " +
                           std::to_string(depth) + "; reduce dt or increase nu");
    const Sym3 mid = 0.5 * (st.strain + strain_new);
    SubResult a = step_rec(st, mid, 0.5 * dt, p, mode, opts, depth + 1);
    SubResult b = step_rec(a.state, strain_new, 0.5 * dt, p, mode, opts, depth + 1);
    b.iterations += a.iterations + sol.iterations;
    b.substeps += a.substeps;
    // b.overstress already refers to the end state
    return b;
  }
  out.iterations = sol.iterations;
  if (sol.gamma <= 0.0) return out;
  const DevSym3 yy = cor.y(sol.gamma);
  const double ny = norm(yy);
  if (!(ny > 0.0)) return out;
  const DevSym3 n = (1.0 / ny) * yy;
  out.state.eps_p = st.eps_p + sol.gamma * n;
  out.state.b = cor.b_new(sol.gamma, n);
  out.overstress = p.nu * sol.gamma / dt;
  return out;
}

}  // namespace

std::pair<PointState, FlowResult> step_point(const PointState& state, const Sym3& strain_new,
                                             double dt, const MaterialParams& p, FlowMode mode,
                                             const StepOptions& opts) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_point: dt must be positive");
  SubResult r = step_rec(state, strain_new, dt, p, mode, opts, 0);
  FlowResult fr;
  fr.eps_p_rate = (1.0 / dt) * (r.state.eps_p - state.eps_p);
  fr.b_rate = (1.0 / dt) * (r.state.b - state.b);
  fr.iterations = r.iterations;
  fr.substeps = r.substeps;
  fr.overstress = r.overstress;  // from the last substep, i.e. the end state
  return {r.state, fr};
}

}  // namespace cosaf
