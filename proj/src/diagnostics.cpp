#include "cosaf/diagnostics.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "cosaf/errors.hpp"

namespace cosaf {

namespace {

double frob2(const Mat3& m) { return dot(m, m); }

EnergyParts energy_from(const GridMesh& mesh, const MaterialParams& p,
                        const std::vector<QpKinematics>& kin, const std::vector<Sym3>& t_e,
                        const std::vector<DevSym3>& b) {
  EnergyParts e;
  const double w = mesh.qp_weight();
  for (size_t q = 0; q < kin.size(); ++q) {
    e.elastic += w * 0.5 * dot(compliance(t_e[q], p.moduli), t_e[q]);
    e.couple += w * p.mu_c * dot(kin[q].rel, kin[q].rel);
    e.curvature += w * 2.0 * p.l_c * frob2(kin[q].grad_a);
    e.backstress += w * dot(b[q], b[q]) / (2.0 * p.c);
  }
  return e;
}

std::vector<DevSym3> backstresses(const FieldState& s) {
  std::vector<DevSym3> b(s.qp.size());
  for (size_t q = 0; q < s.qp.size(); ++q) b[q] = s.qp[q].b;
  return b;
}

// B-bar consistent weak divergence: -int T : eps_bar(phi_i e_c) per node.
std::vector<Vec3> bbar_divergence(const GridMesh& mesh, const RefElement& ref,
                                  const std::vector<Sym3>& t) {
  const double w = mesh.qp_weight();
  std::array<Vec3, 8> gmean{};
  for (int l = 0; l < 8; ++l)
    for (int q = 0; q < 8; ++q) gmean[l] = gmean[l] + 0.125 * ref.grad[q][l];
  std::vector<Vec3> out(mesh.num_nodes());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    double mean_p = 0.0;
    for (int q = 0; q < 8; ++q) mean_p += trace(t[qp_index(e, q)]) / 3.0;
    for (int q = 0; q < 8; ++q) {
      const Sym3& s = t[qp_index(e, q)];
      const double pq = trace(s) / 3.0;
      const Mat3 sd = s.to_mat() - pq * Mat3::identity();
      for (int l = 0; l < 8; ++l) out[nodes[l]] = out[nodes[l]] - w * (sd * ref.grad[q][l]);
    }
    for (int l = 0; l < 8; ++l) out[nodes[l]] = out[nodes[l]] - (w * mean_p) * gmean[l];
  }
  return out;
}

}  // namespace

EnergyParts free_energy(const GridMesh& mesh, const MaterialParams& p, const FieldState& s) {
  return energy_from(mesh, p, kinematics(mesh, s.u, s.a), s.t_e, backstresses(s));
}

EnergyParts free_energy(const MaterialParams& p, const Sym3& t_e, const DevSym3& b) {
  EnergyParts e;
  e.elastic = 0.5 * dot(compliance(t_e, p.moduli), t_e);
  e.backstress = dot(b, b) / (2.0 * p.c);
  return e;
}

double overstress_functional(const GridMesh& mesh, const MaterialParams& p, const FieldState& s) {
  double sum = 0.0;
  for (size_t q = 0; q < s.qp.size(); ++q) {
    const double o = std::max(0.0, yield_gap(s.t_e[q], s.qp[q].b, p));
    sum += o * o;
  }
  return mesh.qp_weight() * sum / (2.0 * p.nu);
}

FieldMonitors field_monitors(const MaterialParams& p, const FieldState& s) {
  FieldMonitors m;
  m.max_yield_gap = -std::numeric_limits<double>::infinity();
  const double lim = p.backstress_limit();
  for (size_t q = 0; q < s.qp.size(); ++q) {
    const PointState& st = s.qp[q];
    m.max_yield_gap = std::max(m.max_yield_gap, yield_gap(s.t_e[q], st.b, p));
    if (std::isfinite(lim)) m.max_backstress_ratio = std::max(m.max_backstress_ratio, norm(st.b) / lim);
    const double te = std::abs(trace(st.eps_p.to_sym())) / std::max(norm(st.eps_p), 1e-300);
    const double tb = std::abs(trace(st.b.to_sym())) / std::max(norm(st.b), 1e-300);
    m.max_trace = std::max({m.max_trace, te, tb});
    if (norm(project_pi(st.b, p) - st.b) > 1e-14 * (1.0 + norm(st.b))) m.projection_identity = false;
  }
  return m;
}

std::vector<RateNorms> rate_norm_accumulators(const CosseratSolver& solver,
                                              const FieldTrajectory& tr, const MaterialParams& p) {
  if (!tr.has_rates) throw MissingRates("trajectory was recorded without rates (store_rates = false)");
  const GridMesh& mesh = solver.mesh();
  const double w = mesh.qp_weight();
  std::vector<RateNorms> acc(tr.snapshots.size());
  std::vector<QpKinematics> prev = kinematics(mesh, tr.snapshots[0].u, tr.snapshots[0].a);
  for (size_t n = 1; n < tr.snapshots.size(); ++n) {
    const FieldState& s = tr.snapshots[n];
    const FieldState& s0 = tr.snapshots[n - 1];
    const double dt = s.time - s0.time;
    std::vector<QpKinematics> kin = kinematics(mesh, s.u, s.a);
    RateNorms r = acc[n - 1];
    for (size_t q = 0; q < kin.size(); ++q) {
      const Sym3 dte = s.t_e[q] - s0.t_e[q];
      r.c_inv_te += w * dot(compliance(dte, p.moduli), dte) / dt;
      const Skew3 drel = kin[q].rel - prev[q].rel;
      r.couple += w * 2.0 * p.mu_c * dot(drel, drel) / dt;
      r.curvature += w * 4.0 * p.l_c * frob2(kin[q].grad_a - prev[q].grad_a) / dt;
    }
    acc[n] = r;
    prev = std::move(kin);
  }
  return acc;
}

double coercivity_ratio(const GridMesh& mesh, const MaterialParams& p, const std::vector<Vec3>& u,
                        const std::vector<Vec3>& a, const std::vector<DevSym3>& eps_p,
                        const std::vector<DevSym3>& b) {
  const auto kin = kinematics(mesh, u, a);
  std::vector<Sym3> te(kin.size());
  for (size_t q = 0; q < kin.size(); ++q) te[q] = elastic_stress_at(kin[q].strain, eps_p[q], p);
  const double energy = energy_from(mesh, p, kin, te, b).total();
  const double w = mesh.qp_weight();
  double den = 0.0;
  for (size_t q = 0; q < kin.size(); ++q) {
    den += w * (dot(kin[q].u, kin[q].u) + frob2(kin[q].grad_u));
    den += w * 2.0 * (dot(kin[q].a, kin[q].a) + frob2(kin[q].grad_a));
    den += w * dot(b[q], b[q]);
  }
  return energy / den;
}

std::vector<Vec3> isochoric_bump(const GridMesh& mesh) {
  // u = curl (0, 0, psi) with psi = prod sin^2(pi s) vanishes with its gradient on the box boundary
  const int nn = mesh.num_nodes();
  auto s2 = [](double s) { return std::sin(M_PI * s) * std::sin(M_PI * s); };
  auto ds2 = [](double s) { return M_PI * std::sin(2.0 * M_PI * s); };
  std::vector<Vec3> u(nn);
  std::vector<int> dof(3 * nn, -1);
  int nfree = 0;
  for (int i = 0; i < nn; ++i) {
    const Vec3 x = mesh.node(i);
    const double sx = (x.x - mesh.origin.x) / mesh.length.x;
    const double sy = (x.y - mesh.origin.y) / mesh.length.y;
    const double sz = (x.z - mesh.origin.z) / mesh.length.z;
    u[i] = {s2(sx) * ds2(sy) * s2(sz) / mesh.length.y, -ds2(sx) * s2(sy) * s2(sz) / mesh.length.x, 0.0};
    if (mesh.on_boundary(i)) {
      u[i] = {};
    } else {
      for (int c = 0; c < 3; ++c) dof[3 * i + c] = nfree++;
    }
  }
  if (nfree == 0) return u;

  // Project onto element-mean-divergence-free fields: u <- u - C^T (C C^T)^+ C u.
  const RefElement ref(mesh);
  const int ne = mesh.num_elements();
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < ne; ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int l = 0; l < 8; ++l) {
      Vec3 g{};
      for (int q = 0; q < 8; ++q) g = g + 0.125 * ref.grad[q][l];
      for (int c = 0; c < 3; ++c)
        if (dof[3 * nodes[l] + c] >= 0) trip.emplace_back(e, dof[3 * nodes[l] + c], g[c]);
    }
  }
  Eigen::SparseMatrix<double> cm(ne, nfree);
  cm.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd x(nfree);
  for (int i = 0; i < nn; ++i)
    for (int c = 0; c < 3; ++c)
      if (dof[3 * i + c] >= 0) x[dof[3 * i + c]] = u[i][c];
  const Eigen::SparseMatrix<double> cct = cm * cm.transpose();
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-14);
  cg.setMaxIterations(20 * ne + 100);
  cg.compute(cct);
  const Eigen::VectorXd y = cg.solve(cm * x);
  x -= cm.transpose() * y;
  for (int i = 0; i < nn; ++i)
    for (int c = 0; c < 3; ++c)
      if (dof[3 * i + c] >= 0) u[i][c] = x[dof[3 * i + c]];
  return u;
}

CoercivityResult coercivity_probe(const GridMesh& mesh, const MaterialParams& p, int n_samples,
                                  std::uint64_t seed) {
  const int nn = mesh.num_nodes(), nqp = mesh.num_qp();
  CoercivityResult r;
  {
    const std::vector<Vec3> u = isochoric_bump(mesh);
    const auto kin = kinematics(mesh, u, std::vector<Vec3>(nn));
    std::vector<DevSym3> ep(nqp);
    for (int q = 0; q < nqp; ++q) ep[q] = dev(kin[q].strain);
    r.adversarial_ratio =
        coercivity_ratio(mesh, p, u, std::vector<Vec3>(nn), ep, std::vector<DevSym3>(nqp));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> mode(1, 3);
  r.min_random_ratio = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    // a few smooth sine modes vanishing on the boundary plus nodal noise
    std::array<std::array<int, 3>, 6> k{};
    std::array<double, 6> amp{};
    for (int m = 0; m < 6; ++m) {
      for (int d = 0; d < 3; ++d) k[m][d] = mode(rng);
      amp[m] = gauss(rng);
    }
    const double noise = 0.2 * std::abs(gauss(rng));
    std::vector<Vec3> u(nn), a(nn);
    for (int i = 0; i < nn; ++i) {
      if (mesh.on_boundary(i)) continue;
      const Vec3 x = mesh.node(i);
      for (int c = 0; c < 6; ++c) {
        double v = noise * gauss(rng);
        for (int m = 0; m < 6; ++m) {
          double prod = amp[m];
          for (int d = 0; d < 3; ++d)
            prod *= std::sin(k[(m + c) % 6][d] * M_PI * (x[d] - mesh.origin[d]) / mesh.length[d]);
          v += prod;
        }
        if (c < 3)
          u[i][c] = v;
        else
          a[i][c - 3] = v;
      }
    }
    std::vector<DevSym3> ep(nqp), b(nqp);
    const double eps_scale = std::abs(gauss(rng));
    const double b_scale = std::abs(gauss(rng));
    for (int q = 0; q < nqp; ++q) {
      ep[q] = eps_scale * DevSym3{gauss(rng), gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
      b[q] = b_scale * DevSym3{gauss(rng), gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
    }
    r.min_random_ratio = std::min(r.min_random_ratio, coercivity_ratio(mesh, p, u, a, ep, b));
    ++r.samples;
  }
  r.min_ratio = std::min(r.min_random_ratio, r.adversarial_ratio);
  return r;
}

std::vector<TestFunctionPair> build_test_functions(const CosseratSolver& solver,
                                                   const BoundaryData& bd, double t,
                                                   const std::vector<DevSym3>& eps_p0) {
  const GridMesh& mesh = solver.mesh();
  const MaterialParams& p = solver.params();
  const int nqp = mesh.num_qp();
  if (bd.g_N) {
    for (int face = 0; face < 6; ++face) {
      if (mesh.faces[face] != FaceTag::neumann) continue;
      const Vec3 nrm = face_normal(face);
      for (int i = 0; i < mesh.num_nodes(); ++i)
        if (mesh.node_on_face(i, face) && norm(bd.g_N(mesh.node(i), nrm, t)) > 0.0)
          throw InadmissibleScenario(
              "test pairs need zero Neumann traction; scaling the trial stress would violate the "
              "traction condition");
    }
  }
  std::vector<TestFunctionPair> out;
  TestFunctionPair zero;
  zero.label = "zero";
  zero.t_hat.assign(nqp, Sym3{});
  zero.b_hat.assign(nqp, DevSym3{});
  zero.div.assign(mesh.num_nodes(), Vec3{});
  out.push_back(std::move(zero));

  const LinearSolution trial = solver.solve(eps_p0, bd, t);
  double mx = 0.0, tmax = 0.0;
  for (const auto& s : trial.t_e) {
    mx = std::max(mx, norm(dev(s)));
    tmax = std::max(tmax, norm(s));
  }
  const double theta = std::min(1.0, p.sigma_y / (mx + 1e-12));
  TestFunctionPair tp;
  tp.label = "scaled_trial";
  tp.t_hat.resize(nqp);
  tp.b_hat.assign(nqp, DevSym3{});
  for (int q = 0; q < nqp; ++q) tp.t_hat[q] = theta * trial.t_e[q];
  bool ok = true;
  for (int q = 0; q < nqp && ok; ++q) ok = kstar_member(tp.t_hat[q], tp.b_hat[q], p);
  for (int face = 0; face < 6 && ok; ++face) {
    if (mesh.faces[face] != FaceTag::neumann) continue;
    const Vec3 nrm = face_normal(face);
    const int d = face / 2;
    for (int e = 0; e < mesh.num_elements() && ok; ++e) {
      const auto ijk = mesh.element_ijk(e);
      if ((face % 2 == 0) ? ijk[d] != 0 : ijk[d] != mesh.n[d] - 1) continue;
      for (int q = 0; q < 8; ++q)
        if (norm(tp.t_hat[qp_index(e, q)].to_mat() * nrm) > 1e-12 * (theta * tmax + 1e-300)) ok = false;
    }
  }
  if (ok) {
    tp.div = bbar_divergence(mesh, solver.ref(), tp.t_hat);
    out.push_back(std::move(tp));
  }
  return out;
}

std::vector<double> energy_inequality_series(const CosseratSolver& solver,
                                             const FieldTrajectory& tr, const BoundaryData& bd,
                                             const MaterialParams& p,
                                             const std::vector<TestFunctionPair>& pairs) {
  if (!tr.has_rates) throw MissingRates("trajectory was recorded without rates (store_rates = false)");
  if (pairs.size() != tr.snapshots.size())
    throw Error(ErrorClass::Internal, "one test pair per snapshot expected");
  const GridMesh& mesh = solver.mesh();
  const double w = mesh.qp_weight();
  const size_t ns = tr.snapshots.size();
  const int nn = mesh.num_nodes();

  std::vector<double> out(ns, 0.0);
  const FieldState& s0 = tr.snapshots[0];
  const double e0 = free_energy(mesh, p, s0).total();
  auto load = solver.external_load(bd, s0.time);
  double work = 0.0;
  for (size_t n = 1; n < ns; ++n) {
    const FieldState& a = tr.snapshots[n - 1];
    const FieldState& b = tr.snapshots[n];
    auto load_n = solver.external_load(bd, b.time);
    const TestFunctionPair& pa = pairs[n - 1];
    const TestFunctionPair& pb = pairs[n];
    for (int i = 0; i < nn; ++i) {
      const Vec3 du = b.u[i] - a.u[i];
      const Vec3 da = b.a[i] - a.a[i];
      const Vec3 f = 0.5 * (load.first[i] + load_n.first[i]);
      const Vec3 m = 0.5 * (load.second[i] + load_n.second[i]);
      const Vec3 ru = 0.5 * (a.reaction_u[i] + b.reaction_u[i]);
      const Vec3 ra = 0.5 * (a.reaction_a[i] + b.reaction_a[i]);
      const Vec3 dv = 0.5 * (pa.div[i] + pb.div[i]);
      work += dot(f + ru + dv, du) + dot(m + ra, da);
    }
    for (size_t q = 0; q < b.qp.size(); ++q) {
      const Sym3 th = 0.5 * (pa.t_hat[q] + pb.t_hat[q]);
      const DevSym3 bh = 0.5 * (pa.b_hat[q] + pb.b_hat[q]);
      work += w * dot(compliance(b.t_e[q] - a.t_e[q], p.moduli), th);
      work += w * dot(b.qp[q].b - a.qp[q].b, bh) / p.c;
    }
    out[n] = free_energy(mesh, p, b).total() - e0 - work;
    load = std::move(load_n);
  }
  return out;
}

double energy_inequality_residual(const CosseratSolver& solver, const FieldTrajectory& tr,
                                  const BoundaryData& bd, const MaterialParams& p,
                                  const std::vector<TestFunctionPair>& pairs, int n) {
  if (n < 0 || n >= static_cast<int>(tr.snapshots.size()))
    throw std::out_of_range("snapshot index out of range");
  FieldTrajectory head;
  head.has_rates = tr.has_rates;
  head.snapshots.assign(tr.snapshots.begin(), tr.snapshots.begin() + n + 1);
  std::vector<TestFunctionPair> hp(pairs.begin(), pairs.begin() + std::min<size_t>(pairs.size(), n + 1));
  return energy_inequality_series(solver, head, bd, p, hp).back();
}

double InequalityReport::worst() const {
  double w = -std::numeric_limits<double>::infinity();
  for (const auto& r : residual)
    for (double x : r) w = std::max(w, x);
  return w;
}

InequalityReport energy_inequality(const CosseratSolver& solver, const FieldTrajectory& tr,
                                   const BoundaryData& bd, const MaterialParams& p,
                                   const std::vector<DevSym3>& eps_p0) {
  if (!tr.has_rates) throw MissingRates("trajectory was recorded without rates (store_rates = false)");
  InequalityReport rep;
  const size_t ns = tr.snapshots.size();
  std::vector<std::vector<TestFunctionPair>> per_snap(ns);
  for (size_t n = 0; n < ns; ++n) {
    per_snap[n] = build_test_functions(solver, bd, tr.snapshots[n].time, eps_p0);
    rep.energy_scale = std::max(rep.energy_scale, free_energy(solver.mesh(), p, tr.snapshots[n]).total());
  }
  // a pair enters only if it is admissible at every snapshot
  std::vector<std::string> labels{"zero", "scaled_trial"};
  for (const auto& label : labels) {
    std::vector<TestFunctionPair> series;
    for (size_t n = 0; n < ns; ++n)
      for (const auto& tp : per_snap[n])
        if (tp.label == label) series.push_back(tp);
    if (series.size() != ns) {
      ++rep.rejected_pairs;
      continue;
    }
    rep.labels.push_back(label);
    rep.residual.push_back(energy_inequality_series(solver, tr, bd, p, series));
  }
  return rep;
}

}  // namespace cosaf
