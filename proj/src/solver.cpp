#include "cosaf/solver.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "cosaf/errors.hpp"

namespace cosaf {

namespace {

constexpr int kDofs = 6;  // u (3) then a (3) per node

Mat3 outer(const Vec3& a, const Vec3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a[i] * b[j];
  return r;
}

Vec3 unit(int c) {
  Vec3 v{};
  v[c] = 1.0;
  return v;
}

// Kinematics of a single basis function (node l, component c) at Gauss point q.
struct BasisKin {
  DevSym3 dev_e;
  double div = 0.0;
  Vec3 rel;  // axl(skew grad u) - a
  Mat3 grad_a;
};

BasisKin basis_kin(const RefElement& ref, int q, int alpha) {
  const int l = alpha / kDofs, c = alpha % kDofs;
  BasisKin k;
  const Vec3& g = ref.grad[q][l];
  if (c < 3) {
    const Mat3 gu = outer(unit(c), g);
    k.dev_e = dev(sym(gu));
    k.div = trace(gu);
    k.rel = axl(skew(gu));
  } else {
    k.rel = -ref.shape[q][l] * unit(c - 3);
    k.grad_a = outer(unit(c - 3), g);
  }
  return k;
}

// Face quadrature on a box face of element e: returns (local node values, weight, x).
template <class F>
void for_face_points(const GridMesh& m, int e, int face, F&& fn) {
  const int d = face / 2;
  const int da = (d + 1) % 3, db = (d + 2) % 3;
  const Vec3 h = m.spacing();
  const double w = h[da] * h[db] / 4.0;
  const double g0 = 0.5 - 0.5 / std::sqrt(3.0), g1 = 0.5 + 0.5 / std::sqrt(3.0);
  const auto ijk = m.element_ijk(e);
  for (int p = 0; p < 4; ++p) {
    Vec3 s{};
    s[d] = (face % 2 == 0) ? 0.0 : 1.0;
    s[da] = (p & 1) ? g1 : g0;
    s[db] = (p & 2) ? g1 : g0;
    const auto shp = q1_shape(s);
    Vec3 x{};
    for (int i = 0; i < 3; ++i) x[i] = m.origin[i] + (ijk[i] + s[i]) * h[i];
    fn(shp, w, x);
  }
}

bool element_on_face(const GridMesh& m, int e, int face) {
  const auto ijk = m.element_ijk(e);
  const int d = face / 2;
  return (face % 2 == 0) ? ijk[d] == 0 : ijk[d] == m.n[d] - 1;
}

}  // namespace

std::vector<QpKinematics> kinematics(const GridMesh& mesh, const std::vector<Vec3>& u,
                                     const std::vector<Vec3>& a) {
  const RefElement ref(mesh);
  std::vector<QpKinematics> out(mesh.num_qp());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    std::array<Mat3, 8> gu{};
    double mean_div = 0.0;
    for (int q = 0; q < 8; ++q) {
      QpKinematics& k = out[qp_index(e, q)];
      k = QpKinematics{};
      for (int l = 0; l < 8; ++l) {
        const Vec3& ul = u[nodes[l]];
        const Vec3& al = a[nodes[l]];
        const Vec3& g = ref.grad[q][l];
        const double n = ref.shape[q][l];
        k.grad_u = k.grad_u + outer(ul, g);
        k.grad_a = k.grad_a + outer(al, g);
        k.u = k.u + n * ul;
        k.a = k.a + n * al;
      }
      gu[q] = k.grad_u;
      mean_div += trace(k.grad_u) / 8.0;
    }
    for (int q = 0; q < 8; ++q) {
      QpKinematics& k = out[qp_index(e, q)];
      k.strain = dev(sym(gu[q])).to_sym() + (mean_div / 3.0) * Sym3::identity();
      k.rel = skew(gu[q]) - axl_inv(k.a);
    }
  }
  return out;
}

struct CosseratSolver::Impl {
  using SpMat = Eigen::SparseMatrix<double>;
  SpMat k_full;
  SpMat k_ff, k_fd;
  std::vector<int> free_index, fixed_index;  // per dof, -1 if not in the set
  std::vector<int> free_dofs, fixed_dofs;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  std::array<std::array<double, 48>, 48> ke{};
};

CosseratSolver::CosseratSolver(const GridMesh& mesh, const MaterialParams& params)
    : mesh_(mesh), params_(params), ref_(mesh), impl_(std::make_unique<Impl>()) {
  mesh_.validate();
  const auto& p = params_;
  if (!(p.moduli.mu > 0.0) || !(3.0 * p.moduli.lambda + 2.0 * p.moduli.mu > 0.0) ||
      !(p.mu_c >= 0.0) || !(p.l_c > 0.0))
    throw NonPositiveParams("solver needs mu > 0, 3 lambda + 2 mu > 0, mu_c >= 0, l_c > 0");

  // Element matrix, identical for every element of the uniform grid.
  const double w = mesh_.qp_weight();
  const double kappa = p.moduli.lambda + 2.0 * p.moduli.mu / 3.0;
  std::array<std::array<BasisKin, 48>, 8> bk;
  std::array<double, 48> mean_div{};
  for (int q = 0; q < 8; ++q)
    for (int al = 0; al < 48; ++al) {
      bk[q][al] = basis_kin(ref_, q, al);
      mean_div[al] += bk[q][al].div / 8.0;
    }
  auto& ke = impl_->ke;
  for (int al = 0; al < 48; ++al)
    for (int be = 0; be < 48; ++be) {
      double s = 0.0;
      for (int q = 0; q < 8; ++q) {
        const BasisKin& x = bk[q][al];
        const BasisKin& y = bk[q][be];
        s += w * (2.0 * p.moduli.mu * dot(x.dev_e, y.dev_e) + 4.0 * p.mu_c * dot(x.rel, y.rel) +
                  4.0 * p.l_c * dot(x.grad_a, y.grad_a));
      }
      s += mesh_.element_volume() * kappa * mean_div[al] * mean_div[be];
      ke[al][be] = s;
    }

  const int ndof = kDofs * mesh_.num_nodes();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh_.num_elements()) * 48 * 48);
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const auto nodes = mesh_.element_nodes(e);
    for (int al = 0; al < 48; ++al) {
      const int ga = kDofs * nodes[al / kDofs] + al % kDofs;
      for (int be = 0; be < 48; ++be) {
        if (ke[al][be] == 0.0) continue;
        const int gb = kDofs * nodes[be / kDofs] + be % kDofs;
        trip.emplace_back(ga, gb, ke[al][be]);
      }
    }
  }
  impl_->k_full.resize(ndof, ndof);
  impl_->k_full.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  trip.shrink_to_fit();

  auto& fi = impl_->free_index;
  auto& xi = impl_->fixed_index;
  fi.assign(ndof, -1);
  xi.assign(ndof, -1);
  for (int nd = 0; nd < mesh_.num_nodes(); ++nd) {
    const bool du = mesh_.dirichlet_u(nd), da = mesh_.on_boundary(nd);
    for (int c = 0; c < kDofs; ++c) {
      const int g = kDofs * nd + c;
      const bool fixed = c < 3 ? du : da;
      if (fixed) {
        xi[g] = static_cast<int>(impl_->fixed_dofs.size());
        impl_->fixed_dofs.push_back(g);
      } else {
        fi[g] = static_cast<int>(impl_->free_dofs.size());
        impl_->free_dofs.push_back(g);
      }
    }
  }
  const int nf = static_cast<int>(impl_->free_dofs.size());
  const int nx = static_cast<int>(impl_->fixed_dofs.size());
  std::vector<Eigen::Triplet<double>> tff, tfd;
  for (int col = 0; col < impl_->k_full.outerSize(); ++col)
    for (Impl::SpMat::InnerIterator it(impl_->k_full, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (fi[r] < 0) continue;
      if (fi[col] >= 0)
        tff.emplace_back(fi[r], fi[col], it.value());
      else
        tfd.emplace_back(fi[r], xi[col], it.value());
    }
  impl_->k_ff.resize(nf, nf);
  impl_->k_ff.setFromTriplets(tff.begin(), tff.end());
  impl_->k_fd.resize(nf, nx);
  impl_->k_fd.setFromTriplets(tfd.begin(), tfd.end());
  if (nf > 0) {
    impl_->ldlt.compute(impl_->k_ff);
    if (impl_->ldlt.info() != Eigen::Success)
      throw SingularSystem("factorization of the Cosserat system failed");
    const auto& dg = impl_->ldlt.vectorD();
    if (dg.minCoeff() <= 0.0)
      throw SingularSystem("Cosserat system is not positive definite (min pivot " +
                           std::to_string(dg.minCoeff()) + ")");
  }
}

CosseratSolver::~CosseratSolver() = default;
CosseratSolver::CosseratSolver(CosseratSolver&&) noexcept = default;
CosseratSolver& CosseratSolver::operator=(CosseratSolver&&) noexcept = default;

int CosseratSolver::num_free_dofs() const { return static_cast<int>(impl_->free_dofs.size()); }

double CosseratSolver::matrix_asymmetry() const {
  const Impl::SpMat d = impl_->k_full - Impl::SpMat(impl_->k_full.transpose());
  double mx = 0.0;
  for (int col = 0; col < impl_->k_full.outerSize(); ++col)
    for (Impl::SpMat::InnerIterator it(impl_->k_full, col); it; ++it)
      mx = std::max(mx, std::abs(it.value()));
  double dm = 0.0;
  for (int col = 0; col < d.outerSize(); ++col)
    for (Impl::SpMat::InnerIterator it(d, col); it; ++it) dm = std::max(dm, std::abs(it.value()));
  return mx > 0.0 ? dm / mx : 0.0;
}

std::pair<std::vector<Vec3>, std::vector<Vec3>> CosseratSolver::external_load(
    const BoundaryData& bd, double t) const {
  const int nn = mesh_.num_nodes();
  std::vector<Vec3> force(nn), couple(nn);
  const double w = mesh_.qp_weight();
  if (bd.f || bd.couple) {
    std::vector<Vec3> fn(nn), mn(nn);
    for (int i = 0; i < nn; ++i) {
      if (bd.f) fn[i] = bd.f(mesh_.node(i), t);
      if (bd.couple) mn[i] = bd.couple(mesh_.node(i), t);
    }
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto nodes = mesh_.element_nodes(e);
      for (int q = 0; q < 8; ++q) {
        Vec3 fq{}, mq{};
        for (int l = 0; l < 8; ++l) {
          fq = fq + ref_.shape[q][l] * fn[nodes[l]];
          mq = mq + ref_.shape[q][l] * mn[nodes[l]];
        }
        for (int l = 0; l < 8; ++l) {
          force[nodes[l]] = force[nodes[l]] + (w * ref_.shape[q][l]) * fq;
          couple[nodes[l]] = couple[nodes[l]] + (4.0 * w * ref_.shape[q][l]) * mq;
        }
      }
    }
  }
  if (bd.g_N) {
    for (int face = 0; face < 6; ++face) {
      if (mesh_.faces[face] != FaceTag::neumann) continue;
      const Vec3 nrm = face_normal(face);
      for (int e = 0; e < mesh_.num_elements(); ++e) {
        if (!element_on_face(mesh_, e, face)) continue;
        const auto nodes = mesh_.element_nodes(e);
        for_face_points(mesh_, e, face, [&](const std::array<double, 8>& shp, double fw, const Vec3& x) {
          const Vec3 g = bd.g_N(x, nrm, t);
          for (int l = 0; l < 8; ++l)
            if (shp[l] != 0.0) force[nodes[l]] = force[nodes[l]] + (fw * shp[l]) * g;
        });
      }
    }
  }
  return {force, couple};
}

LinearSolution CosseratSolver::solve(const std::vector<DevSym3>& eps_p, const BoundaryData& bd,
                                     double t) const {
  const int nn = mesh_.num_nodes();
  const int ndof = kDofs * nn;
  const int nqp = mesh_.num_qp();
  const bool have_ep = !eps_p.empty();
  if (have_ep && static_cast<int>(eps_p.size()) != nqp)
    throw Error(ErrorClass::Internal, "plastic strain field has wrong size");
  const double mu = params_.moduli.mu;
  const double w = mesh_.qp_weight();

  // Right-hand side over all dofs.
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndof);
  {
    auto [force, couple] = external_load(bd, t);
    for (int i = 0; i < nn; ++i)
      for (int c = 0; c < 3; ++c) {
        rhs[kDofs * i + c] += force[i][c];
        rhs[kDofs * i + 3 + c] += couple[i][c];
      }
  }
  if (have_ep) {
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto nodes = mesh_.element_nodes(e);
      for (int q = 0; q < 8; ++q) {
        const DevSym3& ep = eps_p[qp_index(e, q)];
        if (ep.xx == 0.0 && ep.yy == 0.0 && ep.xy == 0.0 && ep.xz == 0.0 && ep.yz == 0.0) continue;
        const Mat3 s = (2.0 * mu * w) * ep.to_mat();
        for (int l = 0; l < 8; ++l) {
          const Vec3 v = s * ref_.grad[q][l];  // (2 mu eps_p) : (e_c (x) grad phi)
          for (int c = 0; c < 3; ++c) rhs[kDofs * nodes[l] + c] += v[c];
        }
      }
    }
  }

  // Prescribed values.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ndof);
  for (int i = 0; i < nn; ++i) {
    const Vec3 xi = mesh_.node(i);
    if (mesh_.dirichlet_u(i) && bd.g_D) {
      const Vec3 g = bd.g_D(xi, t);
      for (int c = 0; c < 3; ++c) x[kDofs * i + c] = g[c];
    }
    if (mesh_.on_boundary(i) && bd.a_D) {
      const Vec3 g = bd.a_D(xi, t);
      for (int c = 0; c < 3; ++c) x[kDofs * i + 3 + c] = g[c];
    }
  }

  LinearSolution sol;
  const int nf = num_free_dofs();
  if (nf > 0) {
    const int nx = static_cast<int>(impl_->fixed_dofs.size());
    Eigen::VectorXd xd(nx), bf(nf);
    for (int j = 0; j < nx; ++j) xd[j] = x[impl_->fixed_dofs[j]];
    for (int j = 0; j < nf; ++j) bf[j] = rhs[impl_->free_dofs[j]];
    bf -= impl_->k_fd * xd;
    Eigen::VectorXd xf = impl_->ldlt.solve(bf);
    const Eigen::VectorXd r = impl_->k_ff * xf - bf;
    const double scale = std::max(bf.norm(), 1e-300);
    sol.residual = bf.norm() > 0.0 ? r.norm() / scale : r.norm();
    // one step of iterative refinement
    if (sol.residual > 1e-12) {
      xf -= impl_->ldlt.solve(r);
      sol.residual = (impl_->k_ff * xf - bf).norm() / scale;
    }
    if (!(sol.residual <= 1e-8))
      throw SingularSystem("linear solve residual " + std::to_string(sol.residual));
    for (int j = 0; j < nf; ++j) x[impl_->free_dofs[j]] = xf[j];
  }

  sol.u.resize(nn);
  sol.a.resize(nn);
  for (int i = 0; i < nn; ++i)
    for (int c = 0; c < 3; ++c) {
      sol.u[i][c] = x[kDofs * i + c];
      sol.a[i][c] = x[kDofs * i + 3 + c];
    }

  const Eigen::VectorXd reac = impl_->k_full * x - rhs;
  sol.reaction_u.assign(nn, Vec3{});
  sol.reaction_a.assign(nn, Vec3{});
  for (int g : impl_->fixed_dofs) {
    const int i = g / kDofs, c = g % kDofs;
    if (c < 3)
      sol.reaction_u[i][c] = reac[g];
    else
      sol.reaction_a[i][c - 3] = reac[g];
  }

  const auto kin = kinematics(mesh_, sol.u, sol.a);
  sol.strain.resize(nqp);
  sol.t_e.resize(nqp);
  sol.t_skew.resize(nqp);
  for (int q = 0; q < nqp; ++q) {
    sol.strain[q] = kin[q].strain;
    const DevSym3 ep = have_ep ? eps_p[q] : DevSym3{};
    sol.t_e[q] = elastic_stress_at(kin[q].strain, ep, params_);
    sol.t_skew[q] = (2.0 * params_.mu_c) * kin[q].rel;
  }
  return sol;
}

LinearSolution assemble_and_solve(const GridMesh& mesh, const MaterialParams& params,
                                  const std::vector<DevSym3>& eps_p, const BoundaryData& bd,
                                  double t) {
  return CosseratSolver(mesh, params).solve(eps_p, bd, t);
}

FieldState make_field_state(double t, const LinearSolution& sol, std::vector<PointState> qp) {
  FieldState s;
  s.time = t;
  s.u = sol.u;
  s.a = sol.a;
  s.qp = std::move(qp);
  s.t_e = sol.t_e;
  s.t_skew = sol.t_skew;
  s.reaction_u = sol.reaction_u;
  s.reaction_a = sol.reaction_a;
  return s;
}

InitialReport solve_initial(const CosseratSolver& solver, const std::vector<DevSym3>& eps_p0,
                            const std::vector<DevSym3>& b0, const BoundaryData& bd,
                            AdmissibilityPolicy policy) {
  const int nqp = solver.mesh().num_qp();
  const auto& p = solver.params();
  const LinearSolution sol = solver.solve(eps_p0, bd, 0.0);
  std::vector<PointState> qp(nqp);
  InitialReport rep;
  rep.max_yield_gap = -std::numeric_limits<double>::infinity();
  for (int q = 0; q < nqp; ++q) {
    qp[q].eps_p = eps_p0.empty() ? DevSym3{} : eps_p0[q];
    qp[q].b = b0.empty() ? DevSym3{} : b0[q];
    qp[q].strain = sol.strain[q];
    const double gap = yield_gap(sol.t_e[q], qp[q].b, p);
    rep.max_yield_gap = std::max(rep.max_yield_gap, gap);
    if (gap > 0.0) ++rep.violations;
    if (norm(qp[q].b) > p.backstress_limit()) ++rep.backstress_violations;
  }
  rep.state = make_field_state(0.0, sol, std::move(qp));
  if (policy == AdmissibilityPolicy::fail && (rep.violations > 0 || rep.backstress_violations > 0))
    throw InitialAdmissibilityViolated(
        "initial state inadmissible: yield condition fails at " + std::to_string(rep.violations) +
        " quadrature points (max gap " + std::to_string(rep.max_yield_gap) + "), |b0| > c/d at " +
        std::to_string(rep.backstress_violations));
  return rep;
}

std::vector<Vec3> weak_divergence(const GridMesh& mesh, const std::vector<Mat3>& t) {
  const RefElement ref(mesh);
  const double w = mesh.qp_weight();
  std::vector<Vec3> out(mesh.num_nodes());
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto nodes = mesh.element_nodes(e);
    for (int q = 0; q < 8; ++q) {
      const Mat3& s = t[qp_index(e, q)];
      for (int l = 0; l < 8; ++l) out[nodes[l]] = out[nodes[l]] - w * (s * ref.grad[q][l]);
    }
  }
  return out;
}

}  // namespace cosaf
