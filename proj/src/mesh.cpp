#include "cosaf/mesh.hpp"

#include <cmath>
#include <string>

#include "cosaf/errors.hpp"

namespace cosaf {

namespace {
// Gauss abscissae on [0,1]
const double kG0 = 0.5 - 0.5 / std::sqrt(3.0);
const double kG1 = 0.5 + 0.5 / std::sqrt(3.0);
}  // namespace

Vec3 face_normal(int face) {
  Vec3 v{};
  v[face / 2] = (face % 2 == 0) ? -1.0 : 1.0;
  return v;
}

GridMesh GridMesh::box(int nx, int ny, int nz, Vec3 length, std::array<FaceTag, 6> faces) {
  GridMesh m;
  m.n = {nx, ny, nz};
  m.length = length;
  m.faces = faces;
  m.validate();
  return m;
}

void GridMesh::validate() const {
  for (int d = 0; d < 3; ++d)
    if (n[d] < 1) throw SingularSystem("grid needs at least one element per direction");
  if (!(length.x > 0.0 && length.y > 0.0 && length.z > 0.0))
    throw SingularSystem("box edge lengths must be positive");
  bool any = false;
  for (auto f : faces) any = any || f == FaceTag::dirichlet;
  if (!any) throw SingularSystem("no Dirichlet face: displacement is not determined");
}

std::array<int, 3> GridMesh::node_ijk(int id) const {
  const int nx = n[0] + 1, ny = n[1] + 1;
  return {id % nx, (id / nx) % ny, id / (nx * ny)};
}

Vec3 GridMesh::node(int id) const {
  const auto [i, j, k] = node_ijk(id);
  const Vec3 h = spacing();
  return {origin.x + i * h.x, origin.y + j * h.y, origin.z + k * h.z};
}

std::array<int, 3> GridMesh::element_ijk(int e) const {
  return {e % n[0], (e / n[0]) % n[1], e / (n[0] * n[1])};
}

std::array<int, 8> GridMesh::element_nodes(int e) const {
  const auto [i, j, k] = element_ijk(e);
  std::array<int, 8> r{};
  for (int l = 0; l < 8; ++l) r[l] = node_id(i + (l & 1), j + ((l >> 1) & 1), k + ((l >> 2) & 1));
  return r;
}

Vec3 GridMesh::qp_position(int e, int q) const {
  const auto [i, j, k] = element_ijk(e);
  const Vec3 h = spacing();
  const double sx = (q & 1) ? kG1 : kG0, sy = ((q >> 1) & 1) ? kG1 : kG0,
               sz = ((q >> 2) & 1) ? kG1 : kG0;
  return {origin.x + (i + sx) * h.x, origin.y + (j + sy) * h.y, origin.z + (k + sz) * h.z};
}

bool GridMesh::node_on_face(int id, int face) const {
  const auto ijk = node_ijk(id);
  const int d = face / 2;
  return (face % 2 == 0) ? ijk[d] == 0 : ijk[d] == n[d];
}

bool GridMesh::on_boundary(int id) const {
  for (int f = 0; f < 6; ++f)
    if (node_on_face(id, f)) return true;
  return false;
}

bool GridMesh::dirichlet_u(int id) const {
  for (int f = 0; f < 6; ++f)
    if (faces[f] == FaceTag::dirichlet && node_on_face(id, f)) return true;
  return false;
}

bool GridMesh::has_neumann() const {
  for (auto f : faces)
    if (f == FaceTag::neumann) return true;
  return false;
}

std::array<double, 8> q1_shape(const Vec3& s) {
  std::array<double, 8> r{};
  for (int l = 0; l < 8; ++l) {
    const double fx = (l & 1) ? s.x : 1.0 - s.x;
    const double fy = ((l >> 1) & 1) ? s.y : 1.0 - s.y;
    const double fz = ((l >> 2) & 1) ? s.z : 1.0 - s.z;
    r[l] = fx * fy * fz;
  }
  return r;
}

RefElement::RefElement(const GridMesh& m) {
  const Vec3 h = m.spacing();
  for (int q = 0; q < 8; ++q) {
    const Vec3 s{(q & 1) ? kG1 : kG0, ((q >> 1) & 1) ? kG1 : kG0, ((q >> 2) & 1) ? kG1 : kG0};
    xi[q] = s;
    shape[q] = q1_shape(s);
    for (int l = 0; l < 8; ++l) {
      const int a = l & 1, b = (l >> 1) & 1, c = (l >> 2) & 1;
      const double fx = a ? s.x : 1.0 - s.x, dx = a ? 1.0 : -1.0;
      const double fy = b ? s.y : 1.0 - s.y, dy = b ? 1.0 : -1.0;
      const double fz = c ? s.z : 1.0 - s.z, dz = c ? 1.0 : -1.0;
      grad[q][l] = {dx * fy * fz / h.x, fx * dy * fz / h.y, fx * fy * dz / h.z};
    }
  }
}

}  // namespace cosaf
