#pragma once

// Structured hexahedral grid over an axis-aligned box.

#include <array>
#include <vector>

#include "cosaf/tensor.hpp"

namespace cosaf {

enum class FaceTag { dirichlet, neumann };

/// Box faces in the order x-, x+, y-, y+, z-, z+.
enum Face : int { xmin = 0, xmax = 1, ymin = 2, ymax = 3, zmin = 4, zmax = 5 };

/// Outward unit normal of a box face.
Vec3 face_normal(int face);

struct GridMesh {
  std::array<int, 3> n{1, 1, 1};  ///< elements per direction
  Vec3 origin{};
  Vec3 length{1.0, 1.0, 1.0};
  /// Displacement boundary tag per box face. The microrotation is always
  /// prescribed on the whole boundary.
  std::array<FaceTag, 6> faces{FaceTag::dirichlet, FaceTag::dirichlet, FaceTag::dirichlet,
                               FaceTag::dirichlet, FaceTag::dirichlet, FaceTag::dirichlet};

  static GridMesh box(int nx, int ny, int nz, Vec3 length = {1.0, 1.0, 1.0},
                      std::array<FaceTag, 6> faces = {FaceTag::dirichlet, FaceTag::dirichlet,
                                                      FaceTag::dirichlet, FaceTag::dirichlet,
                                                      FaceTag::dirichlet, FaceTag::dirichlet});

  /// Throws SingularSystem for a degenerate grid or when no face is Dirichlet.
  void validate() const;

  int num_nodes() const { return (n[0] + 1) * (n[1] + 1) * (n[2] + 1); }
  int num_elements() const { return n[0] * n[1] * n[2]; }
  int num_qp() const { return 8 * num_elements(); }

  Vec3 spacing() const { return {length.x / n[0], length.y / n[1], length.z / n[2]}; }
  double element_volume() const {
    const Vec3 h = spacing();
    return h.x * h.y * h.z;
  }
  double qp_weight() const { return element_volume() / 8.0; }

  int node_id(int i, int j, int k) const { return i + (n[0] + 1) * (j + (n[1] + 1) * k); }
  std::array<int, 3> node_ijk(int id) const;
  Vec3 node(int id) const;

  std::array<int, 3> element_ijk(int e) const;
  /// Local node l = a + 2b + 4c sits at lattice offset (a, b, c).
  std::array<int, 8> element_nodes(int e) const;

  /// Physical position of quadrature point q (0..7) of element e.
  Vec3 qp_position(int e, int q) const;

  bool node_on_face(int id, int face) const;
  bool on_boundary(int id) const;
  /// Node carries prescribed displacement (touches any Dirichlet face).
  bool dirichlet_u(int id) const;
  bool has_neumann() const;
};

/// Reference-element data shared by every element of a uniform grid.
struct RefElement {
  /// shape function values at the 2x2x2 Gauss points
  std::array<std::array<double, 8>, 8> shape{};
  /// physical gradients at the Gauss points
  std::array<std::array<Vec3, 8>, 8> grad{};
  /// Gauss point offsets in [0,1]^3
  std::array<Vec3, 8> xi{};

  explicit RefElement(const GridMesh& m);
};

/// Trilinear shape values at local coordinates s in [0,1]^3.
std::array<double, 8> q1_shape(const Vec3& s);

}  // namespace cosaf
