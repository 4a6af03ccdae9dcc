#pragma once

// Small-tensor kit for 3x3 matrices.
//
// All types are plain value types. Symmetric, deviatoric and skew tensors
// store only their independent components, so the defining constraint
// (symmetry, zero trace, skew-symmetry) holds by construction.

#include <array>
#include <cmath>
#include <utility>

namespace cosaf {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

/// General 3x3 matrix, row-major.
struct Mat3 {
  std::array<double, 9> m{};

  double& operator()(int i, int j) { return m[3 * i + j]; }
  double operator()(int i, int j) const { return m[3 * i + j]; }

  static Mat3 identity() {
    Mat3 r;
    r(0, 0) = r(1, 1) = r(2, 2) = 1.0;
    return r;
  }
};

inline Mat3 operator+(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int k = 0; k < 9; ++k) r.m[k] = a.m[k] + b.m[k];
  return r;
}
inline Mat3 operator-(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int k = 0; k < 9; ++k) r.m[k] = a.m[k] - b.m[k];
  return r;
}
inline Mat3 operator*(double s, const Mat3& a) {
  Mat3 r;
  for (int k = 0; k < 9; ++k) r.m[k] = s * a.m[k];
  return r;
}
inline Mat3 transpose(const Mat3& a) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(j, i);
  return r;
}
inline double dot(const Mat3& a, const Mat3& b) {
  double s = 0.0;
  for (int k = 0; k < 9; ++k) s += a.m[k] * b.m[k];
  return s;
}
inline double norm(const Mat3& a) { return std::sqrt(dot(a, a)); }
inline double trace(const Mat3& a) { return a(0, 0) + a(1, 1) + a(2, 2); }
inline Vec3 operator*(const Mat3& a, const Vec3& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z,
          a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

/// Symmetric 3x3 tensor (6 components).
struct Sym3 {
  double xx = 0.0, yy = 0.0, zz = 0.0, xy = 0.0, xz = 0.0, yz = 0.0;

  static Sym3 identity() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }

  double operator()(int i, int j) const {
    if (i == j) return i == 0 ? xx : (i == 1 ? yy : zz);
    const int s = i + j;  // 1 -> xy, 2 -> xz, 3 -> yz
    return s == 1 ? xy : (s == 2 ? xz : yz);
  }

  Mat3 to_mat() const {
    Mat3 r;
    r(0, 0) = xx; r(1, 1) = yy; r(2, 2) = zz;
    r(0, 1) = r(1, 0) = xy;
    r(0, 2) = r(2, 0) = xz;
    r(1, 2) = r(2, 1) = yz;
    return r;
  }
};

inline Sym3 operator+(const Sym3& a, const Sym3& b) {
  return {a.xx + b.xx, a.yy + b.yy, a.zz + b.zz, a.xy + b.xy, a.xz + b.xz, a.yz + b.yz};
}
inline Sym3 operator-(const Sym3& a, const Sym3& b) {
  return {a.xx - b.xx, a.yy - b.yy, a.zz - b.zz, a.xy - b.xy, a.xz - b.xz, a.yz - b.yz};
}
inline Sym3 operator*(double s, const Sym3& a) {
  return {s * a.xx, s * a.yy, s * a.zz, s * a.xy, s * a.xz, s * a.yz};
}
inline double trace(const Sym3& a) { return a.xx + a.yy + a.zz; }
inline double dot(const Sym3& a, const Sym3& b) {
  return a.xx * b.xx + a.yy * b.yy + a.zz * b.zz + 2.0 * (a.xy * b.xy + a.xz * b.xz + a.yz * b.yz);
}
inline double norm(const Sym3& a) { return std::sqrt(dot(a, a)); }

/// Symmetric trace-free tensor (5 components). zz is derived as -(xx + yy).
struct DevSym3 {
  double xx = 0.0, yy = 0.0, xy = 0.0, xz = 0.0, yz = 0.0;

  double zz() const { return -(xx + yy); }

  Sym3 to_sym() const { return {xx, yy, zz(), xy, xz, yz}; }
  Mat3 to_mat() const { return to_sym().to_mat(); }
};

inline DevSym3 operator+(const DevSym3& a, const DevSym3& b) {
  return {a.xx + b.xx, a.yy + b.yy, a.xy + b.xy, a.xz + b.xz, a.yz + b.yz};
}
inline DevSym3 operator-(const DevSym3& a, const DevSym3& b) {
  return {a.xx - b.xx, a.yy - b.yy, a.xy - b.xy, a.xz - b.xz, a.yz - b.yz};
}
inline DevSym3 operator*(double s, const DevSym3& a) {
  return {s * a.xx, s * a.yy, s * a.xy, s * a.xz, s * a.yz};
}
inline double dot(const DevSym3& a, const DevSym3& b) {
  return a.xx * b.xx + a.yy * b.yy + a.zz() * b.zz() +
         2.0 * (a.xy * b.xy + a.xz * b.xz + a.yz * b.yz);
}
inline double norm(const DevSym3& a) { return std::sqrt(dot(a, a)); }
inline double dot(const DevSym3& a, const Sym3& b) { return dot(a.to_sym(), b); }

/// Skew-symmetric tensor ((0, a, b), (-a, 0, g), (-b, -g, 0)).
struct Skew3 {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;

  Mat3 to_mat() const {
    Mat3 r;
    r(0, 1) = alpha; r(1, 0) = -alpha;
    r(0, 2) = beta;  r(2, 0) = -beta;
    r(1, 2) = gamma; r(2, 1) = -gamma;
    return r;
  }
};

inline Skew3 operator+(const Skew3& a, const Skew3& b) {
  return {a.alpha + b.alpha, a.beta + b.beta, a.gamma + b.gamma};
}
inline Skew3 operator-(const Skew3& a, const Skew3& b) {
  return {a.alpha - b.alpha, a.beta - b.beta, a.gamma - b.gamma};
}
inline Skew3 operator*(double s, const Skew3& a) { return {s * a.alpha, s * a.beta, s * a.gamma}; }
/// Frobenius product; equals 2 * (axl a . axl b).
inline double dot(const Skew3& a, const Skew3& b) {
  return 2.0 * (a.alpha * b.alpha + a.beta * b.beta + a.gamma * b.gamma);
}
inline double norm(const Skew3& a) { return std::sqrt(dot(a, a)); }

/// Splits M into its symmetric and skew-symmetric parts.
inline std::pair<Sym3, Skew3> decompose(const Mat3& m) {
  Sym3 s{m(0, 0), m(1, 1), m(2, 2),
         0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)), 0.5 * (m(1, 2) + m(2, 1))};
  Skew3 w{0.5 * (m(0, 1) - m(1, 0)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 2) - m(2, 1))};
  return {s, w};
}
inline Sym3 sym(const Mat3& m) { return decompose(m).first; }
inline Skew3 skew(const Mat3& m) { return decompose(m).second; }

inline DevSym3 dev(const Sym3& s) {
  const double p = trace(s) / 3.0;
  return {s.xx - p, s.yy - p, s.xy, s.xz, s.yz};
}

inline Vec3 axl(const Skew3& w) { return {w.alpha, w.beta, w.gamma}; }
inline Skew3 axl_inv(const Vec3& v) { return {v.x, v.y, v.z}; }

/// Isotropic moduli (shear modulus mu, Lame constant lambda).
struct ElasticModuli {
  double mu = 1.0;
  double lambda = 1.0;
};

/// C E = 2 mu E + lambda tr(E) 1
inline Sym3 elastic_stress(const Sym3& e, const ElasticModuli& m) {
  Sym3 t = (2.0 * m.mu) * e;
  const double l = m.lambda * trace(e);
  t.xx += l; t.yy += l; t.zz += l;
  return t;
}

/// Inverse of elastic_stress: (1/2mu) (T - lambda/(3 lambda + 2 mu) tr(T) 1).
/// Requires mu > 0 and 3 lambda + 2 mu > 0.
inline Sym3 compliance(const Sym3& t, const ElasticModuli& m) {
  const double v = m.lambda / (3.0 * m.lambda + 2.0 * m.mu) * trace(t);
  Sym3 e = t;
  e.xx -= v; e.yy -= v; e.zz -= v;
  return (1.0 / (2.0 * m.mu)) * e;
}

}  // namespace cosaf
