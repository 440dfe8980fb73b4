#pragma once

#include <array>
#include <cmath>

namespace pbingham {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

/// Symmetric d x d tensor, d in {2, 3}. Only the upper triangle is stored, so
/// symmetry holds by construction. In 2D the z row/column is identically zero.
class SymTensor {
public:
  // storage order: xx, yy, zz, xy, xz, yz
  enum Entry { XX = 0, YY, ZZ, XY, XZ, YZ };

  SymTensor() = default;
  explicit SymTensor(int dim) : dim_(dim) {}

  static SymTensor from_matrix(const std::array<std::array<double, 3>, 3>& m, int dim = 3);
  static SymTensor diag(double xx, double yy, double zz = 0.0, int dim = 3);

  int dim() const { return dim_; }

  double operator()(int i, int j) const { return e_[slot(i, j)]; }
  double& operator()(int i, int j) { return e_[slot(i, j)]; }
  double entry(Entry k) const { return e_[k]; }

  /// Frobenius norm sqrt(sum_ij A_ij^2).
  double norm() const;
  /// Full contraction A:B = sum_ij A_ij B_ij.
  double contract(const SymTensor& other) const;
  bool is_zero() const;
  bool is_finite() const;

  std::array<std::array<double, 3>, 3> to_matrix() const;
  /// Q A Q^T.
  SymTensor rotated(const std::array<std::array<double, 3>, 3>& q) const;

  SymTensor& operator+=(const SymTensor& o);
  SymTensor& operator-=(const SymTensor& o);
  SymTensor& operator*=(double s);

  friend SymTensor operator+(SymTensor a, const SymTensor& b) { return a += b; }
  friend SymTensor operator-(SymTensor a, const SymTensor& b) { return a -= b; }
  friend SymTensor operator*(double s, SymTensor a) { return a *= s; }
  friend SymTensor operator*(SymTensor a, double s) { return a *= s; }

private:
  static int slot(int i, int j) {
    if (i == j) return i;
    const int lo = i < j ? i : j;
    const int hi = i < j ? j : i;
    return lo == 0 ? (hi == 1 ? XY : XZ) : YZ;
  }

  int dim_ = 3;
  std::array<double, 6> e_{};
};

}  // namespace pbingham
