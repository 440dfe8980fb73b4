#include "pbingham/sym_tensor.hpp"

namespace pbingham {

SymTensor SymTensor::from_matrix(const std::array<std::array<double, 3>, 3>& m, int dim) {
  SymTensor t(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) t(i, j) = 0.5 * (m[i][j] + m[j][i]);
  return t;
}

SymTensor SymTensor::diag(double xx, double yy, double zz, int dim) {
  SymTensor t(dim);
  t.e_[XX] = xx;
  t.e_[YY] = yy;
  t.e_[ZZ] = dim == 3 ? zz : 0.0;
  return t;
}

double SymTensor::norm() const { return std::sqrt(contract(*this)); }

double SymTensor::contract(const SymTensor& o) const {
  return e_[XX] * o.e_[XX] + e_[YY] * o.e_[YY] + e_[ZZ] * o.e_[ZZ] +
         2.0 * (e_[XY] * o.e_[XY] + e_[XZ] * o.e_[XZ] + e_[YZ] * o.e_[YZ]);
}

bool SymTensor::is_zero() const {
  for (double v : e_)
    if (v != 0.0) return false;
  return true;
}

bool SymTensor::is_finite() const {
  for (double v : e_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::array<std::array<double, 3>, 3> SymTensor::to_matrix() const {
  std::array<std::array<double, 3>, 3> m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = (*this)(i, j);
  return m;
}

SymTensor SymTensor::rotated(const std::array<std::array<double, 3>, 3>& q) const {
  const auto a = to_matrix();
  std::array<std::array<double, 3>, 3> qa{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) qa[i][j] += q[i][k] * a[k][j];
  SymTensor r(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += qa[i][k] * q[j][k];
      r(i, j) = s;
    }
  return r;
}

SymTensor& SymTensor::operator+=(const SymTensor& o) {
  for (int k = 0; k < 6; ++k) e_[k] += o.e_[k];
  return *this;
}

SymTensor& SymTensor::operator-=(const SymTensor& o) {
  for (int k = 0; k < 6; ++k) e_[k] -= o.e_[k];
  return *this;
}

SymTensor& SymTensor::operator*=(double s) {
  for (double& v : e_) v *= s;
  return *this;
}

}  // namespace pbingham
