#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pathlab {

// Dense row-major matrix.  Parameter tables here are tiny (tens of rows), so
// a flat vector with bounds left to the caller is all we need.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  // this += s * o
  void add_scaled(const Matrix& o, double s) {
    if (!same_shape(o)) throw std::invalid_argument("Matrix::add_scaled: shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * o.data[i];
  }

  void scale(double s) {
    for (double& v : data) v *= s;
  }

  void fill(double v) {
    for (double& x : data) x = v;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::fabs(v));
    return m;
  }

  double dot(const Matrix& o) const {
    if (!same_shape(o)) throw std::invalid_argument("Matrix::dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += data[i] * o.data[i];
    return s;
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace pathlab
