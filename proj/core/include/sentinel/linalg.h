#ifndef SENTINEL_LINALG_H_
#define SENTINEL_LINALG_H_

#include <cstddef>
#include <span>
#include <vector>

namespace sentinel {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  static Matrix FromRows(const std::vector<std::vector<double>>& rows);
  static Matrix Identity(size_t n);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }

  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> column(size_t c) const;

  Matrix Transposed() const;
  Matrix operator*(const Matrix& rhs) const;

  bool operator==(const Matrix&) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

struct SymmetricEigen {
  std::vector<double> values;  // non-increasing
  Matrix vectors;              // column j pairs with values[j]
  int sweeps = 0;
};

// Cyclic Jacobi rotations on a symmetric matrix until the off-diagonal
// Frobenius norm drops below tolerance * ||A||_F. Each eigenvector is signed
// so that its largest-magnitude entry is positive.
SymmetricEigen JacobiEigen(const Matrix& symmetric, double tolerance = 1e-14,
                           int max_sweeps = 100);

double SquaredDistance(std::span<const double> a, std::span<const double> b);

}  // namespace sentinel

#endif  // SENTINEL_LINALG_H_
