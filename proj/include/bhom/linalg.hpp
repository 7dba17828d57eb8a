#pragma once

#include <array>
#include <span>
#include <vector>

namespace bhom {

/// A point or vector in R^n, n in {1,2,3}.
using Point = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
Point normalized(std::span<const double> a);

/// Dense symmetric (or nearly symmetric, for validation) matrix of size n <= 3.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n) : n_(n) {}
  static SymMatrix identity(int n);
  static SymMatrix diagonal(std::span<const double> d);
  /// Builds from row-major entries (n*n of them).
  static SymMatrix from_rows(int n, std::span<const double> rows);
  /// v v^T.
  static SymMatrix outer(std::span<const double> v);

  int dim() const { return n_; }
  double& operator()(int i, int j) { return a_[3 * i + j]; }
  double operator()(int i, int j) const { return a_[3 * i + j]; }

  double trace() const;
  double max_asymmetry() const;
  /// v^T M v.
  double quadratic(std::span<const double> v) const;

  SymMatrix operator+(const SymMatrix& o) const;
  SymMatrix operator-(const SymMatrix& o) const;
  SymMatrix operator*(double s) const;
  SymMatrix operator-() const { return *this * -1.0; }

 private:
  int n_ = 0;
  std::array<double, 9> a_{};
};

/// Eigenvalues of the symmetrized matrix, sorted descending. Closed form for
/// n <= 2, cyclic Jacobi (off-diagonal target 1e-12) for n = 3.
std::vector<double> symmetric_eigenvalues(const SymMatrix& m);

/// Orthonormal n x n frame whose last column is the unit vector `nu`.
class Frame {
 public:
  explicit Frame(std::span<const double> nu);
  int dim() const { return n_; }
  /// Column j of the frame.
  Point column(int j) const;
  double operator()(int i, int j) const { return q_[3 * i + j]; }
  /// Q xi.
  Point apply(std::span<const double> xi) const;
  /// Q^T M Q, the matrix expressed in frame coordinates.
  SymMatrix to_frame(const SymMatrix& m) const;
  /// Q M Q^T.
  SymMatrix from_frame(const SymMatrix& m) const;
  /// max |Q^T Q - I|.
  double orthogonality_error() const;

 private:
  int n_;
  std::array<double, 9> q_{};
};

}  // namespace bhom
