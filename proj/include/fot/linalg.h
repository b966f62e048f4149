/*
 * Copyright 2026 The FedOrtho Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FOT_LINALG_H_
#define FOT_LINALG_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace fot {

// Dense row-major matrix of doubles. Used for weights, layer inputs,
// sketches and bases alike.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws InvalidInput when data.size() != rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix Identity(std::size_t n);
  static Matrix FromRows(std::initializer_list<std::initializer_list<double>> rows);
  // Column vector.
  static Matrix FromColumn(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  Matrix Column(std::size_t c) const;
  // Columns [begin, end).
  Matrix Columns(std::size_t begin, std::size_t end) const;
  Matrix Transposed() const;
  bool AllFinite() const;

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);
// Matrix product; throws InvalidInput on shape mismatch.
Matrix operator*(const Matrix& a, const Matrix& b);
// aᵀ·b without materializing the transpose.
Matrix TransposeTimes(const Matrix& a, const Matrix& b);
// a·bᵀ without materializing the transpose.
Matrix TimesTranspose(const Matrix& a, const Matrix& b);
Matrix HStack(const Matrix& left, const Matrix& right);

double SquaredNorm(const Matrix& a);
double FrobeniusNorm(const Matrix& a);
double MaxAbsDiff(const Matrix& a, const Matrix& b);

// Orthonormal columns spanning a subspace of R^dim. k = 0 is allowed and
// represents the empty subspace.
class OrthonormalBasis {
 public:
  static constexpr double kTolerance = 1e-9;

  explicit OrthonormalBasis(std::size_t dim = 0);
  // Throws InvalidInput unless vectorsᵀ·vectors = I within kTolerance.
  explicit OrthonormalBasis(Matrix vectors);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.cols(); }
  bool empty() const { return size() == 0; }
  const Matrix& vectors() const { return vectors_; }

 private:
  std::size_t dim_ = 0;
  Matrix vectors_;
};

struct SvdResult {
  Matrix u;               // m x k, k = min(m, n)
  std::vector<double> s;  // descending, non-negative
  Matrix v;               // n x k
};

// Thin SVD by one-sided Jacobi rotations.
SvdResult Svd(const Matrix& a);

inline constexpr double kDefaultDropTolerance = 1e-10;

// Modified Gram-Schmidt with one re-orthogonalization pass. A column is
// dropped when its residual norm falls below drop_tol times its original
// norm (zero columns are always dropped).
OrthonormalBasis GramSchmidt(const Matrix& columns,
                             double drop_tol = kDefaultDropTolerance);

// x - O(Oᵀx): removes the component of each column of x lying in the basis.
Matrix ProjectOut(const OrthonormalBasis& basis, const Matrix& x);
// delta - (delta·O)Oᵀ: removes the component of each row of delta lying in
// the basis.
Matrix ProjectRowsOut(const OrthonormalBasis& basis, const Matrix& delta);

Matrix GaussianMatrix(std::size_t rows, std::size_t cols, uint64_t seed);

// Principal angles in radians, ascending. Returns min(k1, k2) angles.
std::vector<double> PrincipalAngles(const OrthonormalBasis& b1,
                                    const OrthonormalBasis& b2);

}  // namespace fot

#endif  // FOT_LINALG_H_
