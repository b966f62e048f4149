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

#include "fot/linalg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "fot/error.h"

namespace fot {
namespace {

std::string ShapeString(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void RequireSameShape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::kInvalidInput, std::string(op) + ": shape mismatch " +
                                              ShapeString(a) + " vs " +
                                              ShapeString(b));
  }
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// One-sided Jacobi on a tall (rows >= cols) matrix. Works on columns, so the
// data is kept transposed: each row of `work` is one column of the input.
SvdResult JacobiTall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix work = a.Transposed();  // n x m
  Matrix vt = Matrix::Identity(n);  // rows are columns of V

  constexpr double kEps = std::numeric_limits<double>::epsilon();
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto cp = work.row(p);
        auto cq = work.row(q);
        const double alpha = Dot(cp, cp);
        const double beta = Dot(cq, cq);
        const double gamma = Dot(cp, cq);
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = cp[i];
          const double y = cq[i];
          cp[i] = c * x - s * y;
          cq[i] = s * x + c * y;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(Dot(work.row(j), work.row(j)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  SvdResult out;
  out.s.resize(n);
  out.u = Matrix(m, n);
  out.v = Matrix(n, n);
  const double smax = norms.empty() ? 0.0 : norms[order[0]];
  const double zero_cut = smax * static_cast<double>(std::max(m, n)) * kEps;
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = vt(j, i);
    if (norms[j] > zero_cut && norms[j] > 0.0) {
      out.s[k] = norms[j];
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = work(j, i) / norms[j];
    } else {
      out.s[k] = norms[j];
      missing.push_back(k);
    }
  }

  // Left vectors of (numerically) zero singular values are undetermined;
  // complete them to an orthonormal set against the canonical basis.
  std::size_t candidate = 0;
  for (std::size_t k : missing) {
    while (candidate < m) {
      std::vector<double> e(m, 0.0);
      e[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        // Unfilled columns are still zero and contribute nothing.
        for (std::size_t c = 0; c < n; ++c) {
          if (c == k) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i) proj += out.u(i, c) * e[i];
          for (std::size_t i = 0; i < m; ++i) e[i] -= proj * out.u(i, c);
        }
      }
      const double norm = std::sqrt(Dot(e, e));
      if (norm > 0.5) {
        for (std::size_t i = 0; i < m; ++i) out.u(i, k) = e[i] / norm;
        break;
      }
    }
  }
  return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kInvalidInput,
                "matrix data length " + std::to_string(data_.size()) +
                    " does not match " + std::to_string(rows) + "x" +
                    std::to_string(cols));
  }
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::FromRows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::kInvalidInput, "ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::FromColumn(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::Column(std::size_t c) const { return Columns(c, c + 1); }

Matrix Matrix::Columns(std::size_t begin, std::size_t end) const {
  if (begin > end || end > cols_) {
    throw Error(ErrorCode::kInvalidInput, "column range out of bounds");
  }
  Matrix out(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = (*this)(r, c);
  }
  return out;
}

Matrix Matrix::Transposed() const {
  Matrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  }
  return out;
}

bool Matrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

Matrix& Matrix::operator+=(const Matrix& other) {
  RequireSameShape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  RequireSameShape(*this, other, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorCode::kInvalidInput,
                "multiply: shape mismatch " + ShapeString(a) + " * " + ShapeString(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto b_row = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix TransposeTimes(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::kInvalidInput, "transpose-multiply: shape mismatch " +
                                              ShapeString(a) + " vs " + ShapeString(b));
  }
  Matrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto a_row = a.row(k);
    auto b_row = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a_row[i];
      if (aki == 0.0) continue;
      auto out_row = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aki * b_row[j];
    }
  }
  return out;
}

Matrix TimesTranspose(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kInvalidInput, "multiply-transpose: shape mismatch " +
                                              ShapeString(a) + " vs " + ShapeString(b));
  }
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = Dot(a.row(i), b.row(j));
  }
  return out;
}

Matrix HStack(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw Error(ErrorCode::kInvalidInput, "hstack: row count mismatch");
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t r = 0; r < left.rows(); ++r) {
    std::copy(left.row(r).begin(), left.row(r).end(), out.row(r).begin());
    std::copy(right.row(r).begin(), right.row(r).end(),
              out.row(r).begin() + static_cast<std::ptrdiff_t>(left.cols()));
  }
  return out;
}

double SquaredNorm(const Matrix& a) { return Dot(a.values(), a.values()); }

double FrobeniusNorm(const Matrix& a) { return std::sqrt(SquaredNorm(a)); }

double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  RequireSameShape(a, b, "max-abs-diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

OrthonormalBasis::OrthonormalBasis(std::size_t dim) : dim_(dim), vectors_(dim, 0) {}

OrthonormalBasis::OrthonormalBasis(Matrix vectors)
    : dim_(vectors.rows()), vectors_(std::move(vectors)) {
  if (vectors_.cols() > dim_) {
    throw Error(ErrorCode::kInvalidInput, "basis has more vectors than dimensions");
  }
  if (!vectors_.AllFinite()) {
    throw Error(ErrorCode::kInvalidInput, "basis has non-finite entries");
  }
  const Matrix gram = TransposeTimes(vectors_, vectors_);
  if (MaxAbsDiff(gram, Matrix::Identity(vectors_.cols())) > kTolerance) {
    throw Error(ErrorCode::kInvalidInput, "basis columns are not orthonormal");
  }
}

SvdResult Svd(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw Error(ErrorCode::kInvalidInput, "svd of an empty matrix");
  }
  if (!a.AllFinite()) {
    throw Error(ErrorCode::kInvalidInput, "svd input has non-finite entries");
  }
  if (a.rows() >= a.cols()) return JacobiTall(a);
  SvdResult t = JacobiTall(a.Transposed());
  std::swap(t.u, t.v);
  return t;
}

OrthonormalBasis GramSchmidt(const Matrix& columns, double drop_tol) {
  if (columns.rows() == 0) {
    throw Error(ErrorCode::kInvalidInput, "gram-schmidt on zero-dimensional vectors");
  }
  if (!(drop_tol > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "drop tolerance must be positive");
  }
  if (!columns.AllFinite()) {
    throw Error(ErrorCode::kInvalidInput, "gram-schmidt input has non-finite entries");
  }
  const std::size_t dim = columns.rows();
  // Accepted vectors are stored as rows for contiguous access.
  std::vector<std::vector<double>> kept;
  const Matrix cols_t = columns.Transposed();
  for (std::size_t c = 0; c < cols_t.rows() && kept.size() < dim; ++c) {
    std::vector<double> v(cols_t.row(c).begin(), cols_t.row(c).end());
    const double original = std::sqrt(Dot(v, v));
    if (original == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : kept) {
        const double proj = Dot(q, v);
        for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * q[i];
      }
    }
    const double residual = std::sqrt(Dot(v, v));
    if (residual < drop_tol * original) continue;
    for (double& x : v) x /= residual;
    kept.push_back(std::move(v));
  }
  Matrix out(dim, kept.size());
  for (std::size_t k = 0; k < kept.size(); ++k) {
    for (std::size_t i = 0; i < dim; ++i) out(i, k) = kept[k][i];
  }
  return OrthonormalBasis(std::move(out));
}

Matrix ProjectOut(const OrthonormalBasis& basis, const Matrix& x) {
  if (x.rows() != basis.dim()) {
    throw Error(ErrorCode::kInvalidInput,
                "project_out: input has " + std::to_string(x.rows()) +
                    " rows, basis dimension is " + std::to_string(basis.dim()));
  }
  if (basis.empty()) return x;
  const Matrix& o = basis.vectors();
  return x - o * TransposeTimes(o, x);
}

Matrix ProjectRowsOut(const OrthonormalBasis& basis, const Matrix& delta) {
  if (delta.cols() != basis.dim()) {
    throw Error(ErrorCode::kInvalidInput,
                "project_rows_out: input has " + std::to_string(delta.cols()) +
                    " columns, basis dimension is " + std::to_string(basis.dim()));
  }
  if (basis.empty()) return delta;
  const Matrix& o = basis.vectors();
  return delta - TimesTranspose(delta * o, o);
}

Matrix GaussianMatrix(std::size_t rows, std::size_t cols, uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (double& x : out.values()) x = normal(engine);
  return out;
}

std::vector<double> PrincipalAngles(const OrthonormalBasis& b1,
                                    const OrthonormalBasis& b2) {
  if (b1.dim() != b2.dim()) {
    throw Error(ErrorCode::kInvalidInput, "principal angles: dimension mismatch");
  }
  if (b1.empty() || b2.empty()) return {};
  // Cosines lose resolution near zero angle (acos(1 - eps) ~ 2e-8), so
  // small angles are taken from the sines, the singular values of the part
  // of b2 outside span(b1).
  const Matrix cross = TransposeTimes(b1.vectors(), b2.vectors());
  const std::vector<double> cosines = Svd(cross).s;  // descending
  std::vector<double> sines =
      Svd(b2.vectors() - b1.vectors() * cross).s;  // descending
  std::sort(sines.begin(), sines.end());
  const std::size_t count = std::min(b1.size(), b2.size());
  std::vector<double> angles(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    const double s = std::clamp(sines[i], 0.0, 1.0);
    angles[i] = c * c > 0.5 ? std::asin(s) : std::acos(c);
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

}  // namespace fot
