// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ddsp {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;

// Shape or size disagreement between arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A parameter violates a documented precondition. The message carries a
// "stage: " prefix naming where validation failed.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& stage, const std::string& what)
      : std::invalid_argument(stage + ": " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// A numerical routine failed to produce a result (non-convergence,
// singular system that cannot be regularized).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* stage, const std::string& what) {
  if (!cond) throw ConfigError(stage, what);
}

inline void require_dims(bool cond, const std::string& what) {
  if (!cond) throw DimensionError(what);
}

// Equally shaped matrices indexed by subcarrier (frequency) or tap (delay).
class MatrixStack {
 public:
  MatrixStack() = default;
  MatrixStack(Index count, Index rows, Index cols)
      : slices_(static_cast<std::size_t>(count), CMat::Zero(rows, cols)) {}
  explicit MatrixStack(std::vector<CMat> slices) : slices_(std::move(slices)) {
    for (const auto& s : slices_) {
      require_dims(s.rows() == rows() && s.cols() == cols(),
                   "MatrixStack: slices must share one shape");
    }
  }

  Index size() const noexcept { return static_cast<Index>(slices_.size()); }
  Index rows() const noexcept { return slices_.empty() ? 0 : slices_.front().rows(); }
  Index cols() const noexcept { return slices_.empty() ? 0 : slices_.front().cols(); }

  CMat& operator[](Index i) { return slices_[static_cast<std::size_t>(i)]; }
  const CMat& operator[](Index i) const { return slices_[static_cast<std::size_t>(i)]; }

  auto begin() noexcept { return slices_.begin(); }
  auto end() noexcept { return slices_.end(); }
  auto begin() const noexcept { return slices_.begin(); }
  auto end() const noexcept { return slices_.end(); }

  const std::vector<CMat>& slices() const noexcept { return slices_; }

  double energy() const {
    double e = 0.0;
    for (const auto& s : slices_) e += s.squaredNorm();
    return e;
  }

  bool all_finite() const {
    for (const auto& s : slices_) {
      if (!s.allFinite()) return false;
    }
    return true;
  }

  // Rows are stack entries; each slice is flattened column-major into one row.
  CMat flatten() const {
    CMat out(size(), rows() * cols());
    for (Index i = 0; i < size(); ++i) {
      out.row(i) = Eigen::Map<const Eigen::RowVectorXcd>((*this)[i].data(), rows() * cols());
    }
    return out;
  }

  static MatrixStack unflatten(const CMat& flat, Index rows, Index cols) {
    require_dims(flat.cols() == rows * cols, "MatrixStack::unflatten: width mismatch");
    MatrixStack out(flat.rows(), rows, cols);
    for (Index i = 0; i < flat.rows(); ++i) {
      Eigen::RowVectorXcd row = flat.row(i);
      out[i] = Eigen::Map<const CMat>(row.data(), rows, cols);
    }
    return out;
  }

 private:
  std::vector<CMat> slices_;
};

// Frobenius-norm distance between two stacks of identical shape.
inline double squared_distance(const MatrixStack& a, const MatrixStack& b) {
  require_dims(a.size() == b.size() && a.rows() == b.rows() && a.cols() == b.cols(),
               "squared_distance: shape mismatch");
  double e = 0.0;
  for (Index i = 0; i < a.size(); ++i) e += (a[i] - b[i]).squaredNorm();
  return e;
}

// ||M^H M - I||_F, used to accept or reject unitary cover matrices.
inline double unitarity_defect(const CMat& m) {
  return (m.adjoint() * m - CMat::Identity(m.cols(), m.cols())).norm();
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

// Rotates each column so its first element with magnitude above `floor` is
// real and positive. Makes SVD/eigen outputs reproducible.
inline void canonicalize_column_phases(CMat& m, double floor = 1e-12) {
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      const double mag = std::abs(m(r, c));
      if (mag > floor) {
        m.col(c) *= std::conj(m(r, c)) / mag;
        break;
      }
    }
  }
}

}  // namespace ddsp
