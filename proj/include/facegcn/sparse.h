// Copyright 2026 The FaceGCN Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FACEGCN_SPARSE_H_
#define FACEGCN_SPARSE_H_

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace facegcn {

using Index = Eigen::Index;

struct SparseEntry {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

// Immutable compressed sparse matrix. Copies share storage, and the
// transpose is built once at construction so sparse-dense products in both
// directions are cheap during backpropagation.
class SparseMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor>;

  SparseMatrix();
  // Throws ContractViolation on out-of-range indices or duplicate (row, col).
  SparseMatrix(Index rows, Index cols, std::span<const SparseEntry> entries);
  explicit SparseMatrix(Storage storage);

  static SparseMatrix identity(Index n);
  static SparseMatrix from_dense(const Eigen::MatrixXd& dense, double drop = 0.0);

  Index rows() const;
  Index cols() const;
  Index nonzeros() const;

  const Storage& eigen() const;
  SparseMatrix transpose() const;
  Eigen::MatrixXd to_dense() const;
  // Row-major sorted entry list.
  std::vector<SparseEntry> entries() const;
  double coeff(Index row, Index col) const;

 private:
  struct Impl {
    Storage forward;
    Storage transposed;
  };
  SparseMatrix(std::shared_ptr<const Impl> impl, bool transposed);

  std::shared_ptr<const Impl> impl_;
  bool transposed_ = false;
};

// Sparse-triplet text format:
//   sparse-triplet 1
//   <rows> <cols> <nnz>
//   <row> <col> <value>     (nnz lines, 0-based indices, %.17g values)
void write_triplets(std::ostream& os, const SparseMatrix& m);
SparseMatrix read_triplets(std::istream& is);

}  // namespace facegcn

#endif  // FACEGCN_SPARSE_H_
