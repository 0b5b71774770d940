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

#include "facegcn/sparse.h"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>

#include "facegcn/errors.h"

namespace facegcn {

SparseMatrix::SparseMatrix() : SparseMatrix(0, 0, {}) {}

SparseMatrix::SparseMatrix(Index rows, Index cols,
                           std::span<const SparseEntry> entries) {
  if (rows < 0 || cols < 0) {
    throw ContractViolation("SparseMatrix: negative dimensions");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(entries.size());
  std::set<std::pair<Index, Index>> seen;
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
      throw ContractViolation("SparseMatrix: entry (" + std::to_string(e.row) +
                              ", " + std::to_string(e.col) +
                              ") out of range for " + std::to_string(rows) +
                              "x" + std::to_string(cols));
    }
    if (!seen.emplace(e.row, e.col).second) {
      throw ContractViolation("SparseMatrix: duplicate entry (" +
                              std::to_string(e.row) + ", " +
                              std::to_string(e.col) + ")");
    }
    triplets.emplace_back(e.row, e.col, e.value);
  }
  Storage m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  *this = SparseMatrix(std::move(m));
}

SparseMatrix::SparseMatrix(Storage storage) {
  storage.makeCompressed();
  auto impl = std::make_shared<Impl>();
  impl->transposed = Storage(storage.transpose());
  impl->transposed.makeCompressed();
  impl->forward = std::move(storage);
  impl_ = std::move(impl);
}

SparseMatrix::SparseMatrix(std::shared_ptr<const Impl> impl, bool transposed)
    : impl_(std::move(impl)), transposed_(transposed) {}

SparseMatrix SparseMatrix::identity(Index n) {
  Storage m(n, n);
  m.setIdentity();
  return SparseMatrix(std::move(m));
}

SparseMatrix SparseMatrix::from_dense(const Eigen::MatrixXd& dense, double drop) {
  std::vector<SparseEntry> entries;
  for (Index i = 0; i < dense.rows(); ++i) {
    for (Index j = 0; j < dense.cols(); ++j) {
      if (std::abs(dense(i, j)) > drop) entries.push_back({i, j, dense(i, j)});
    }
  }
  return SparseMatrix(dense.rows(), dense.cols(), entries);
}

Index SparseMatrix::rows() const { return eigen().rows(); }
Index SparseMatrix::cols() const { return eigen().cols(); }
Index SparseMatrix::nonzeros() const { return eigen().nonZeros(); }

const SparseMatrix::Storage& SparseMatrix::eigen() const {
  return transposed_ ? impl_->transposed : impl_->forward;
}

SparseMatrix SparseMatrix::transpose() const {
  return SparseMatrix(impl_, !transposed_);
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  return Eigen::MatrixXd(eigen());
}

std::vector<SparseEntry> SparseMatrix::entries() const {
  std::vector<SparseEntry> out;
  const Storage& m = eigen();
  out.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (Index r = 0; r < m.outerSize(); ++r) {
    for (Storage::InnerIterator it(m, r); it; ++it) {
      out.push_back({it.row(), it.col(), it.value()});
    }
  }
  return out;
}

double SparseMatrix::coeff(Index row, Index col) const {
  return eigen().coeff(row, col);
}

void write_triplets(std::ostream& os, const SparseMatrix& m) {
  os << "sparse-triplet 1\n";
  os << m.rows() << ' ' << m.cols() << ' ' << m.nonzeros() << '\n';
  char buf[64];
  for (const auto& e : m.entries()) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.value);
    os << e.row << ' ' << e.col << ' ' << buf << '\n';
  }
}

SparseMatrix read_triplets(std::istream& is) {
  const auto offset = [&is]() -> std::size_t {
    const auto pos = is.tellg();
    return pos < 0 ? 0 : static_cast<std::size_t>(pos);
  };
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "sparse-triplet" || version != 1) {
    throw ParseError("sparse-triplet: bad header", offset());
  }
  Index rows = 0, cols = 0, nnz = 0;
  if (!(is >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
    throw ParseError("sparse-triplet: bad dimensions", offset());
  }
  std::vector<SparseEntry> entries(static_cast<std::size_t>(nnz));
  for (auto& e : entries) {
    if (!(is >> e.row >> e.col >> e.value)) {
      throw ParseError("sparse-triplet: truncated entry list", offset());
    }
  }
  try {
    return SparseMatrix(rows, cols, entries);
  } catch (const ContractViolation& err) {
    throw ParseError(std::string("sparse-triplet: ") + err.what(), offset());
  }
}

}  // namespace facegcn
