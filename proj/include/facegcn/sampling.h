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

#ifndef FACEGCN_SAMPLING_H_
#define FACEGCN_SAMPLING_H_

#include <iosfwd>
#include <vector>

#include "facegcn/mesh.h"
#include "facegcn/sparse.h"

namespace facegcn {

// Transfer operators between a fine mesh and a coarser one obtained by
// quadric-error edge collapse.
//   down: n_coarse x n_fine, each row selects one kept fine vertex.
//   up:   n_fine x n_coarse, kept vertices map to themselves; removed ones get
//         the barycentric weights of their closest point on the coarse surface.
struct SamplingOperators {
  SparseMatrix down;
  SparseMatrix up;
  MeshTopology coarse_topology;
  Positions coarse_positions;
  std::vector<Index> kept;  // fine index of each coarse vertex, ascending
  bool non_manifold = false;
};

// Collapses half-edges (the removed endpoint merges into the kept one, which
// does not move) in order of quadric error until ceil(n * target_fraction)
// vertices remain.
SamplingOperators build_sampling(const MeshTopology& topology, const Positions& positions,
                                 double target_fraction);
// Same, stopping at exactly `target_count` vertices (4 <= target < n).
SamplingOperators build_sampling_to_count(const MeshTopology& topology,
                                          const Positions& positions, Index target_count);

// Levels ordered fine to coarse; samplers[i] maps level i <-> level i + 1.
struct MeshHierarchy {
  std::vector<MeshTopology> topologies;
  std::vector<Positions> positions;
  std::vector<SamplingOperators> samplers;
  std::vector<LaplacianPair> laplacians;

  std::size_t levels() const { return topologies.size(); }
};

MeshHierarchy build_hierarchy(const MeshTopology& topology, const Positions& positions,
                              int levels, double target_fraction,
                              LambdaMode mode = LambdaMode::kPowerIteration);

// Text container: "sampling-operators 1", then the down and up matrices in
// sparse-triplet format, then "triangles <count>" and one "a b c" per line.
void write_sampling(std::ostream& os, const SamplingOperators& ops);
SamplingOperators read_sampling(std::istream& is);

}  // namespace facegcn

#endif  // FACEGCN_SAMPLING_H_
