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

#include "facegcn/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "facegcn/errors.h"

namespace facegcn::ad {

GradCheckResult grad_check(const ScalarFn& f, const Tensor& point, double step,
                           Index max_coords) {
  Tensor x = Tensor::parameter(point.shape(), point.values());
  Tape tape;
  Tensor y;
  {
    TapeScope scope(tape);
    y = f(x);
  }
  if (y.size() != 1) throw ContractViolation("grad_check: function is not scalar-valued");
  const Eigen::VectorXd analytic = backward(tape, y)[x].values();

  std::vector<Index> coords(static_cast<std::size_t>(point.size()));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (max_coords > 0 && max_coords < point.size()) {
    std::mt19937_64 rng(0x5eed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(max_coords));
    std::sort(coords.begin(), coords.end());
  }

  NoGradScope no_grad;
  GradCheckResult result;
  Tensor probe(point.shape(), point.values());
  for (Index i : coords) {
    const double saved = probe.values()[i];
    probe.mutable_values()[i] = saved + step;
    const double plus = f(probe).item();
    probe.mutable_values()[i] = saved - step;
    const double minus = f(probe).item();
    probe.mutable_values()[i] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    if (!(err <= result.max_rel_error)) {
      result.max_rel_error = std::isnan(err) ? INFINITY : err;
      result.worst_coordinate = i;
    }
    ++result.checked;
  }
  return result;
}

}  // namespace facegcn::ad
