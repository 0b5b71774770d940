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

#ifndef FACEGCN_GRADCHECK_H_
#define FACEGCN_GRADCHECK_H_

#include <functional>

#include "facegcn/tensor.h"

namespace facegcn::ad {

using ScalarFn = std::function<Tensor(const Tensor&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  Index worst_coordinate = -1;
  Index checked = 0;
};

// Compares reverse-mode gradients of a scalar program against central
// differences. The error of a coordinate is
//   |analytic - numeric| / max(1, |numeric|)
// and the maximum over checked coordinates is reported. With max_coords > 0
// a fixed pseudo-random subset of that many coordinates is checked.
GradCheckResult grad_check(const ScalarFn& f, const Tensor& point, double step = 1e-5,
                           Index max_coords = 0);

}  // namespace facegcn::ad

#endif  // FACEGCN_GRADCHECK_H_
