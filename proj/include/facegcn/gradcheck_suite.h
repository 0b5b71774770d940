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

#ifndef FACEGCN_GRADCHECK_SUITE_H_
#define FACEGCN_GRADCHECK_SUITE_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "facegcn/gcn.h"
#include "facegcn/gradcheck.h"

namespace facegcn {

struct GradcheckComponent {
  std::string name;
  double threshold = 1e-4;
  // Worst result over the component's checks.
  std::function<ad::GradCheckResult()> run;
};

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0;
  double threshold = 0;
  Index checked = 0;
  bool passed = false;
  std::string error;  // exception text when the check itself threw
};

using ChebConvFn =
    std::function<ad::Tensor(const gcn::ChebLayer&, const SparseMatrix&, const ad::Tensor&)>;

struct GradcheckSuiteOptions {
  std::uint64_t seed = 1;
  // Spectral convolution used by the cheb_conv row; tests swap in a broken
  // backward to confirm the suite reports it.
  ChebConvFn cheb_conv = gcn::cheb_conv;
};

// One entry per differentiable component, all at toy scale: diffcore ops,
// cheb_conv, residual_block, decoder, refiner, combiner, discriminator,
// render_texture, render_lighting, render_pose, pixel_loss, identity_loss,
// vertex_loss, adversarial_loss (through the nested penalty gradient) and
// total_loss.
std::vector<GradcheckComponent> gradcheck_components(const GradcheckSuiteOptions& options = {});

std::vector<GradcheckRow> run_gradcheck_suite(const std::vector<GradcheckComponent>& components);
bool all_passed(const std::vector<GradcheckRow>& rows);

// "component=<name> max_rel_error=<e> threshold=<t> checked=<k> status=<pass|fail>"
// per row, then "summary=<pass|fail> components=<n>".
void write_gradcheck_report(std::ostream& os, const std::vector<GradcheckRow>& rows);

}  // namespace facegcn

#endif  // FACEGCN_GRADCHECK_SUITE_H_
