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

#ifndef FACEGCN_CONFIG_H_
#define FACEGCN_CONFIG_H_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "facegcn/gcn.h"
#include "facegcn/losses.h"
#include "facegcn/render.h"

namespace facegcn {

// Every knob of a run. Defaults are desk scale: a 642-vertex model with a
// 4-level hierarchy, 64 x 64 images, batch 4 and 200 generator steps.
//
// Text form, one "key = value" per line, '#' starts a comment, lists are
// comma separated. Keys (default):
//   seed (1)                      run seed: model, dataset, init, batches
//   model ()                      binary morphable model; empty = synthetic
//   vertices (642)                synthetic model size
//   levels (4), level_fraction (0.25)
//   cheb_order (6), embedding_dim (128)
//   decoder_widths (64,32,16,8), refiner_width (16), refiner_blocks (2)
//   critic_channels (8,16,16,32,32,32)
//   image_size (64), camera_focal (4.6875), camera_distance (10)
//   rotation (euler | axis_angle)
//   dataset_size (16), detail_scale (0.08)
//   losses (pixel,identity,adversarial,vertex)
//   sigma2 (0.2), sigma3 (0.001), hold_steps (4), warmup_steps (4)
//   lambda_gp (10), critic_steps (5)
//   learning_rate (1e-4), critic_learning_rate (1e-4)
//   adam_beta1 (0), adam_beta2 (0.9), adam_epsilon (1e-8)
//   batch_size (4), steps (200)
//   out (out)
struct RunConfig {
  std::uint64_t seed = 1;
  std::string model;
  Index vertices = 642;
  int levels = 4;
  double level_fraction = 0.25;
  gcn::GcnConfig network;
  Index image_size = 64;
  render::Camera camera;
  render::RotationMode rotation = render::RotationMode::kEulerXYZ;
  Index dataset_size = 16;
  double detail_scale = 0.08;
  bool use_pixel = true, use_identity = true, use_adversarial = true, use_vertex = true;
  losses::LossWeights weights;
  double lambda_gp = 10.0;
  Index critic_steps = 5;
  double learning_rate = 1e-4;
  double critic_learning_rate = 1e-4;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.9;
  double adam_epsilon = 1e-8;
  Index batch_size = 4;
  Index steps = 200;
  std::string out = "out";

  bool operator==(const RunConfig& other) const;
};

// Throws ConfigError naming the key on unknown keys, malformed values or
// out-of-range settings.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);
// Applies one "key=value" override.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
void validate(const RunConfig& config);

// Writes every key; parse_config(write_config(c)) == c.
void write_config(std::ostream& os, const RunConfig& config);
std::string config_string(const RunConfig& config);

}  // namespace facegcn

#endif  // FACEGCN_CONFIG_H_
