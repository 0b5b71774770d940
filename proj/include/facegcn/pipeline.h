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

#ifndef FACEGCN_PIPELINE_H_
#define FACEGCN_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "facegcn/config.h"
#include "facegcn/gcn.h"
#include "facegcn/losses.h"
#include "facegcn/morphable.h"
#include "facegcn/render.h"
#include "facegcn/sampling.h"

namespace facegcn::pipeline {

// Independent generator for (seed, a, b); every random draw of a run goes
// through one of these so any step can be replayed in isolation.
std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Fixed, non-trainable pieces of a run.
struct Scene {
  RunConfig config;
  MorphableModel model;
  MeshHierarchy hierarchy;
  std::shared_ptr<const losses::ToyEmbedder> embedder;

  losses::EmbeddingFn embed() const;
};

// Loads `config.model` or synthesizes one, then builds the hierarchy.
Scene make_scene(const RunConfig& config);

struct Sample {
  ad::Tensor image;              // [H, W, 3] in [0, 1]
  render::Mask face_mask;        // H * W
  Eigen::VectorXd coefficients;  // 257
  Positions albedo;              // ground truth, n x 3
};
using Dataset = std::vector<Sample>;

// Random coefficients rendered with albedo T + detail, where the detail is a
// seeded high-frequency field scaled by config.detail_scale and a per-sample
// amplitude. Masks cover the whole rendered face.
Dataset synth_dataset(const Scene& scene, Index count);

// Ground-truth style render of arbitrary coefficients and albedo.
render::RenderOutput render_coefficients(const Scene& scene, const Eigen::VectorXd& coefficients,
                                         const Positions& albedo,
                                         render::ShadeMode mode = render::ShadeMode::kShaded);

// Binary container:
//   "FGCNDATA" | version=1 | count | H | W | n | per sample: coefficients
//   (257 f64), image (H*W*3 f64), face mask (H*W f64), albedo (n*3 f64)
void write_dataset(std::ostream& os, const Dataset& dataset);
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(std::istream& is);
Dataset read_dataset(const std::string& path);

// Everything about a sample that does not depend on trainable parameters.
struct SampleContext {
  ad::Tensor shape;           // S, n x 3
  ad::Tensor coarse_texture;  // T
  ad::Tensor pose, lighting;
  render::PreparedView view;
  ad::Tensor projected;  // T_p, zero where invalid
  std::vector<bool> projected_valid;
  ad::Tensor embedding;  // F(image)
  ad::Tensor critic_real;  // image with background zeroed outside M_proj
};

SampleContext prepare_sample(const Scene& scene, const Sample& sample);

// Decoder + Refiner + Combiner: embedding and coarse texture -> T'.
struct Generator {
  gcn::Decoder decoder;
  gcn::Refiner refiner;
  gcn::Combiner combiner;

  static Generator make(const gcn::GcnConfig& config, const MeshHierarchy& hierarchy,
                        std::mt19937_64& rng);
  ad::Tensor forward(const SampleContext& context, const MeshHierarchy& hierarchy) const;
  gcn::ParameterList parameters() const;
};

struct Networks {
  Generator generator;
  gcn::Discriminator critic;

  static Networks make(const Scene& scene);
  gcn::ParameterList critic_parameters() const;
};

struct AdamSettings {
  double learning_rate = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

// First-order adaptive-moment optimizer over a fixed parameter list; updates
// the parameter tensors in place.
class Adam {
 public:
  Adam() = default;
  Adam(AdamSettings settings, gcn::ParameterList params);

  void step(const ad::GradientMap& grads);

  const gcn::ParameterList& parameters() const { return params_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<Eigen::VectorXd>& first_moments() const { return m_; }
  const std::vector<Eigen::VectorXd>& second_moments() const { return v_; }
  void restore(std::uint64_t t, std::vector<Eigen::VectorXd> m, std::vector<Eigen::VectorXd> v);

 private:
  AdamSettings settings_;
  gcn::ParameterList params_;
  std::uint64_t t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

// Scalar values of one training step. Disabled or skipped terms are empty.
struct StepLog {
  Index step = 0;
  losses::Sigmas sigmas;
  std::optional<double> pixel, identity, adversarial, vertex_texture, vertex_projected;
  double total = 0;
  std::optional<double> critic, penalty;
};

// "step=<k> sigma1=... sigma4=... pixel=... ... penalty=..." with %.17g
// values and "-" for empty terms.
std::string format_log(const StepLog& log);

// Alternating WGAN-GP training: while sigma1 * sigma3 > 0 and the
// adversarial term is enabled, `critic_steps` critic updates on random
// batches precede each generator update.
class Trainer {
 public:
  Trainer(const Scene& scene, const Dataset& dataset);

  // Runs one generator step and returns its log. Throws NumericalError on a
  // non-finite loss after writing a dump when a dump path is set.
  StepLog step();
  Index next_step() const { return step_; }

  const Networks& networks() const { return networks_; }
  void set_dump_path(std::string path) { dump_path_ = std::move(path); }

  // Binary container:
  //   "FGCNCKPT" | version=1 | next step | hierarchy level sizes | two groups
  //   (generator, critic), each: Adam step count, parameter count, then per
  //   parameter: name, rank, dims, values, first and second moments.
  void save(std::ostream& os) const;
  void save(const std::string& path) const;
  // Throws ConfigError when the checkpoint does not fit the scene.
  void load(std::istream& is);
  void load(const std::string& path);

 private:
  std::vector<Index> batch_indices(Index step) const;
  std::vector<Index> critic_batch(Index step, Index round) const;
  ad::Tensor fake_image(Index sample) const;
  void dump(const StepLog& log) const;

  const Scene& scene_;
  std::vector<SampleContext> contexts_;
  std::vector<render::Mask> face_masks_;
  std::vector<ad::Tensor> images_;
  Networks networks_;
  Adam generator_opt_, critic_opt_;
  Index step_ = 0;
  std::string dump_path_;
};

struct TrainResult {
  std::vector<StepLog> logs;
};

// Runs config.steps steps, writing one log line per step to `log` if given.
TrainResult train(Trainer& trainer, Index steps, std::ostream* log = nullptr);

// Network-only networks rebuilt from a checkpoint file.
Networks load_networks(const Scene& scene, const std::string& checkpoint_path);

struct InferResult {
  ad::Tensor coarse_texture, refined_texture;  // n x 3
  ad::Tensor coarse_image, fine_image, albedo_image;
  render::Mask projected_mask;
};

InferResult infer(const Scene& scene, const Networks& networks, const Sample& sample);

// coarse.obj, refined.obj, input.png, render_coarse.png, render_fine.png,
// render_albedo.png and mask_proj.png under `directory`.
void write_infer_outputs(const std::string& directory, const Scene& scene, const Sample& sample,
                         const InferResult& result);

struct MetricRecord {
  Index sample = 0;
  std::string texture;  // "fine" or "coarse"
  losses::Metrics metrics;
};

struct MetricReport {
  std::vector<MetricRecord> records;
  losses::Metrics mean(const std::string& texture) const;
};

// Metrics of the fine and coarse renders against each input, restricted to
// the projected face region M_proj * M_face.
MetricReport evaluate(const Scene& scene, const Networks& networks, const Dataset& dataset);

// Text report, one record per line:
//   record=sample index=<i> texture=<fine|coarse> l1=.. psnr=.. ssim=.. cosine=..
//   record=mean texture=<fine|coarse> l1=.. psnr=.. ssim=.. cosine=..
//   record=reference texture=published l1=0.034 psnr=29.69 ssim=0.894
//     lightcnn=0.900 evolve=0.848 reproducible=false
// The reference row carries published full-scale results for format parity
// only; it is not produced by this code.
void write_report(std::ostream& os, const MetricReport& report);

}  // namespace facegcn::pipeline

#endif  // FACEGCN_PIPELINE_H_
