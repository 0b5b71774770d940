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

#include "facegcn/pipeline.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "facegcn/binio.h"
#include "facegcn/errors.h"
#include "facegcn/ops.h"
#include "facegcn/png_io.h"

namespace facegcn::pipeline {

using ad::Tensor;

namespace {

enum Stream : std::uint64_t {
  kModelStream = 1,
  kEmbedderStream,
  kDatasetStream,
  kDetailStream,
  kInitStream,
  kBatchStream,
  kCriticBatchStream,
  kPenaltyStream,
};

Tensor positions_tensor(const Positions& p) {
  return Tensor({p.rows(), 3}, Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
}

Positions tensor_positions(const Tensor& t) {
  return Positions(Eigen::Map<const Positions>(t.values().data(), t.dim(0), 3));
}

Tensor clamp01(const Tensor& t) {
  return Tensor(t.shape(), t.values().cwiseMax(0.0).cwiseMin(1.0));
}

Tensor segment_tensor(const Eigen::VectorXd& v) { return Tensor({v.size()}, v); }

std::string format_value(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *v);
  return buf;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return std::mt19937_64(mix(mix(seed, a), b));
}

losses::EmbeddingFn Scene::embed() const {
  auto e = embedder;
  return [e](const Tensor& image) { return (*e)(image); };
}

Scene make_scene(const RunConfig& config) {
  validate(config);
  Scene s;
  s.config = config;
  if (config.model.empty()) {
    s.model = synth_model(mix(config.seed, kModelStream), config.vertices);
  } else {
    s.model = read_model(config.model);
  }
  s.hierarchy = build_hierarchy(s.model.topology(), s.model.shape_mean(), config.levels,
                                config.level_fraction);
  s.embedder = std::make_shared<const losses::ToyEmbedder>(
      config.network.embedding_dim, config.image_size, config.image_size,
      mix(config.seed, kEmbedderStream));
  return s;
}

render::RenderOutput render_coefficients(const Scene& scene, const Eigen::VectorXd& coefficients,
                                         const Positions& albedo, render::ShadeMode mode) {
  const CoefficientVector c = CoefficientVector::from_flat(coefficients, scene.model.dims());
  const Positions shape = shape_from_coeffs(scene.model, c.identity, c.expression);
  const RunConfig& cfg = scene.config;
  return render::render_image(positions_tensor(shape), positions_tensor(albedo),
                              scene.model.topology(), segment_tensor(c.pose),
                              segment_tensor(c.lighting), cfg.camera, cfg.image_size,
                              cfg.image_size, mode, cfg.rotation);
}

namespace {

// Shared detail field: random values on the second hierarchy level carried
// to the full mesh, so the refinement networks can represent it.
Positions detail_field(const Scene& scene) {
  std::mt19937_64 rng = derive_rng(scene.config.seed, kDetailStream);
  std::normal_distribution<double> normal;
  const SparseMatrix& up = scene.hierarchy.samplers[0].up;
  Eigen::MatrixXd coarse(up.cols(), 3);
  for (Index i = 0; i < coarse.rows(); ++i) {
    const double luminance = normal(rng);
    for (Index c = 0; c < 3; ++c) coarse(i, c) = luminance + 0.3 * normal(rng);
  }
  Eigen::MatrixXd fine = up.eigen() * coarse;
  fine /= std::sqrt(fine.squaredNorm() / double(fine.size()));
  return Positions(fine);
}

Eigen::VectorXd random_coefficients(const BasisDims& dims, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  CoefficientVector c = CoefficientVector::zeros(dims);
  for (Index i = 0; i < c.identity.size(); ++i) c.identity[i] = normal(rng);
  for (Index i = 0; i < c.expression.size(); ++i) c.expression[i] = 0.5 * normal(rng);
  for (Index i = 0; i < c.texture.size(); ++i) c.texture[i] = normal(rng);
  c.pose << 0.2 * u(rng), 0.35 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.0;
  const double ambient = 0.8 + 0.1 * u(rng);
  const Eigen::Vector3d direction(0.25 * u(rng), 0.25 * u(rng), 0.25 * u(rng));
  for (Index ch = 0; ch < 3; ++ch) {
    double* l = c.lighting.data() + ch * 9;
    l[0] = (ambient + 0.03 * u(rng)) / 0.282095;
    for (int b = 0; b < 3; ++b) l[1 + b] = direction[b] / 0.488603;
    for (int b = 4; b < 9; ++b) l[b] = 0.05 * u(rng);
  }
  return c.flat();
}

}  // namespace

Dataset synth_dataset(const Scene& scene, Index count) {
  if (count < 1) throw ContractViolation("synth_dataset: count must be at least 1");
  std::mt19937_64 rng = derive_rng(scene.config.seed, kDatasetStream);
  std::uniform_real_distribution<double> amplitude(0.5, 1.5);
  const Positions detail = detail_field(scene);
  Dataset out;
  out.reserve(count);
  for (Index i = 0; i < count; ++i) {
    Sample s;
    s.coefficients = random_coefficients(scene.model.dims(), rng);
    const CoefficientVector c = CoefficientVector::from_flat(s.coefficients, scene.model.dims());
    const Positions coarse = texture_from_coeffs(scene.model, c.texture);
    const double a = scene.config.detail_scale * amplitude(rng);
    s.albedo = (coarse + a * detail).cwiseMax(0.0).cwiseMin(1.0);
    const render::RenderOutput r = render_coefficients(scene, s.coefficients, s.albedo);
    s.image = clamp01(r.image);
    s.face_mask = r.buffers.mask;
    out.push_back(std::move(s));
  }
  return out;
}

void write_dataset(std::ostream& os, const Dataset& dataset) {
  binio::Writer w(os);
  w.magic("FGCNDATA");
  w.u32(1);
  const Index h = dataset.empty() ? 0 : dataset[0].image.dim(0);
  const Index wd = dataset.empty() ? 0 : dataset[0].image.dim(1);
  const Index n = dataset.empty() ? 0 : dataset[0].albedo.rows();
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u32(static_cast<std::uint32_t>(h));
  w.u32(static_cast<std::uint32_t>(wd));
  w.u32(static_cast<std::uint32_t>(n));
  for (const Sample& s : dataset) {
    if (s.image.dim(0) != h || s.image.dim(1) != wd || s.albedo.rows() != n ||
        s.coefficients.size() != kCoefficientDims) {
      throw ContractViolation("write_dataset: samples differ in size");
    }
    w.f64s(s.coefficients);
    w.f64s(s.image.values());
    w.f64s(s.face_mask);
    w.f64s(s.albedo.reshaped<Eigen::RowMajor>());
  }
  if (!os) throw std::runtime_error("write_dataset: stream error");
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_dataset: cannot open '" + path + "'");
  write_dataset(os, dataset);
}

Dataset read_dataset(std::istream& is) {
  binio::Reader r(is);
  r.expect_magic("FGCNDATA");
  const std::size_t at = r.offset();
  if (r.u32("version") != 1) throw ParseError("read_dataset: unsupported version", at);
  const Index count = r.u32("count"), h = r.u32("height"), w = r.u32("width"),
              n = r.u32("vertices");
  if (h * w > (Index(1) << 26) || n > (Index(1) << 24)) {
    throw ParseError("read_dataset: implausible sizes", r.offset());
  }
  Dataset out;
  for (Index i = 0; i < count; ++i) {
    Sample s;
    s.coefficients.resize(kCoefficientDims);
    r.f64s(s.coefficients, "coefficients");
    Eigen::VectorXd image(h * w * 3);
    r.f64s(image, "image");
    s.image = Tensor({h, w, 3}, std::move(image));
    s.face_mask.resize(h * w);
    r.f64s(s.face_mask, "face mask");
    Eigen::VectorXd albedo(n * 3);
    r.f64s(albedo, "albedo");
    s.albedo = unvectorize(albedo);
    out.push_back(std::move(s));
  }
  r.expect_end();
  return out;
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_dataset: cannot open '" + path + "'");
  return read_dataset(is);
}

SampleContext prepare_sample(const Scene& scene, const Sample& sample) {
  const RunConfig& cfg = scene.config;
  if (sample.image.dim(0) != cfg.image_size || sample.image.dim(1) != cfg.image_size) {
    throw ConfigError("prepare_sample: image is " + ad::shape_string(sample.image.shape()) +
                      ", config expects " + std::to_string(cfg.image_size) + " pixels square");
  }
  if (sample.albedo.rows() != scene.model.vertex_count()) {
    throw ConfigError("prepare_sample: sample has " + std::to_string(sample.albedo.rows()) +
                      " vertices, model has " + std::to_string(scene.model.vertex_count()));
  }
  ad::NoGradScope no_grad;
  const CoefficientVector c = CoefficientVector::from_flat(sample.coefficients, scene.model.dims());
  SampleContext ctx;
  ctx.shape = positions_tensor(shape_from_coeffs(scene.model, c.identity, c.expression));
  ctx.coarse_texture = positions_tensor(
      texture_from_coeffs(scene.model, c.texture).cwiseMax(0.0).cwiseMin(1.0));
  ctx.pose = segment_tensor(c.pose);
  ctx.lighting = segment_tensor(c.lighting);
  ctx.view = render::prepare_view(ctx.shape, scene.model.topology(), ctx.pose, cfg.camera,
                                  cfg.image_size, cfg.image_size, cfg.rotation);
  const render::ProjectedColors projected = render::project_vertex_colors(
      sample.image, ctx.shape, scene.model.topology(), ctx.pose, cfg.camera, cfg.rotation);
  ctx.projected = positions_tensor(projected.colors);
  ctx.projected_valid = projected.valid;
  ctx.embedding = (*scene.embedder)(sample.image);
  Eigen::VectorXd real = sample.image.values();
  const render::Mask& m = ctx.view.buffers.mask;
  for (Index p = 0; p < m.size(); ++p) real.segment<3>(3 * p) *= m[p];
  ctx.critic_real = Tensor(sample.image.shape(), std::move(real));
  return ctx;
}

Generator Generator::make(const gcn::GcnConfig& config, const MeshHierarchy& hierarchy,
                          std::mt19937_64& rng) {
  Generator g;
  g.decoder = gcn::Decoder::make(config, hierarchy, rng);
  g.refiner = gcn::Refiner::make(config, rng);
  g.combiner = gcn::Combiner::make(config, rng);
  return g;
}

Tensor Generator::forward(const SampleContext& ctx, const MeshHierarchy& hierarchy) const {
  const Tensor decoded = decoder.forward(ctx.embedding, hierarchy);
  const Tensor refined = refiner.forward(ctx.coarse_texture, ctx.projected, hierarchy);
  return gcn::to_albedo(combiner.forward(decoded, refined, hierarchy));
}

gcn::ParameterList Generator::parameters() const {
  gcn::ParameterList out;
  decoder.collect("decoder", out);
  refiner.collect("refiner", out);
  combiner.collect("combiner", out);
  return out;
}

Networks Networks::make(const Scene& scene) {
  std::mt19937_64 rng = derive_rng(scene.config.seed, kInitStream);
  Networks n;
  n.generator = Generator::make(scene.config.network, scene.hierarchy, rng);
  n.critic = gcn::Discriminator::make(scene.config.network, rng);
  return n;
}

gcn::ParameterList Networks::critic_parameters() const {
  gcn::ParameterList out;
  critic.collect("critic", out);
  return out;
}

Adam::Adam(AdamSettings settings, gcn::ParameterList params)
    : settings_(settings), params_(std::move(params)) {
  for (const auto& p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
    v_.push_back(Eigen::VectorXd::Zero(p.tensor.size()));
  }
}

void Adam::step(const ad::GradientMap& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(settings_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(settings_.beta2, double(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].tensor;
    const Eigen::VectorXd g = grads[p].values();
    m_[i] = settings_.beta1 * m_[i] + (1.0 - settings_.beta1) * g;
    v_[i] = settings_.beta2 * v_[i] + (1.0 - settings_.beta2) * g.cwiseAbs2();
    p.mutable_values().array() -=
        settings_.learning_rate * (m_[i].array() / c1) /
        ((v_[i].array() / c2).sqrt() + settings_.epsilon);
  }
}

void Adam::restore(std::uint64_t t, std::vector<Eigen::VectorXd> m,
                   std::vector<Eigen::VectorXd> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ContractViolation("Adam::restore: moment count does not match the parameters");
  }
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

std::string format_log(const StepLog& log) {
  std::ostringstream os;
  os << "step=" << log.step << " sigma1=" << format_value(log.sigmas.s1)
     << " sigma2=" << format_value(log.sigmas.s2) << " sigma3=" << format_value(log.sigmas.s3)
     << " sigma4=" << format_value(log.sigmas.s4) << " pixel=" << format_value(log.pixel)
     << " identity=" << format_value(log.identity)
     << " adversarial=" << format_value(log.adversarial)
     << " vertex_texture=" << format_value(log.vertex_texture)
     << " vertex_projected=" << format_value(log.vertex_projected)
     << " total=" << format_value(log.total) << " critic=" << format_value(log.critic)
     << " penalty=" << format_value(log.penalty);
  return os.str();
}

Trainer::Trainer(const Scene& scene, const Dataset& dataset)
    : scene_(scene), networks_(Networks::make(scene)) {
  if (dataset.empty()) throw ContractViolation("Trainer: empty dataset");
  for (const Sample& s : dataset) {
    contexts_.push_back(prepare_sample(scene, s));
    face_masks_.push_back(s.face_mask);
    images_.push_back(s.image);
  }
  const RunConfig& c = scene.config;
  generator_opt_ = Adam({c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon},
                        networks_.generator.parameters());
  critic_opt_ = Adam({c.critic_learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon},
                     networks_.critic_parameters());
}

std::vector<Index> Trainer::batch_indices(Index step) const {
  const Index n = static_cast<Index>(contexts_.size());
  const Index batch = std::min(scene_.config.batch_size, n);
  const Index per_epoch = (n + batch - 1) / batch;
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng = derive_rng(scene_.config.seed, kBatchStream, step / per_epoch);
  std::shuffle(order.begin(), order.end(), rng);
  const Index begin = (step % per_epoch) * batch;
  return {order.begin() + begin, order.begin() + std::min(n, begin + batch)};
}

std::vector<Index> Trainer::critic_batch(Index step, Index round) const {
  const Index n = static_cast<Index>(contexts_.size());
  std::mt19937_64 rng = derive_rng(scene_.config.seed, kCriticBatchStream,
                                   static_cast<std::uint64_t>(step) * 64 + round);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> out(std::min(scene_.config.batch_size, n));
  for (Index& i : out) i = pick(rng);
  return out;
}

Tensor Trainer::fake_image(Index sample) const {
  const SampleContext& ctx = contexts_[sample];
  const Tensor albedo = networks_.generator.forward(ctx, scene_.hierarchy);
  return render::shade_view(ctx.view, albedo, ctx.lighting).image;
}

StepLog Trainer::step() {
  const RunConfig& cfg = scene_.config;
  const Index k = step_;
  StepLog log;
  log.step = k;
  log.sigmas = cfg.weights.at(k);
  const losses::EmbeddingFn embed = scene_.embed();
  const auto critic_fn = [this](const Tensor& x) { return networks_.critic.forward(x); };

  const bool adversarial_active =
      cfg.use_adversarial && cfg.critic_steps > 0 && log.sigmas.s1 * log.sigmas.s3 > 0.0;
  if (adversarial_active) {
    std::map<Index, Tensor> fakes;
    {
      ad::NoGradScope no_grad;
      for (Index r = 0; r < cfg.critic_steps; ++r) {
        for (Index i : critic_batch(k, r)) {
          if (!fakes.count(i)) fakes.emplace(i, fake_image(i));
        }
      }
    }
    const gcn::ParameterList& params = critic_opt_.parameters();
    for (Index r = 0; r < cfg.critic_steps; ++r) {
      std::vector<Tensor> real, fake;
      for (Index i : critic_batch(k, r)) {
        real.push_back(contexts_[i].critic_real);
        fake.push_back(fakes.at(i));
      }
      std::mt19937_64 rng = derive_rng(cfg.seed, kPenaltyStream,
                                       static_cast<std::uint64_t>(k) * 64 + r);
      ad::Tape tape;
      losses::AdversarialTerms terms;
      {
        ad::TapeScope scope(tape);
        terms = losses::adversarial_loss(critic_fn, real, fake, cfg.lambda_gp, rng);
      }
      log.critic = terms.critic_loss.item();
      log.penalty = terms.penalty.item();
      if (!std::isfinite(*log.critic)) {
        dump(log);
        throw NumericalError("train: non-finite critic loss at step " + std::to_string(k));
      }
      ad::BackwardOptions options;
      for (const auto& p : params) options.inputs.push_back(p.tensor);
      critic_opt_.step(ad::backward(tape, terms.critic_loss, options));
    }
  }

  const std::vector<Index> batch = batch_indices(k);
  const double inv = 1.0 / static_cast<double>(batch.size());
  ad::Tape tape;
  Tensor total;
  losses::LossTerms sums;
  {
    ad::TapeScope scope(tape);
    const auto accumulate = [](Tensor& acc, const Tensor& t) {
      acc = acc.defined() ? ad::add(acc, t) : t;
    };
    for (Index i : batch) {
      const SampleContext& ctx = contexts_[i];
      const Tensor refined = networks_.generator.forward(ctx, scene_.hierarchy);
      if (cfg.use_pixel || cfg.use_identity || cfg.use_adversarial) {
        const Tensor rendered = render::shade_view(ctx.view, refined, ctx.lighting).image;
        if (cfg.use_pixel) {
          accumulate(sums.pixel, losses::pixel_loss(images_[i], rendered, face_masks_[i],
                                                    ctx.view.buffers.mask));
        }
        if (cfg.use_identity) {
          accumulate(sums.identity, losses::identity_loss(images_[i], rendered, embed));
        }
        if (cfg.use_adversarial) accumulate(sums.adversarial, ad::neg(critic_fn(rendered)));
      }
      if (cfg.use_vertex) {
        accumulate(sums.vertex_texture, losses::vertex_loss(ctx.coarse_texture, refined));
        const Tensor illuminated =
            render::sh_shade(refined, ctx.view.vertex_normals, ctx.lighting);
        accumulate(sums.vertex_projected,
                   losses::vertex_loss(ctx.projected, illuminated, ctx.projected_valid));
      }
    }
    for (Tensor* t : {&sums.pixel, &sums.identity, &sums.adversarial, &sums.vertex_texture,
                      &sums.vertex_projected}) {
      if (t->defined()) *t = ad::scale(*t, inv);
    }
    total = losses::total_loss(sums, cfg.weights, k);
  }
  const auto value = [](const Tensor& t) -> std::optional<double> {
    if (!t.defined()) return std::nullopt;
    return t.item();
  };
  log.pixel = value(sums.pixel);
  log.identity = value(sums.identity);
  log.adversarial = value(sums.adversarial);
  log.vertex_texture = value(sums.vertex_texture);
  log.vertex_projected = value(sums.vertex_projected);
  log.total = total.item();
  if (!std::isfinite(log.total)) {
    dump(log);
    throw NumericalError("train: non-finite loss at step " + std::to_string(k) +
                         (dump_path_.empty() ? "" : "; dump written to " + dump_path_));
  }
  ad::BackwardOptions options;
  for (const auto& p : generator_opt_.parameters()) options.inputs.push_back(p.tensor);
  generator_opt_.step(ad::backward(tape, total, options));
  ++step_;
  return log;
}

void Trainer::dump(const StepLog& log) const {
  if (dump_path_.empty()) return;
  std::ofstream os(dump_path_);
  os << "# non-finite loss dump\n" << format_log(log) << '\n';
  const auto write_group = [&os](const gcn::ParameterList& params) {
    for (const auto& p : params) {
      const Eigen::VectorXd& v = p.tensor.values();
      const Index bad = (v.array() != v.array() || v.array().abs() == INFINITY).count();
      os << "param name=" << p.name << " shape=" << ad::shape_string(p.tensor.shape())
         << " norm=" << format_value(v.norm()) << " nonfinite=" << bad << '\n';
    }
  };
  write_group(generator_opt_.parameters());
  write_group(critic_opt_.parameters());
}

namespace {

constexpr std::string_view kCheckpointMagic = "FGCNCKPT";

void write_group(binio::Writer& w, const Adam& opt) {
  w.u64(opt.steps());
  w.u32(static_cast<std::uint32_t>(opt.parameters().size()));
  for (std::size_t i = 0; i < opt.parameters().size(); ++i) {
    const auto& p = opt.parameters()[i];
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (Index d : p.tensor.shape()) w.u64(static_cast<std::uint64_t>(d));
    w.f64s(p.tensor.values());
    w.f64s(opt.first_moments()[i]);
    w.f64s(opt.second_moments()[i]);
  }
}

struct GroupData {
  std::uint64_t steps = 0;
  std::vector<Eigen::VectorXd> values, m, v;
};

GroupData read_group(binio::Reader& r, const gcn::ParameterList& expected, const char* group) {
  GroupData g;
  g.steps = r.u64("optimizer steps");
  const std::uint32_t count = r.u32("parameter count");
  if (count != expected.size()) {
    throw ConfigError(std::string("checkpoint: ") + group + " has " + std::to_string(count) +
                      " parameters, config builds " + std::to_string(expected.size()));
  }
  for (const auto& p : expected) {
    const std::string name = r.str("parameter name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw ParseError("checkpoint: implausible rank", r.offset());
    ad::Shape shape(rank);
    for (auto& d : shape) d = static_cast<Index>(r.u64("dimension"));
    if (name != p.name || shape != p.tensor.shape()) {
      throw ConfigError("checkpoint: parameter " + name + " " + ad::shape_string(shape) +
                        " does not match " + p.name + " " + ad::shape_string(p.tensor.shape()));
    }
    Eigen::VectorXd values(p.tensor.size()), m(p.tensor.size()), v(p.tensor.size());
    r.f64s(values, "values");
    r.f64s(m, "first moment");
    r.f64s(v, "second moment");
    g.values.push_back(std::move(values));
    g.m.push_back(std::move(m));
    g.v.push_back(std::move(v));
  }
  return g;
}

struct CheckpointData {
  Index step = 0;
  GroupData generator, critic;
};

CheckpointData read_checkpoint(std::istream& is, const Scene& scene,
                               const gcn::ParameterList& generator,
                               const gcn::ParameterList& critic) {
  binio::Reader r(is);
  r.expect_magic(kCheckpointMagic);
  const std::size_t at = r.offset();
  if (r.u32("version") != 1) throw ParseError("checkpoint: unsupported version", at);
  CheckpointData d;
  d.step = static_cast<Index>(r.u64("step"));
  const std::uint32_t levels = r.u32("levels");
  std::vector<Index> sizes(levels);
  for (Index& s : sizes) s = static_cast<Index>(r.u64("level size"));
  std::vector<Index> expected;
  for (const auto& t : scene.hierarchy.topologies) expected.push_back(t.vertex_count());
  if (sizes != expected) {
    const auto list = [](const std::vector<Index>& v) {
      std::string s;
      for (Index x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
      return s;
    };
    throw ConfigError("checkpoint: hierarchy vertex counts " + list(sizes) +
                      " do not match the model hierarchy " + list(expected));
  }
  d.generator = read_group(r, generator, "generator");
  d.critic = read_group(r, critic, "critic");
  r.expect_end();
  return d;
}

void assign(const gcn::ParameterList& params, const std::vector<Eigen::VectorXd>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    t.mutable_values() = values[i];
  }
}

}  // namespace

void Trainer::save(std::ostream& os) const {
  binio::Writer w(os);
  w.magic(kCheckpointMagic);
  w.u32(1);
  w.u64(static_cast<std::uint64_t>(step_));
  w.u32(static_cast<std::uint32_t>(scene_.hierarchy.levels()));
  for (const auto& t : scene_.hierarchy.topologies) w.u64(static_cast<std::uint64_t>(t.vertex_count()));
  write_group(w, generator_opt_);
  write_group(w, critic_opt_);
  if (!os) throw std::runtime_error("checkpoint: stream error");
}

void Trainer::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  save(os);
}

void Trainer::load(std::istream& is) {
  CheckpointData d =
      read_checkpoint(is, scene_, generator_opt_.parameters(), critic_opt_.parameters());
  assign(generator_opt_.parameters(), d.generator.values);
  assign(critic_opt_.parameters(), d.critic.values);
  generator_opt_.restore(d.generator.steps, std::move(d.generator.m), std::move(d.generator.v));
  critic_opt_.restore(d.critic.steps, std::move(d.critic.m), std::move(d.critic.v));
  step_ = d.step;
}

void Trainer::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  load(is);
}

TrainResult train(Trainer& trainer, Index steps, std::ostream* log) {
  TrainResult result;
  for (Index i = 0; i < steps; ++i) {
    result.logs.push_back(trainer.step());
    if (log) *log << format_log(result.logs.back()) << '\n';
  }
  return result;
}

Networks load_networks(const Scene& scene, const std::string& checkpoint_path) {
  std::ifstream is(checkpoint_path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + checkpoint_path + "'");
  Networks n = Networks::make(scene);
  const gcn::ParameterList generator = n.generator.parameters();
  const gcn::ParameterList critic = n.critic_parameters();
  const CheckpointData d = read_checkpoint(is, scene, generator, critic);
  assign(generator, d.generator.values);
  assign(critic, d.critic.values);
  return n;
}

InferResult infer(const Scene& scene, const Networks& networks, const Sample& sample) {
  const SampleContext ctx = prepare_sample(scene, sample);
  ad::NoGradScope no_grad;
  InferResult r;
  r.coarse_texture = ctx.coarse_texture;
  r.refined_texture = networks.generator.forward(ctx, scene.hierarchy);
  r.coarse_image = render::shade_view(ctx.view, r.coarse_texture, ctx.lighting).image;
  r.fine_image = render::shade_view(ctx.view, r.refined_texture, ctx.lighting).image;
  r.albedo_image = render::shade_view(ctx.view, r.refined_texture, ctx.lighting,
                                      render::ShadeMode::kAlbedoOnly)
                       .image;
  r.projected_mask = ctx.view.buffers.mask;
  return r;
}

void write_infer_outputs(const std::string& directory, const Scene& scene, const Sample& sample,
                         const InferResult& result) {
  std::filesystem::create_directories(directory);
  const CoefficientVector c = CoefficientVector::from_flat(sample.coefficients, scene.model.dims());
  const Positions shape = shape_from_coeffs(scene.model, c.identity, c.expression);
  const auto& tris = scene.model.topology().triangles();
  const Positions coarse = tensor_positions(result.coarse_texture);
  const Positions refined = tensor_positions(result.refined_texture);
  write_obj(directory + "/coarse.obj", shape, tris, &coarse);
  write_obj(directory + "/refined.obj", shape, tris, &refined);
  write_png(directory + "/input.png", sample.image);
  write_png(directory + "/render_coarse.png", result.coarse_image);
  write_png(directory + "/render_fine.png", result.fine_image);
  write_png(directory + "/render_albedo.png", result.albedo_image);
  const Index size = scene.config.image_size;
  write_mask_png(directory + "/mask_proj.png", result.projected_mask, size, size);
}

losses::Metrics MetricReport::mean(const std::string& texture) const {
  losses::Metrics m;
  Index count = 0;
  for (const MetricRecord& r : records) {
    if (r.texture != texture) continue;
    m.l1 += r.metrics.l1;
    m.psnr += r.metrics.psnr;
    m.ssim += r.metrics.ssim;
    m.cosine += r.metrics.cosine;
    ++count;
  }
  if (count > 0) {
    m.l1 /= double(count);
    m.psnr /= double(count);
    m.ssim /= double(count);
    m.cosine /= double(count);
  }
  return m;
}

MetricReport evaluate(const Scene& scene, const Networks& networks, const Dataset& dataset) {
  MetricReport report;
  const losses::EmbeddingFn embed = scene.embed();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const InferResult r = infer(scene, networks, dataset[i]);
    const render::Mask region = r.projected_mask.cwiseProduct(dataset[i].face_mask);
    const Tensor input = clamp01(dataset[i].image);
    report.records.push_back({Index(i), "fine",
                              losses::compute_metrics(input, clamp01(r.fine_image), region, embed)});
    report.records.push_back(
        {Index(i), "coarse", losses::compute_metrics(input, clamp01(r.coarse_image), region, embed)});
  }
  return report;
}

void write_report(std::ostream& os, const MetricReport& report) {
  const auto fields = [](const losses::Metrics& m) {
    return "l1=" + format_metric(m.l1) + " psnr=" + format_metric(m.psnr) +
           " ssim=" + format_metric(m.ssim) + " cosine=" + format_metric(m.cosine);
  };
  os << "# facegcn metric report v1\n"
     << "# metrics over the projected face region; psnr of identical regions is "
     << format_metric(losses::kPsnrIdentical) << "\n";
  for (const MetricRecord& r : report.records) {
    os << "record=sample index=" << r.sample << " texture=" << r.texture << ' '
       << fields(r.metrics) << '\n';
  }
  for (const char* texture : {"fine", "coarse"}) {
    os << "record=mean texture=" << texture << ' ' << fields(report.mean(texture)) << '\n';
  }
  os << "record=reference texture=published l1=0.034 psnr=29.69 ssim=0.894 lightcnn=0.900 "
        "evolve=0.848 reproducible=false\n";
}

}  // namespace facegcn::pipeline
