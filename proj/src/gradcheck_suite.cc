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

#include "facegcn/gradcheck_suite.h"

#include <cstdio>
#include <exception>
#include <memory>
#include <ostream>
#include <random>

#include "facegcn/losses.h"
#include "facegcn/mesh.h"
#include "facegcn/ops.h"
#include "facegcn/render.h"
#include "facegcn/sampling.h"

namespace facegcn {

using ad::GradCheckResult;
using ad::Tensor;

namespace {

struct Fixture {
  TriangleMesh sphere;
  MeshHierarchy hierarchy;
  gcn::GcnConfig config;
};

std::shared_ptr<const Fixture> make_fixture() {
  auto f = std::make_shared<Fixture>();
  f->sphere = make_icosphere(2);
  f->hierarchy = build_hierarchy(f->sphere.topology, f->sphere.positions, 3, 0.25);
  f->config.cheb_order = 3;
  f->config.embedding_dim = 6;
  f->config.decoder_widths = {4, 3, 3};
  f->config.refiner_width = 3;
  f->config.refiner_blocks = 1;
  f->config.critic_channels = {2, 3};
  return f;
}

Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(ad::shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return Tensor(std::move(shape), std::move(v));
}

// Contracts a tensor with fixed random weights so no output entry cancels.
Tensor probe(const Tensor& out, const Tensor& weights) { return ad::sum(ad::mul(out, weights)); }

GradCheckResult worst(std::initializer_list<GradCheckResult> results) {
  GradCheckResult out;
  for (const GradCheckResult& r : results) {
    if (r.max_rel_error >= out.max_rel_error) {
      out.max_rel_error = r.max_rel_error;
      out.worst_coordinate = r.worst_coordinate;
    }
    out.checked += r.checked;
  }
  return out;
}

Tensor sphere_tensor(const Positions& p) {
  return Tensor({p.rows(), 3}, Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
}

Tensor face_lighting(std::mt19937_64& rng) {
  Tensor l = random_tensor(rng, {27}, -0.3, 0.3);
  for (int c = 0; c < 3; ++c) l.mutable_values()[c * 9] += 3.0;
  return l;
}

}  // namespace

std::vector<GradcheckComponent> gradcheck_components(const GradcheckSuiteOptions& options) {
  const auto fx = make_fixture();
  const std::uint64_t seed = options.seed;
  const ChebConvFn conv = options.cheb_conv;
  std::vector<GradcheckComponent> out;

  out.push_back({"diffcore", 1e-4, [seed] {
    std::mt19937_64 rng(seed);
    const Tensor w = random_tensor(rng, {3, 3, 2, 3});
    const Tensor b = random_tensor(rng, {3});
    const Tensor probe_w = random_tensor(rng, {4, 4, 3});
    const auto f = [&](const Tensor& x) {
      const Tensor y = ad::maxpool2d(ad::biased_relu(ad::conv2d(x, w), b));
      return ad::add(probe(y, probe_w), ad::sum(ad::pow(ad::tanh(x), 2.0)));
    };
    const auto g = [&](const Tensor& x) {
      return ad::norm(ad::matmul(ad::transpose(x), ad::sin(x)));
    };
    return worst({ad::grad_check(f, random_tensor(rng, {8, 8, 2})),
                  ad::grad_check(g, random_tensor(rng, {5, 3}))});
  }});

  out.push_back({"cheb_conv", 1e-4, [fx, seed, conv] {
    std::mt19937_64 rng(seed + 1);
    const SparseMatrix& lap = fx->hierarchy.laplacians[1].scaled;
    const Index n = lap.rows();
    const gcn::ChebLayer layer = gcn::ChebLayer::make(4, 3, 2, rng);
    const Tensor x0 = random_tensor(rng, {n, 3});
    const Tensor pw = random_tensor(rng, {n, 2});
    const auto wrt_x = [&](const Tensor& x) { return probe(conv(layer, lap, x), pw); };
    const auto wrt_theta = [&](const Tensor& theta) {
      gcn::ChebLayer l = layer;
      l.theta = theta;
      return probe(conv(l, lap, x0), pw);
    };
    return worst({ad::grad_check(wrt_x, x0), ad::grad_check(wrt_theta, layer.theta)});
  }});

  out.push_back({"residual_block", 1e-4, [fx, seed] {
    std::mt19937_64 rng(seed + 2);
    const SparseMatrix& lap = fx->hierarchy.laplacians[1].scaled;
    const Index n = lap.rows();
    const gcn::ResidualBlock block = gcn::ResidualBlock::make(3, 3, 4, rng);
    const Tensor x0 = random_tensor(rng, {n, 3});
    const Tensor pw = random_tensor(rng, {n, 4});
    const auto wrt_x = [&](const Tensor& x) { return probe(gcn::residual_block(block, lap, x), pw); };
    const auto wrt_theta = [&](const Tensor& theta) {
      gcn::ResidualBlock b = block;
      b.conv1.theta = theta;
      return probe(gcn::residual_block(b, lap, x0), pw);
    };
    return worst({ad::grad_check(wrt_x, x0), ad::grad_check(wrt_theta, block.conv1.theta)});
  }});

  out.push_back({"decoder", 1e-4, [fx, seed] {
    std::mt19937_64 rng(seed + 3);
    const gcn::Decoder dec = gcn::Decoder::make(fx->config, fx->hierarchy, rng);
    const Tensor e0 = random_tensor(rng, {fx->config.embedding_dim});
    const Tensor pw = random_tensor(rng, {fx->sphere.positions.rows(), 3});
    const auto wrt_e = [&](const Tensor& e) { return probe(dec.forward(e, fx->hierarchy), pw); };
    const auto wrt_out = [&](const Tensor& theta) {
      gcn::Decoder d = dec;
      d.output.theta = theta;
      return probe(d.forward(e0, fx->hierarchy), pw);
    };
    return worst({ad::grad_check(wrt_e, e0), ad::grad_check(wrt_out, dec.output.theta)});
  }});

  out.push_back({"refiner", 1e-4, [fx, seed] {
    std::mt19937_64 rng(seed + 4);
    const gcn::Refiner ref = gcn::Refiner::make(fx->config, rng);
    const Index n = fx->sphere.positions.rows();
    const Tensor t0 = random_tensor(rng, {n, 3}, 0, 1);
    const Tensor tp = random_tensor(rng, {n, 3}, 0, 1);
    const Tensor pw = random_tensor(rng, {n, fx->config.refiner_width});
    const auto wrt_t = [&](const Tensor& t) { return probe(ref.forward(t, tp, fx->hierarchy), pw); };
    const auto wrt_theta = [&](const Tensor& theta) {
      gcn::Refiner r = ref;
      r.blocks[0].conv2.theta = theta;
      return probe(r.forward(t0, tp, fx->hierarchy), pw);
    };
    return worst({ad::grad_check(wrt_t, t0, 1e-5, 96),
                  ad::grad_check(wrt_theta, ref.blocks[0].conv2.theta)});
  }});

  out.push_back({"combiner", 1e-4, [fx, seed] {
    std::mt19937_64 rng(seed + 5);
    const gcn::Combiner comb = gcn::Combiner::make(fx->config, rng);
    const Index n = fx->sphere.positions.rows();
    const Tensor d0 = random_tensor(rng, {n, 3});
    const Tensor r0 = random_tensor(rng, {n, fx->config.refiner_width});
    const Tensor pw = random_tensor(rng, {n, 3});
    const auto wrt_d = [&](const Tensor& d) { return probe(comb.forward(d, r0, fx->hierarchy), pw); };
    const auto wrt_theta = [&](const Tensor& theta) {
      gcn::Combiner c = comb;
      c.conv.theta = theta;
      return probe(gcn::to_albedo(c.forward(d0, r0, fx->hierarchy)), pw);
    };
    return worst({ad::grad_check(wrt_d, d0, 1e-5, 96), ad::grad_check(wrt_theta, comb.conv.theta)});
  }});

  out.push_back({"discriminator", 1e-4, [fx, seed] {
    std::mt19937_64 rng(seed + 6);
    const gcn::Discriminator disc = gcn::Discriminator::make(fx->config, rng);
    const Tensor x0 = random_tensor(rng, {8, 8, 3}, 0, 1);
    const auto wrt_x = [&](const Tensor& x) { return disc.forward(x); };
    const auto wrt_w = [&](const Tensor& w) {
      gcn::Discriminator d = disc;
      d.conv_weights[0] = w;
      return d.forward(x0);
    };
    return worst({ad::grad_check(wrt_x, x0), ad::grad_check(wrt_w, disc.conv_weights[0])});
  }});

  // Renderer rows share one 16 x 16 view of the unit sphere.
  struct RenderSetup {
    Tensor shape, pose, lighting, albedo, weights;
    render::PreparedView view;
  };
  const auto render_setup = [fx](std::uint64_t s) {
    std::mt19937_64 rng(s);
    RenderSetup r;
    r.shape = sphere_tensor(fx->sphere.positions);
    r.pose = Tensor::vector({0.1, -0.2, 0.05, 0.02, -0.01, 0.1});
    r.lighting = face_lighting(rng);
    r.albedo = random_tensor(rng, {r.shape.dim(0), 3}, 0.2, 0.9);
    r.weights = random_tensor(rng, {16, 16, 3});
    r.view = render::prepare_view(r.shape, fx->sphere.topology, r.pose, render::Camera{}, 16, 16);
    return r;
  };

  out.push_back({"render_texture", 1e-4, [render_setup, seed] {
    const RenderSetup r = render_setup(seed + 7);
    const auto f = [&](const Tensor& t) {
      return probe(render::shade_view(r.view, t, r.lighting).image, r.weights);
    };
    return ad::grad_check(f, r.albedo, 1e-5, 120);
  }});

  out.push_back({"render_lighting", 1e-4, [render_setup, seed] {
    const RenderSetup r = render_setup(seed + 8);
    const auto f = [&](const Tensor& l) {
      return probe(render::shade_view(r.view, r.albedo, l).image, r.weights);
    };
    return ad::grad_check(f, r.lighting);
  }});

  out.push_back({"render_pose", 1e-4, [fx, render_setup, seed] {
    const RenderSetup r = render_setup(seed + 9);
    const auto f = [&](const Tensor& pose) {
      const render::PreparedView v =
          render::repose_view(r.view, r.shape, fx->sphere.topology, pose, render::Camera{});
      return probe(render::shade_view(v, r.albedo, r.lighting).image, r.weights);
    };
    return ad::grad_check(f, r.pose);
  }});

  out.push_back({"pixel_loss", 1e-4, [seed] {
    std::mt19937_64 rng(seed + 10);
    const Tensor target = random_tensor(rng, {6, 6, 3}, 0, 1);
    render::Mask face = render::Mask::Ones(36), proj = render::Mask::Ones(36);
    face[4] = 0.0;
    proj[20] = 0.0;
    const auto f = [&](const Tensor& x) { return losses::pixel_loss(x, target, face, proj); };
    return ad::grad_check(f, random_tensor(rng, {6, 6, 3}, 0, 1));
  }});

  out.push_back({"identity_loss", 1e-4, [seed] {
    std::mt19937_64 rng(seed + 11);
    const losses::ToyEmbedder embed(8, 8, 8, seed);
    const Tensor target = random_tensor(rng, {8, 8, 3}, 0, 1);
    const auto f = [&](const Tensor& x) { return losses::identity_loss(x, target, embed); };
    return ad::grad_check(f, random_tensor(rng, {8, 8, 3}, 0, 1));
  }});

  out.push_back({"vertex_loss", 1e-4, [seed] {
    std::mt19937_64 rng(seed + 12);
    const Tensor target = random_tensor(rng, {12, 3});
    std::vector<bool> valid(12, true);
    valid[3] = valid[8] = false;
    const auto f = [&](const Tensor& x) { return losses::vertex_loss(x, target); };
    const auto g = [&](const Tensor& x) { return losses::vertex_loss(x, target, valid); };
    const Tensor x0 = random_tensor(rng, {12, 3});
    return worst({ad::grad_check(f, x0), ad::grad_check(g, x0)});
  }});

  out.push_back({"adversarial_loss", 1e-4, [fx, seed] {
    std::mt19937_64 rng(seed + 13);
    const gcn::Discriminator disc = gcn::Discriminator::make(fx->config, rng);
    std::vector<Tensor> real, fake;
    for (int i = 0; i < 2; ++i) {
      real.push_back(random_tensor(rng, {8, 8, 3}, 0, 1));
      fake.push_back(random_tensor(rng, {8, 8, 3}, 0, 1));
    }
    const auto critic_loss = [&](const gcn::Discriminator& d) {
      std::mt19937_64 local(seed + 99);
      const auto fn = [&d](const Tensor& x) { return d.forward(x); };
      return losses::adversarial_loss(fn, real, fake, 10.0, local).critic_loss;
    };
    const auto wrt_dense = [&](const Tensor& w) {
      gcn::Discriminator d = disc;
      d.dense_weight = w;
      return critic_loss(d);
    };
    const auto wrt_conv = [&](const Tensor& w) {
      gcn::Discriminator d = disc;
      d.conv_weights[1] = w;
      return critic_loss(d);
    };
    const auto wrt_fake = [&](const Tensor& x) {
      const auto fn = [&disc](const Tensor& img) { return disc.forward(img); };
      std::mt19937_64 local(seed + 98);
      const Tensor batch[] = {x};
      return losses::adversarial_loss(fn, std::span(real).first(1), batch, 10.0, local)
          .generator_loss;
    };
    return worst({ad::grad_check(wrt_dense, disc.dense_weight),
                  ad::grad_check(wrt_conv, disc.conv_weights[1]),
                  ad::grad_check(wrt_fake, fake[0])});
  }});

  out.push_back({"total_loss", 1e-4, [fx, render_setup, seed] {
    RenderSetup r = render_setup(seed + 14);
    std::mt19937_64 rng(seed + 15);
    const losses::ToyEmbedder embed(8, 16, 16, seed);
    const gcn::Discriminator disc = gcn::Discriminator::make(fx->config, rng);
    const Tensor image = random_tensor(rng, {16, 16, 3}, 0, 1);
    const Tensor coarse = random_tensor(rng, {r.shape.dim(0), 3}, 0.2, 0.9);
    const Tensor projected = random_tensor(rng, {r.shape.dim(0), 3}, 0.2, 0.9);
    std::vector<bool> valid(r.shape.dim(0), true);
    for (std::size_t i = 0; i < valid.size(); i += 3) valid[i] = false;
    const render::Mask face = render::Mask::Ones(256);
    losses::LossWeights weights;
    weights.hold_steps = 2;
    weights.warmup_steps = 4;
    const auto f = [&](const Tensor& t) {
      const Tensor rendered = render::shade_view(r.view, t, r.lighting).image;
      losses::LossTerms terms;
      terms.pixel = losses::pixel_loss(image, rendered, face, r.view.buffers.mask);
      terms.identity = losses::identity_loss(image, rendered, embed);
      terms.adversarial = ad::neg(disc.forward(rendered));
      terms.vertex_texture = losses::vertex_loss(coarse, t);
      terms.vertex_projected = losses::vertex_loss(
          projected, render::sh_shade(t, r.view.vertex_normals, r.lighting), valid);
      return losses::total_loss(terms, weights, 4);
    };
    return ad::grad_check(f, r.albedo, 1e-5, 120);
  }});

  return out;
}

std::vector<GradcheckRow> run_gradcheck_suite(const std::vector<GradcheckComponent>& components) {
  std::vector<GradcheckRow> rows;
  for (const GradcheckComponent& c : components) {
    GradcheckRow row;
    row.name = c.name;
    row.threshold = c.threshold;
    try {
      const GradCheckResult r = c.run();
      row.max_rel_error = r.max_rel_error;
      row.checked = r.checked;
      row.passed = r.checked > 0 && r.max_rel_error <= c.threshold;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.passed = false;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

bool all_passed(const std::vector<GradcheckRow>& rows) {
  for (const GradcheckRow& r : rows) {
    if (!r.passed) return false;
  }
  return !rows.empty();
}

void write_gradcheck_report(std::ostream& os, const std::vector<GradcheckRow>& rows) {
  char buf[64];
  for (const GradcheckRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.3e", r.max_rel_error);
    os << "component=" << r.name << " max_rel_error=" << buf;
    std::snprintf(buf, sizeof(buf), "%.0e", r.threshold);
    os << " threshold=" << buf << " checked=" << r.checked
       << " status=" << (r.passed ? "pass" : "fail");
    if (!r.error.empty()) os << " error=\"" << r.error << '"';
    os << '\n';
  }
  os << "summary=" << (all_passed(rows) ? "pass" : "fail") << " components=" << rows.size()
     << '\n';
}

}  // namespace facegcn
