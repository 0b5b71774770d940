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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>

#include "facegcn/config.h"
#include "facegcn/errors.h"
#include "facegcn/gradcheck_suite.h"
#include "facegcn/ops.h"
#include "facegcn/pipeline.h"
#include "facegcn/png_io.h"

namespace facegcn::pipeline {
namespace {

using ad::Tensor;
namespace fs = std::filesystem;

RunConfig small_config() {
  RunConfig c;
  c.vertices = 162;
  c.levels = 3;
  c.network.cheb_order = 3;
  c.network.embedding_dim = 16;
  c.network.decoder_widths = {8, 8, 4};
  c.network.refiner_width = 8;
  c.network.refiner_blocks = 1;
  c.network.critic_channels = {4, 8};
  c.image_size = 32;
  c.dataset_size = 4;
  c.batch_size = 2;
  c.weights.hold_steps = 2;
  c.weights.warmup_steps = 2;
  c.critic_steps = 2;
  c.steps = 6;
  return c;
}

const Scene& small_scene() {
  static const Scene s = make_scene(small_config());
  return s;
}

const Dataset& small_dataset() {
  static const Dataset d = synth_dataset(small_scene(), 4);
  return d;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("facegcn_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string checkpoint_bytes(const Trainer& t) {
  std::ostringstream os;
  t.save(os);
  return os.str();
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig c;
  std::istringstream in(config_string(c));
  const RunConfig back = parse_config(in);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(config_string(back), config_string(c));
  EXPECT_EQ(c.vertices, 642);
  EXPECT_EQ(c.image_size, 64);
  EXPECT_EQ(c.batch_size, 4);
  EXPECT_EQ(c.weights.sigma2, 0.2);
  EXPECT_EQ(c.weights.sigma3, 0.001);
  EXPECT_EQ(c.lambda_gp, 10.0);
  EXPECT_EQ(c.critic_steps, 5);
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.adam_beta1, 0.0);
  EXPECT_EQ(c.adam_beta2, 0.9);
}

TEST(Config, NonDefaultValuesRoundTripExactly) {
  RunConfig c = small_config();
  c.seed = 18446744073709551615ULL;
  c.learning_rate = 0.1 + 0.2;
  c.camera.focal = 1.0 / 3.0;
  c.rotation = render::RotationMode::kAxisAngle;
  c.use_adversarial = false;
  c.model = "models/face.bin";
  std::istringstream in(config_string(c));
  const RunConfig back = parse_config(in);
  EXPECT_TRUE(back == c);
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.camera.focal, c.camera.focal);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_FALSE(back.use_adversarial);
}

TEST(Config, CommentsAndWhitespace) {
  std::istringstream in("# run\n  seed = 7   # trailing\n\nlosses = pixel , vertex\n");
  const RunConfig c = parse_config(in);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_TRUE(c.use_pixel);
  EXPECT_TRUE(c.use_vertex);
  EXPECT_FALSE(c.use_identity);
  EXPECT_FALSE(c.use_adversarial);
}

TEST(Config, RejectsBadInput) {
  const auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
  };
  EXPECT_THROW(parse("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse("seed = -1\n"), ConfigError);
  EXPECT_THROW(parse("learning_rate = fast\n"), ConfigError);
  EXPECT_THROW(parse("just a line\n"), ConfigError);
  EXPECT_THROW(parse("rotation = quaternion\n"), ConfigError);
  EXPECT_THROW(parse("losses = pixel,style\n"), ConfigError);
  EXPECT_THROW(parse("levels = 3\n"), ConfigError);  // four decoder widths
  EXPECT_THROW(parse("image_size = 48\n"), ConfigError);  // not divisible by 2^6
  EXPECT_THROW(parse("level_fraction = 1.5\n"), ConfigError);
  try {
    parse("warmup_steps = soon\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("warmup_steps"), std::string::npos);
  }
}

TEST(DeriveRng, DeterministicAndStreamSeparated) {
  EXPECT_EQ(derive_rng(5, 1, 2)(), derive_rng(5, 1, 2)());
  EXPECT_NE(derive_rng(5, 1, 2)(), derive_rng(5, 1, 3)());
  EXPECT_NE(derive_rng(5, 1, 2)(), derive_rng(5, 2, 2)());
  EXPECT_NE(derive_rng(5, 1, 2)(), derive_rng(6, 1, 2)());
}

TEST(SynthDataset, SameSeedSameData) {
  const Dataset again = synth_dataset(make_scene(small_config()), 4);
  ASSERT_EQ(again.size(), small_dataset().size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].image.values(), small_dataset()[i].image.values());
    EXPECT_EQ(again[i].coefficients, small_dataset()[i].coefficients);
    EXPECT_EQ(again[i].albedo, small_dataset()[i].albedo);
  }
  RunConfig other = small_config();
  other.seed = 2;
  EXPECT_NE(synth_dataset(make_scene(other), 1)[0].coefficients, small_dataset()[0].coefficients);
}

TEST(SynthDataset, SamplesAreWellFormed) {
  for (const Sample& s : small_dataset()) {
    EXPECT_EQ(s.coefficients.size(), 257);
    EXPECT_EQ(s.image.shape(), (ad::Shape{32, 32, 3}));
    EXPECT_GE(s.image.values().minCoeff(), 0.0);
    EXPECT_LE(s.image.values().maxCoeff(), 1.0);
    EXPECT_GT(s.face_mask.sum(), 50.0);
    EXPECT_EQ(s.albedo.rows(), 162);
  }
  EXPECT_THROW(synth_dataset(small_scene(), 0), ContractViolation);
}

TEST(SynthDataset, DetailSeparatesTruthFromCoarseRender) {
  for (const Sample& s : small_dataset()) {
    const CoefficientVector c = CoefficientVector::from_flat(s.coefficients);
    const Positions coarse =
        texture_from_coeffs(small_scene().model, c.texture).cwiseMax(0.0).cwiseMin(1.0);
    const Tensor coarse_image = render_coefficients(small_scene(), s.coefficients, coarse).image;
    const double diff = (s.image.values() - coarse_image.values().cwiseMax(0.0).cwiseMin(1.0))
                            .cwiseAbs()
                            .maxCoeff();
    EXPECT_GT(diff, 0.01);
  }
}

TEST(SynthDataset, ZeroDetailMatchesCoarseRender) {
  RunConfig c = small_config();
  c.detail_scale = 0.0;
  const Scene scene = make_scene(c);
  for (const Sample& s : synth_dataset(scene, 2)) {
    const CoefficientVector cv = CoefficientVector::from_flat(s.coefficients);
    const Positions coarse = texture_from_coeffs(scene.model, cv.texture).cwiseMax(0.0).cwiseMin(1.0);
    EXPECT_EQ(s.albedo, coarse);
  }
}

TEST(Dataset, BinaryRoundTrip) {
  std::stringstream buf;
  write_dataset(buf, small_dataset());
  const Dataset back = read_dataset(buf);
  ASSERT_EQ(back.size(), small_dataset().size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].image.values(), small_dataset()[i].image.values());
    EXPECT_EQ(back[i].face_mask, small_dataset()[i].face_mask);
    EXPECT_EQ(back[i].coefficients, small_dataset()[i].coefficients);
    EXPECT_EQ(back[i].albedo, small_dataset()[i].albedo);
  }
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 5);
  std::istringstream truncated(bytes);
  EXPECT_THROW(read_dataset(truncated), ParseError);
}

TEST(Adam, FirstStepMatchesHandComputation) {
  Tensor p = Tensor::parameter({2}, Eigen::Vector2d(1.0, -2.0));
  AdamSettings s{0.01, 0.5, 0.9, 1e-8};
  Adam opt(s, {{"p", p}});
  ad::Tape tape;
  Tensor loss;
  {
    ad::TapeScope scope(tape);
    loss = ad::sum(ad::mul(p, Tensor::vector({3.0, 0.5})));
  }
  opt.step(ad::backward(tape, loss));
  // Bias-corrected moments equal g and g^2 on the first step.
  EXPECT_NEAR(p[0], 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -2.0 - 0.01 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, UnreachedParametersKeepZeroMoments) {
  Tensor a = Tensor::parameter({1}, Eigen::VectorXd::Ones(1));
  Tensor b = Tensor::parameter({1}, Eigen::VectorXd::Ones(1));
  Adam opt({}, {{"a", a}, {"b", b}});
  ad::Tape tape;
  Tensor loss;
  {
    ad::TapeScope scope(tape);
    loss = ad::sum(ad::mul(a, a));
  }
  opt.step(ad::backward(tape, loss));
  EXPECT_NE(a[0], 1.0);
  EXPECT_EQ(b[0], 1.0);
}

TEST(Trainer, StepZeroScheduleAndCriticUntouched) {
  Trainer t(small_scene(), small_dataset());
  std::vector<Eigen::VectorXd> critic_before, generator_before;
  for (const auto& p : t.networks().critic_parameters()) critic_before.push_back(p.tensor.values());
  for (const auto& p : t.networks().generator.parameters()) {
    generator_before.push_back(p.tensor.values());
  }
  const StepLog log = t.step();
  EXPECT_EQ(log.sigmas.s1, 0.0);
  EXPECT_EQ(log.sigmas.s2, 0.2);
  EXPECT_EQ(log.sigmas.s3, 0.001);
  EXPECT_EQ(log.sigmas.s4, 1.0);
  EXPECT_FALSE(log.critic.has_value());
  EXPECT_TRUE(log.pixel.has_value());
  EXPECT_NEAR(log.total, *log.vertex_texture + *log.vertex_projected, 1e-12);
  const auto critic = t.networks().critic_parameters();
  for (std::size_t i = 0; i < critic.size(); ++i) EXPECT_EQ(critic[i].tensor.values(), critic_before[i]);
  const auto generator = t.networks().generator.parameters();
  std::size_t changed = 0;
  for (std::size_t i = 0; i < generator.size(); ++i) {
    changed += generator[i].tensor.values() != generator_before[i];
  }
  EXPECT_EQ(changed, generator.size());
  EXPECT_EQ(format_log(log).rfind("step=0 sigma1=0 sigma2=0.20000000000000001 sigma3=0.001 sigma4=1 ", 0),
            0u);
}

TEST(Trainer, CriticAndGeneratorStepsAlternateAfterWarmup) {
  Trainer t(small_scene(), small_dataset());
  for (int i = 0; i < 4; ++i) {
    const StepLog log = t.step();
    EXPECT_EQ(log.critic.has_value(), log.sigmas.s1 > 0.0);
  }
  EXPECT_EQ(t.next_step(), 4);
}

TEST(Trainer, ResumeReproducesNextStepBitIdentically) {
  Trainer a(small_scene(), small_dataset());
  for (int i = 0; i < 3; ++i) a.step();
  const std::string saved = checkpoint_bytes(a);
  const std::string next_log = format_log(a.step());
  const std::string next_state = checkpoint_bytes(a);

  Trainer b(small_scene(), small_dataset());
  std::istringstream in(saved);
  b.load(in);
  EXPECT_EQ(b.next_step(), 3);
  EXPECT_EQ(format_log(b.step()), next_log);
  EXPECT_EQ(checkpoint_bytes(b), next_state);
}

TEST(Trainer, IdenticalRunsGiveIdenticalCheckpoints) {
  Trainer a(small_scene(), small_dataset()), b(small_scene(), small_dataset());
  const TrainResult ra = train(a, 5), rb = train(b, 5);
  for (std::size_t i = 0; i < ra.logs.size(); ++i) {
    EXPECT_EQ(format_log(ra.logs[i]), format_log(rb.logs[i]));
  }
  EXPECT_EQ(checkpoint_bytes(a), checkpoint_bytes(b));
}

TEST(Trainer, NonFiniteLossAbortsWithDump) {
  const fs::path dir = temp_dir("nan");
  Trainer t(small_scene(), small_dataset());
  t.set_dump_path((dir / "dump.txt").string());
  Tensor bias = t.networks().generator.combiner.conv.bias;
  bias.mutable_values()[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(t.step(), NumericalError);
  std::ifstream dump(dir / "dump.txt");
  std::string text((std::istreambuf_iterator<char>(dump)), std::istreambuf_iterator<char>());
  EXPECT_NE(text.find("step=0"), std::string::npos);
  EXPECT_NE(text.find("name=combiner.conv.bias"), std::string::npos);
  EXPECT_NE(text.find("nonfinite=1"), std::string::npos);
}

TEST(Trainer, RejectsCheckpointFromAnotherHierarchy) {
  Trainer a(small_scene(), small_dataset());
  const std::string bytes = checkpoint_bytes(a);
  RunConfig other = small_config();
  other.vertices = 200;
  const Scene scene = make_scene(other);
  const Dataset data = synth_dataset(scene, 1);
  Trainer b(scene, data);
  std::istringstream in(bytes);
  EXPECT_THROW(b.load(in), ConfigError);
  const fs::path dir = temp_dir("mismatch");
  a.save((dir / "ckpt.bin").string());
  EXPECT_THROW(load_networks(scene, (dir / "ckpt.bin").string()), ConfigError);
}

TEST(Trainer, RejectsCorruptCheckpoint) {
  Trainer a(small_scene(), small_dataset());
  std::string bytes = checkpoint_bytes(a);
  bytes[0] = 'X';
  std::istringstream bad_magic(bytes);
  EXPECT_THROW(a.load(bad_magic), ParseError);
  bytes = checkpoint_bytes(a);
  bytes.resize(bytes.size() / 2);
  std::istringstream truncated(bytes);
  EXPECT_THROW(a.load(truncated), ParseError);
}

TEST(Infer, OutputsAreConsistent) {
  const fs::path dir = temp_dir("infer");
  Trainer t(small_scene(), small_dataset());
  train(t, 2);
  t.save((dir / "ckpt.bin").string());
  const Networks n = load_networks(small_scene(), (dir / "ckpt.bin").string());
  const Sample& s = small_dataset()[1];
  const InferResult r = infer(small_scene(), n, s);
  const InferResult direct = infer(small_scene(), t.networks(), s);
  EXPECT_EQ(r.refined_texture.values(), direct.refined_texture.values());

  // Albedo-only render equals plain barycentric interpolation of T'.
  const SampleContext ctx = prepare_sample(small_scene(), s);
  const Tensor interpolated =
      render::interpolate(ctx.view.buffers, ctx.view.triangles, ctx.view.barycentrics,
                          r.refined_texture);
  EXPECT_LT((interpolated.values() - r.albedo_image.values()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(r.projected_mask, ctx.view.buffers.mask);

  write_infer_outputs((dir / "out").string(), small_scene(), s, r);
  for (const char* name : {"coarse.obj", "refined.obj", "input.png", "render_coarse.png",
                           "render_fine.png", "render_albedo.png", "mask_proj.png"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / name)) << name;
  }
  const ObjData obj = read_obj((dir / "out" / "refined.obj").string());
  EXPECT_EQ(obj.positions.rows(), 162);
  ASSERT_TRUE(obj.colors.has_value());
  const Tensor png = read_png((dir / "out" / "render_fine.png").string());
  EXPECT_EQ(png.shape(), (ad::Shape{32, 32, 3}));
}

TEST(Evaluate, ReportFormatAndSelfComparison) {
  Trainer t(small_scene(), small_dataset());
  const MetricReport report = evaluate(small_scene(), t.networks(), small_dataset());
  EXPECT_EQ(report.records.size(), 8u);
  std::ostringstream os;
  write_report(os, report);
  const std::string text = os.str();
  EXPECT_NE(text.find("record=sample index=0 texture=fine l1="), std::string::npos);
  EXPECT_NE(text.find("record=mean texture=coarse"), std::string::npos);
  EXPECT_NE(text.find("record=reference texture=published l1=0.034 psnr=29.69 ssim=0.894"),
            std::string::npos);
  EXPECT_NE(text.find("reproducible=false"), std::string::npos);
  // Column order follows l1, psnr, ssim, cosine.
  const auto line_end = text.find('\n', text.find("record=sample"));
  const std::string line = text.substr(text.find("record=sample"), line_end);
  EXPECT_LT(line.find("l1="), line.find("psnr="));
  EXPECT_LT(line.find("psnr="), line.find("ssim="));
  EXPECT_LT(line.find("ssim="), line.find("cosine="));

  const Sample& s = small_dataset()[0];
  const losses::Metrics self =
      losses::compute_metrics(s.image, s.image, s.face_mask, small_scene().embed());
  EXPECT_EQ(self.l1, 0.0);
  EXPECT_NEAR(self.ssim, 1.0, 1e-12);
  EXPECT_EQ(self.psnr, losses::kPsnrIdentical);
}

TEST(Png, RoundTripWithinQuantization) {
  const fs::path dir = temp_dir("png");
  const Tensor& image = small_dataset()[0].image;
  write_png((dir / "a.png").string(), image);
  const Tensor back = read_png((dir / "a.png").string());
  EXPECT_LE((back.values() - image.values()).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
  EXPECT_THROW(read_png((dir / "missing.png").string()), ParseError);
}

TEST(GradcheckSuite, AllComponentsPass) {
  const auto rows = run_gradcheck_suite(gradcheck_components());
  const std::vector<std::string> names{
      "diffcore",        "cheb_conv",      "residual_block", "decoder",     "refiner",
      "combiner",        "discriminator",  "render_texture", "render_lighting",
      "render_pose",     "pixel_loss",     "identity_loss",  "vertex_loss", "adversarial_loss",
      "total_loss"};
  ASSERT_EQ(rows.size(), names.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].name, names[i]);
    EXPECT_TRUE(rows[i].passed) << rows[i].name << " " << rows[i].max_rel_error << rows[i].error;
    EXPECT_GT(rows[i].checked, 0);
  }
  EXPECT_TRUE(all_passed(rows));
}

TEST(GradcheckSuite, CorruptedChebConvBackwardIsReported) {
  GradcheckSuiteOptions options;
  options.cheb_conv = [](const gcn::ChebLayer& layer, const SparseMatrix& lap, const Tensor& x) {
    Tensor value;
    {
      ad::NoGradScope no_grad;
      value = gcn::cheb_conv(layer, lap, x);
    }
    // Backward keeps only the T_0 term of the input gradient.
    const gcn::ChebLayer copy = layer;
    return ad::custom_op(
        "broken_cheb_conv", {x, layer.theta, layer.bias}, value,
        [copy](const Tensor& g, const std::vector<bool>& needs) {
          std::vector<Tensor> out(3);
          const Tensor theta0 = ad::reshape(
              ad::slice_cols(ad::reshape(copy.theta, {1, copy.order * copy.in * copy.out}), 0,
                             copy.in * copy.out),
              {copy.in, copy.out});
          if (needs[0]) out[0] = ad::matmul(g, ad::transpose(theta0));
          return out;
        });
  };
  std::vector<GradcheckComponent> components = gradcheck_components(options);
  const auto rows = run_gradcheck_suite(components);
  for (const GradcheckRow& r : rows) {
    if (r.name == "cheb_conv") {
      EXPECT_FALSE(r.passed);
      EXPECT_GT(r.max_rel_error, 1e-2);
    } else {
      EXPECT_TRUE(r.passed) << r.name;
    }
  }
  EXPECT_FALSE(all_passed(rows));
  std::ostringstream os;
  write_gradcheck_report(os, rows);
  EXPECT_NE(os.str().find("component=cheb_conv"), std::string::npos);
  EXPECT_NE(os.str().find("status=fail"), std::string::npos);
  EXPECT_NE(os.str().find("summary=fail components=15"), std::string::npos);
}


double mean_refinement(double detail_scale, Index steps) {
  RunConfig c = small_config();
  c.detail_scale = detail_scale;
  c.learning_rate = 1e-3;
  const Scene scene = make_scene(c);
  const Dataset data = synth_dataset(scene, 4);
  Trainer t(scene, data);
  train(t, steps);
  double total = 0.0;
  for (const Sample& s : data) {
    const InferResult r = infer(scene, t.networks(), s);
    total += (r.refined_texture.values() - r.coarse_texture.values()).cwiseAbs().mean();
  }
  return total / 4.0;
}

TEST(Refinement, ZeroDetailKeepsRefinedNearCoarse) {
  // Mean |T' - T| per channel after 100 steps.
  const double untrained = mean_refinement(0.0, 0);
  const double without_detail = mean_refinement(0.0, 100);
  const double with_detail = mean_refinement(0.3, 100);
  EXPECT_LT(without_detail, 0.06);
  EXPECT_LT(without_detail, 0.5 * untrained);
  EXPECT_LT(without_detail, 0.5 * with_detail);
}

}  // namespace
}  // namespace facegcn::pipeline
