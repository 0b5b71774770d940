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

// Command-line front end: synth, train, infer, eval, render, gradcheck.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "facegcn/config.h"
#include "facegcn/errors.h"
#include "facegcn/gradcheck_suite.h"
#include "facegcn/morphable.h"
#include "facegcn/pipeline.h"
#include "facegcn/png_io.h"

namespace {

using namespace facegcn;
namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::vector<std::string> settings;
  std::string data;
};

RunConfig resolve(const CommonOptions& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const std::string& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed_set) c.seed = o.seed;
  if (!o.out.empty()) c.out = o.out;
  validate(c);
  return c;
}

pipeline::Dataset load_or_synth(const pipeline::Scene& scene, const std::string& data) {
  if (!data.empty()) return pipeline::read_dataset(data);
  return pipeline::synth_dataset(scene, scene.config.dataset_size);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "'");
  os << text;
}

const pipeline::Sample& pick(const pipeline::Dataset& dataset, Index index) {
  if (index < 0 || index >= static_cast<Index>(dataset.size())) {
    throw ContractViolation("sample index " + std::to_string(index) + " outside dataset of " +
                            std::to_string(dataset.size()));
  }
  return dataset[index];
}

int run_synth(const CommonOptions& o) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.out);
  const pipeline::Scene scene = pipeline::make_scene(c);
  const pipeline::Dataset dataset = pipeline::synth_dataset(scene, c.dataset_size);
  write_model((fs::path(c.out) / "model.bin").string(), scene.model);
  pipeline::write_dataset((fs::path(c.out) / "dataset.bin").string(), dataset);
  write_text(fs::path(c.out) / "config.txt", config_string(c));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    write_png((fs::path(c.out) / ("sample_" + std::to_string(i) + ".png")).string(),
              dataset[i].image);
  }
  std::cout << "synth: " << dataset.size() << " samples, " << scene.model.vertex_count()
            << " vertices -> " << c.out << '\n';
  return 0;
}

int run_train(const CommonOptions& o, const std::string& resume, Index steps) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.out);
  const pipeline::Scene scene = pipeline::make_scene(c);
  const pipeline::Dataset dataset = load_or_synth(scene, o.data);
  pipeline::Trainer trainer(scene, dataset);
  trainer.set_dump_path((fs::path(c.out) / "nan_dump.txt").string());
  if (!resume.empty()) trainer.load(resume);
  const Index remaining = steps >= 0 ? steps : std::max<Index>(0, c.steps - trainer.next_step());
  std::ofstream log(fs::path(c.out) / "train_log.txt", resume.empty() ? std::ios::trunc : std::ios::app);
  pipeline::train(trainer, remaining, &log);
  trainer.save((fs::path(c.out) / "checkpoint.bin").string());
  write_text(fs::path(c.out) / "config.txt", config_string(c));
  std::cout << "train: " << trainer.next_step() << " steps -> " << c.out << '\n';
  return 0;
}

int run_infer(const CommonOptions& o, const std::string& checkpoint, Index index) {
  const RunConfig c = resolve(o);
  const pipeline::Scene scene = pipeline::make_scene(c);
  const pipeline::Dataset dataset = load_or_synth(scene, o.data);
  const pipeline::Networks networks = pipeline::load_networks(scene, checkpoint);
  const pipeline::Sample& sample = pick(dataset, index);
  pipeline::write_infer_outputs(c.out, scene, sample, pipeline::infer(scene, networks, sample));
  std::cout << "infer: sample " << index << " -> " << c.out << '\n';
  return 0;
}

int run_eval(const CommonOptions& o, const std::string& checkpoint) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.out);
  const pipeline::Scene scene = pipeline::make_scene(c);
  const pipeline::Dataset dataset = load_or_synth(scene, o.data);
  const pipeline::Networks networks = pipeline::load_networks(scene, checkpoint);
  const pipeline::MetricReport report = pipeline::evaluate(scene, networks, dataset);
  std::ofstream os(fs::path(c.out) / "report.txt");
  pipeline::write_report(os, report);
  pipeline::write_report(std::cout, report);
  return 0;
}

int run_render(const CommonOptions& o, Index index) {
  const RunConfig c = resolve(o);
  fs::create_directories(c.out);
  const pipeline::Scene scene = pipeline::make_scene(c);
  const pipeline::Dataset dataset = load_or_synth(scene, o.data);
  const pipeline::Sample& sample = pick(dataset, index);
  const render::RenderOutput shaded =
      pipeline::render_coefficients(scene, sample.coefficients, sample.albedo);
  const render::RenderOutput albedo = pipeline::render_coefficients(
      scene, sample.coefficients, sample.albedo, render::ShadeMode::kAlbedoOnly);
  write_png((fs::path(c.out) / "render.png").string(), shaded.image);
  write_png((fs::path(c.out) / "render_albedo.png").string(), albedo.image);
  write_mask_png((fs::path(c.out) / "mask_proj.png").string(), shaded.buffers.mask,
                 c.image_size, c.image_size);
  std::cout << "render: sample " << index << " -> " << c.out << '\n';
  return 0;
}

int run_gradcheck(const CommonOptions& o) {
  const RunConfig c = resolve(o);
  GradcheckSuiteOptions options;
  options.seed = c.seed;
  const auto rows = run_gradcheck_suite(gradcheck_components(options));
  write_gradcheck_report(std::cout, rows);
  return all_passed(rows) ? 0 : 1;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const ContractViolation*>(&e)) return "ContractViolation";
  if (dynamic_cast<const UnsupportedOperation*>(&e)) return "UnsupportedOperation";
  if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
  if (dynamic_cast<const DegenerateMaskError*>(&e)) return "DegenerateMaskError";
  if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
  return "RuntimeError";
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + '"';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine face texture reconstruction with spectral graph networks"};
  app.require_subcommand(1);
  CommonOptions common;
  std::string checkpoint, resume;
  Index sample = 0;
  Index steps = -1;

  const auto add_common = [&common](CLI::App* sub, bool with_data) {
    sub->add_option("--config", common.config_path, "key = value config file");
    sub->add_option("--seed", common.seed, "run seed (overrides the config)")
        ->each([&common](const std::string&) { common.seed_set = true; });
    sub->add_option("--out", common.out, "output directory (overrides the config)");
    sub->add_option("--set", common.settings, "extra key=value config overrides");
    if (with_data) {
      sub->add_option("--data", common.data, "dataset file written by synth (default: synthesize)");
    }
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic model and dataset");
  add_common(synth, false);
  CLI::App* train = app.add_subcommand("train", "train the refinement networks");
  add_common(train, true);
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--steps", steps, "generator steps to run (default: up to config steps)");
  CLI::App* infer = app.add_subcommand("infer", "export meshes and renders for one sample");
  add_common(infer, true);
  infer->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  infer->add_option("--sample", sample, "dataset index");
  CLI::App* eval = app.add_subcommand("eval", "write the metric report");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  CLI::App* render_cmd = app.add_subcommand("render", "render one sample's ground truth");
  add_common(render_cmd, true);
  render_cmd->add_option("--sample", sample, "dataset index");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(gradcheck, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: kind=UsageError message=" << quoted(e.what()) << '\n';
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(common);
    if (train->parsed()) return run_train(common, resume, steps);
    if (infer->parsed()) return run_infer(common, checkpoint, sample);
    if (eval->parsed()) return run_eval(common, checkpoint);
    if (render_cmd->parsed()) return run_render(common, sample);
    if (gradcheck->parsed()) return run_gradcheck(common);
  } catch (const std::exception& e) {
    std::cerr << "error: kind=" << error_kind(e) << " message=" << quoted(e.what()) << '\n';
    return 2;
  }
  return 2;
}
