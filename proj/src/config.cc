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

#include "facegcn/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "facegcn/errors.h"

namespace facegcn {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (!v.empty() && v.back() == ',') out.emplace_back();
  return out;
}

std::vector<Index> parse_widths(const std::string& key, const std::string& v) {
  std::vector<Index> out;
  for (const std::string& item : split_list(v)) out.push_back(parse_integer(key, item));
  return out;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join(const std::vector<Index>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config: key '" + key + "' " + what);
}

}  // namespace

bool RunConfig::operator==(const RunConfig& o) const {
  return config_string(*this) == config_string(o);
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  const std::string& k = key;
  const std::string v = trim(value);
  if (k == "seed") {
    c.seed = parse_unsigned(k, v);
  } else if (k == "model") {
    c.model = v;
  } else if (k == "vertices") {
    c.vertices = parse_integer(k, v);
  } else if (k == "levels") {
    c.levels = static_cast<int>(parse_integer(k, v));
  } else if (k == "level_fraction") {
    c.level_fraction = parse_real(k, v);
  } else if (k == "cheb_order") {
    c.network.cheb_order = parse_integer(k, v);
  } else if (k == "embedding_dim") {
    c.network.embedding_dim = parse_integer(k, v);
  } else if (k == "decoder_widths") {
    c.network.decoder_widths = parse_widths(k, v);
  } else if (k == "refiner_width") {
    c.network.refiner_width = parse_integer(k, v);
  } else if (k == "refiner_blocks") {
    c.network.refiner_blocks = parse_integer(k, v);
  } else if (k == "critic_channels") {
    c.network.critic_channels = parse_widths(k, v);
  } else if (k == "image_size") {
    c.image_size = parse_integer(k, v);
  } else if (k == "camera_focal") {
    c.camera.focal = parse_real(k, v);
  } else if (k == "camera_distance") {
    c.camera.distance = parse_real(k, v);
  } else if (k == "rotation") {
    if (v == "euler") {
      c.rotation = render::RotationMode::kEulerXYZ;
    } else if (v == "axis_angle") {
      c.rotation = render::RotationMode::kAxisAngle;
    } else {
      throw ConfigError("config: key 'rotation' expects euler or axis_angle, got '" + v + "'");
    }
  } else if (k == "dataset_size") {
    c.dataset_size = parse_integer(k, v);
  } else if (k == "detail_scale") {
    c.detail_scale = parse_real(k, v);
  } else if (k == "losses") {
    c.use_pixel = c.use_identity = c.use_adversarial = c.use_vertex = false;
    for (const std::string& item : split_list(v)) {
      if (item == "pixel") {
        c.use_pixel = true;
      } else if (item == "identity") {
        c.use_identity = true;
      } else if (item == "adversarial") {
        c.use_adversarial = true;
      } else if (item == "vertex") {
        c.use_vertex = true;
      } else {
        throw ConfigError("config: key 'losses' has unknown term '" + item + "'");
      }
    }
  } else if (k == "sigma2") {
    c.weights.sigma2 = parse_real(k, v);
  } else if (k == "sigma3") {
    c.weights.sigma3 = parse_real(k, v);
  } else if (k == "hold_steps") {
    c.weights.hold_steps = parse_integer(k, v);
  } else if (k == "warmup_steps") {
    c.weights.warmup_steps = parse_integer(k, v);
  } else if (k == "lambda_gp") {
    c.lambda_gp = parse_real(k, v);
  } else if (k == "critic_steps") {
    c.critic_steps = parse_integer(k, v);
  } else if (k == "learning_rate") {
    c.learning_rate = parse_real(k, v);
  } else if (k == "critic_learning_rate") {
    c.critic_learning_rate = parse_real(k, v);
  } else if (k == "adam_beta1") {
    c.adam_beta1 = parse_real(k, v);
  } else if (k == "adam_beta2") {
    c.adam_beta2 = parse_real(k, v);
  } else if (k == "adam_epsilon") {
    c.adam_epsilon = parse_real(k, v);
  } else if (k == "batch_size") {
    c.batch_size = parse_integer(k, v);
  } else if (k == "steps") {
    c.steps = parse_integer(k, v);
  } else if (k == "out") {
    c.out = v;
  } else {
    throw ConfigError("config: unknown key '" + k + "'");
  }
}

void validate(const RunConfig& c) {
  require(c.vertices >= 4, "vertices", "must be at least 4");
  require(c.levels >= 2, "levels", "must be at least 2");
  require(c.level_fraction > 0 && c.level_fraction < 1, "level_fraction", "must lie in (0, 1)");
  require(c.network.cheb_order >= 1, "cheb_order", "must be at least 1");
  require(c.network.embedding_dim >= 1, "embedding_dim", "must be positive");
  require(static_cast<int>(c.network.decoder_widths.size()) == c.levels, "decoder_widths",
          "needs one width per hierarchy level");
  for (Index w : c.network.decoder_widths) require(w >= 1, "decoder_widths", "must be positive");
  require(c.network.refiner_width >= 1, "refiner_width", "must be positive");
  require(c.network.refiner_blocks >= 1, "refiner_blocks", "must be positive");
  require(!c.network.critic_channels.empty(), "critic_channels", "must not be empty");
  for (Index w : c.network.critic_channels) require(w >= 1, "critic_channels", "must be positive");
  require(c.image_size >= 8, "image_size", "must be at least 8");
  require(c.image_size % (Index(1) << c.network.critic_channels.size()) == 0, "image_size",
          "must be divisible by 2^(critic layers)");
  require(c.camera.focal > 0, "camera_focal", "must be positive");
  require(c.camera.distance > c.camera.near, "camera_distance", "must exceed the near plane");
  require(c.dataset_size >= 1, "dataset_size", "must be at least 1");
  require(c.detail_scale >= 0, "detail_scale", "must be non-negative");
  require(c.use_pixel || c.use_identity || c.use_adversarial || c.use_vertex, "losses",
          "must enable at least one term");
  require(c.weights.hold_steps >= 0, "hold_steps", "must be non-negative");
  require(c.weights.warmup_steps >= 0, "warmup_steps", "must be non-negative");
  require(c.lambda_gp >= 0, "lambda_gp", "must be non-negative");
  require(c.critic_steps >= 0, "critic_steps", "must be non-negative");
  require(c.learning_rate > 0, "learning_rate", "must be positive");
  require(c.critic_learning_rate > 0, "critic_learning_rate", "must be positive");
  require(c.adam_beta1 >= 0 && c.adam_beta1 < 1, "adam_beta1", "must lie in [0, 1)");
  require(c.adam_beta2 >= 0 && c.adam_beta2 < 1, "adam_beta2", "must lie in [0, 1)");
  require(c.adam_epsilon > 0, "adam_epsilon", "must be positive");
  require(c.batch_size >= 1, "batch_size", "must be at least 1");
  require(c.steps >= 0, "steps", "must be non-negative");
}

RunConfig parse_config(std::istream& is) {
  RunConfig c;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(number) + " is not key = value");
    }
    apply_setting(c, trim(body.substr(0, eq)), body.substr(eq + 1));
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return parse_config(in);
}

void write_config(std::ostream& os, const RunConfig& c) {
  std::string losses;
  const auto add = [&losses](bool on, const char* name) {
    if (!on) return;
    if (!losses.empty()) losses += ',';
    losses += name;
  };
  add(c.use_pixel, "pixel");
  add(c.use_identity, "identity");
  add(c.use_adversarial, "adversarial");
  add(c.use_vertex, "vertex");
  os << "seed = " << c.seed << '\n'
     << "model = " << c.model << '\n'
     << "vertices = " << c.vertices << '\n'
     << "levels = " << c.levels << '\n'
     << "level_fraction = " << format_real(c.level_fraction) << '\n'
     << "cheb_order = " << c.network.cheb_order << '\n'
     << "embedding_dim = " << c.network.embedding_dim << '\n'
     << "decoder_widths = " << join(c.network.decoder_widths) << '\n'
     << "refiner_width = " << c.network.refiner_width << '\n'
     << "refiner_blocks = " << c.network.refiner_blocks << '\n'
     << "critic_channels = " << join(c.network.critic_channels) << '\n'
     << "image_size = " << c.image_size << '\n'
     << "camera_focal = " << format_real(c.camera.focal) << '\n'
     << "camera_distance = " << format_real(c.camera.distance) << '\n'
     << "rotation = "
     << (c.rotation == render::RotationMode::kEulerXYZ ? "euler" : "axis_angle") << '\n'
     << "dataset_size = " << c.dataset_size << '\n'
     << "detail_scale = " << format_real(c.detail_scale) << '\n'
     << "losses = " << losses << '\n'
     << "sigma2 = " << format_real(c.weights.sigma2) << '\n'
     << "sigma3 = " << format_real(c.weights.sigma3) << '\n'
     << "hold_steps = " << c.weights.hold_steps << '\n'
     << "warmup_steps = " << c.weights.warmup_steps << '\n'
     << "lambda_gp = " << format_real(c.lambda_gp) << '\n'
     << "critic_steps = " << c.critic_steps << '\n'
     << "learning_rate = " << format_real(c.learning_rate) << '\n'
     << "critic_learning_rate = " << format_real(c.critic_learning_rate) << '\n'
     << "adam_beta1 = " << format_real(c.adam_beta1) << '\n'
     << "adam_beta2 = " << format_real(c.adam_beta2) << '\n'
     << "adam_epsilon = " << format_real(c.adam_epsilon) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "steps = " << c.steps << '\n'
     << "out = " << c.out << '\n';
}

std::string config_string(const RunConfig& config) {
  std::ostringstream os;
  write_config(os, config);
  return os.str();
}

}  // namespace facegcn
