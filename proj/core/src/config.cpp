#include "hicd/config.hpp"

#include <cstdio>
#include <fstream>

#include "hicd/error.hpp"

namespace hicd {

DataConfig::DataConfig() {
  train_scenes.rng_seed = 1000;
  train_scenes.background_seed = 7;
  eval_scenes.rng_seed = 5000;
  eval_scenes.background_seed = 99;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"model", c.model},
                     {"train", c.train},
                     {"weights", c.train.weights},
                     {"degradation", {{"scale", c.train.scale}, {"ranges", c.train.ranges}}},
                     {"data",
                      {{"train_manifest", c.data.train_manifest},
                       {"eval_manifest", c.data.eval_manifest},
                       {"train_scenes", c.data.train_scenes},
                       {"eval_scenes", c.data.eval_scenes},
                       {"train_count", c.data.train_count},
                       {"eval_count", c.data.eval_count}}},
                     {"teacher_steps", c.teacher_steps},
                     {"eval_seed", c.eval_seed},
                     {"seed", c.train.seed}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  const ExperimentConfig d;
  try {
    c.model = j.value("model", d.model);
    c.train = j.value("train", d.train);
    if (j.contains("weights")) c.train.weights = j.at("weights").get<LossWeights>();
    if (j.contains("degradation")) {
      const auto& g = j.at("degradation");
      c.train.scale = g.value("scale", c.train.scale);
      c.train.ranges = g.value("ranges", c.train.ranges);
    }
    if (j.contains("seed")) c.train.seed = j.at("seed").get<std::uint64_t>();
    c.data = d.data;
    if (j.contains("data")) {
      const auto& x = j.at("data");
      c.data.train_manifest = x.value("train_manifest", d.data.train_manifest);
      c.data.eval_manifest = x.value("eval_manifest", d.data.eval_manifest);
      c.data.train_scenes = x.value("train_scenes", d.data.train_scenes);
      c.data.eval_scenes = x.value("eval_scenes", d.data.eval_scenes);
      c.data.train_count = x.value("train_count", d.data.train_count);
      c.data.eval_count = x.value("eval_count", d.data.eval_count);
    }
    c.teacher_steps = j.value("teacher_steps", d.teacher_steps);
    c.eval_seed = j.value("eval_seed", d.eval_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.train.validate();
  if (c.teacher_steps == 0) throw ConfigError("config: teacher_steps must be positive");
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return j.get<ExperimentConfig>();
}

std::vector<ImagePair> load_train_pairs(const DataConfig& data) {
  if (!data.train_manifest.empty()) return load_pairs(load_manifest(data.train_manifest));
  return generate_synthetic_set(data.train_scenes, data.train_count);
}

std::vector<ImagePair> load_eval_pairs(const DataConfig& data) {
  if (!data.eval_manifest.empty()) return load_pairs(load_manifest(data.eval_manifest));
  return generate_synthetic_set(data.eval_scenes, data.eval_count);
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hicd
