#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hicd/data.hpp"
#include "hicd/network.hpp"
#include "hicd/training.hpp"

namespace hicd {

/// Where training and evaluation pairs come from. Empty manifest paths fall
/// back to the synthetic generator.
struct DataConfig {
  std::string train_manifest;
  std::string eval_manifest;
  SyntheticSceneSpec train_scenes;
  SyntheticSceneSpec eval_scenes;
  std::size_t train_count = 48;
  std::size_t eval_count = 32;

  DataConfig();
};

/// {model, train, weights, degradation, data, seed}. Top-level `seed`,
/// `weights` and `degradation.scale` override the matching `train` fields.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::size_t teacher_steps = 2000;
  std::uint64_t eval_seed = 1;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_experiment(const std::filesystem::path& path);

std::vector<ImagePair> load_train_pairs(const DataConfig& data);
std::vector<ImagePair> load_eval_pairs(const DataConfig& data);

/// 64-bit FNV-1a over the bytes of `text`, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

}  // namespace hicd
