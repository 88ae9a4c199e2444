#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "nodemr/train/model.hpp"
#include "nodemr/train/optimizer.hpp"

namespace nodemr::train {

/// Training run settings. The config file holds `key = value` lines whose
/// keys are these field names; `#` starts a comment.
struct TrainConfig {
  Family family{};
  int epochs = 30;
  int batch_size = 4;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::radam;
  bool lookahead = true;
  int lookahead_k = 5;
  double lookahead_alpha = 0.5;
  std::uint64_t seed = 0;
  bool checkpointing = false;
  int n_steps = 5;
  int cascades = 5;
  int width = 32;
  int val_count = 50;       // the last val_count manifest entries form the validation split
  bool dc_every_step = true; // key dc_mode: "every" or "final"

  /// Accepts learning_rate = 0 (a run that only measures the initial model);
  /// config files must give a positive rate.
  void validate() const;
  ModelOptions model_options() const;
  OptimizerConfig optimizer_config() const;
};

/// Throws ConfigError prefixed with "<source>:<line>: " on malformed lines,
/// unknown or repeated keys and bad values.
TrainConfig parse_train_config(std::string_view text, const std::string& source = "<config>");
TrainConfig load_train_config(const std::filesystem::path& path);

/// Every key in parse order, one `key = value` line each; parses back to
/// the same config.
std::string format_train_config(const TrainConfig& cfg);

}  // namespace nodemr::train
