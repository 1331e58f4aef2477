#pragma once

#include <cstdint>
#include <string>

#include "core/tensor.hpp"
#include "losses.hpp"
#include "model.hpp"

namespace aepnet {

struct TrainConfig {
  LossWeights loss;
  double lr0 = 1e-3;
  double poly_power = 0.9;
  int max_iter = 2000;
  int batch_size = 1;
  Shape crop = {16, 16, 16};
  bool flip_x = true;
  bool flip_y = true;
  bool flip_z = true;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;  // 0 disables periodic checkpoints
  AepNetConfig model;

  void validate() const;
};

/// JSON config file with keys named exactly as the fields above; loss and
/// model settings nest under "loss" and "model". Unknown keys are rejected,
/// absent keys keep their defaults.
TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);

struct TrainResult {
  std::string checkpoint_path;  // final model state
  std::string log_path;         // per-iteration CSV
  double final_total = 0.0;     // total loss at the last iteration
};

/// Optimize from scratch — or from `resume_checkpoint` — over the train split
/// of the dataset under `data_dir`. Per iteration: sample a (case, mask)
/// uniformly, preprocess, crop, flip, forward, loss_total, backward, Adam with
/// the poly rate. Writes train_log.csv plus periodic and final checkpoints
/// under `out_dir`. Bit-deterministic for a fixed (config, data) pair.
TrainResult train_loop(const TrainConfig& cfg, const std::string& data_dir,
                       const std::string& out_dir, const std::string& resume_checkpoint = {});

}  // namespace aepnet
