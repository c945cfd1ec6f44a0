#pragma once

#include <utility>
#include <vector>

#include "othx/model.hpp"
#include "othx/othello.hpp"

namespace othx::nn {

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-3;
  int warmup_steps = 100;       // linear warmup, then constant rate
  int64_t total_steps = 2000;
  double weight_decay = 0.01;
  double gradient_clip_norm = 1.0;
  int64_t eval_interval = 100;  // loss is logged every eval_interval steps
  uint64_t seed = 0;

  void validate() const {
    if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval must be >= 1");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (gradient_clip_norm < 0.0) throw ConfigError("gradient_clip_norm must be >= 0");
  }
};

struct TrainResult {
  Model<float> model;
  TrainMeta meta;
  std::vector<std::pair<int64_t, double>> loss_log;  // (step, loss)
};

// Teacher-forced next-move training with AdamW: PAD-masked mean cross-entropy
// over the 60 move tokens. Single logical update stream; with fixed seeds the
// loss trajectory is reproducible run-to-run on the same build.
TrainResult train(const ModelConfig& mconfig, const TrainConfig& tconfig,
                  const oth::Dataset& data, bool verbose = true);

// Ordering-preserving split. Datasets with >= 40k games reserve the last
// 20k (first half validation, second half test); smaller ones split
// 80/10/10 with the same ordering rule.
struct DatasetSplit {
  oth::Dataset train, val, test;
};

DatasetSplit split_dataset(const oth::Dataset& data);

}  // namespace othx::nn
