#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "othx/eval.hpp"
#include "othx/train.hpp"

namespace othx::eval {

// One (model config, data scale, hop) cell of a data-size sweep.
struct SweepCell {
  std::string model_id;
  int64_t scale = 0;
  int hop = 0;
  int64_t prefixes = 0;
  int64_t errors = 0;
  double rate = 0.0;
  std::string error;  // non-empty when this cell failed
};

struct SweepPlan {
  std::vector<std::pair<std::string, nn::ModelConfig>> models;
  nn::TrainConfig tconfig;
  std::vector<int64_t> scales;                    // game counts, ascending
  std::map<int64_t, int64_t> steps_per_scale;     // optional per-scale override
  uint64_t data_seed = 0;
  std::vector<int> hops = {1, 2};
  int64_t eval_max_games = 1000;                  // cap on test games scored
};

struct SweepResult {
  std::vector<SweepCell> cells;
};

// Called after each successful training run, e.g. to persist the checkpoint.
using CheckpointSink = std::function<void(
    const std::string& model_id, int64_t scale, const nn::TrainResult&)>;

// Trains and evaluates each (model, scale); a failed cell records its error
// and the sweep continues.
SweepResult run_sweep(const SweepPlan& plan, const CheckpointSink& sink = {},
                      bool verbose = true);

}  // namespace othx::eval
