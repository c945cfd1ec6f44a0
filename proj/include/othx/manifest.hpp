#pragma once

#include <map>
#include <string>
#include <vector>

#include "othx/model.hpp"
#include "othx/train.hpp"

namespace othx::cli {

struct DatasetSpec {
  std::string source = "synthetic";  // "synthetic" or "file"
  int64_t count = 0;
  uint64_t seed = 0;
  std::string path;  // file source only
};

struct EvalPlan {
  std::vector<int> hops = {1, 2};
  int64_t max_games = 1000;              // cap on scored test games
  std::vector<int64_t> scales;           // sweep only
  std::map<int64_t, int64_t> steps_per_scale;
};

struct AlignPlan {
  std::string mode = "supervised";  // "supervised" | "unsupervised" | "both"
  int refinement_iters = 3;
  int adversarial_iters = 10000;
  int layer_a = -1;  // -1 = last decoder layer
  int layer_b = -1;
  int fit_games = 1000;    // validation games used as training pairs
  int score_games = 200;   // test games used for held-out scoring
  bool layer_grid = false;
  int grid_games = 100;
  uint64_t seed = 0;
};

struct VizPlan {
  std::string board_model;  // default: first model
  int board_game = 0;       // test-split game index
  int board_steps = 10;     // prefix length
  bool project_game = true;
  int project_dims = 2;
};

// One manifest = one experiment; re-running it reproduces the experiment.
struct ExperimentManifest {
  std::string name;
  std::string out_dir;
  DatasetSpec dataset;
  std::vector<std::pair<std::string, nn::ModelConfig>> models;
  nn::TrainConfig train;
  EvalPlan eval;
  AlignPlan align;
  VizPlan viz;

  uint64_t manifest_hash = 0;  // FNV-1a of the manifest file bytes
  std::string source_path;
};

// Throws ManifestError naming the offending field path.
ExperimentManifest load_manifest(const std::string& path);

}  // namespace othx::cli
