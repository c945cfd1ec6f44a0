#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "othx/model.hpp"
#include "othx/othello.hpp"

namespace othx::eval {

struct PositionStat {
  int step = 0;  // 1-based prefix step
  int64_t prefixes = 0;
  int64_t errors = 0;
  double rate = 0.0;
};

struct ErrorReport {
  int hop = 1;
  int64_t total_prefixes = 0;
  int64_t errors = 0;
  double error_rate = 0.0;  // errors / total_prefixes, divided exactly once
  std::vector<PositionStat> per_position;
  std::string dataset_id;
  std::string checkpoint_id;
};

// Anything that proposes a top-1 next move. Trained models implement this via
// greedy decoding; tests plug in oracle/adversarial/random baselines.
class MovePredictor {
 public:
  virtual ~MovePredictor() = default;

  // Predictions for every prefix of `game`: element i-1 is the top-1 move
  // for step i (conditioned on the first i-1 true moves), i = 1..len.
  virtual std::vector<oth::Tile> predict_all_steps(const oth::GameRecord& game) = 0;

  // Top-1 move after an arbitrary move prefix (second hop of 2-hop eval).
  virtual oth::Tile predict_after(std::span<const oth::Tile> moves) = 0;
};

// Evaluation parallelizes across games; each worker gets its own predictor.
using PredictorFactory = std::function<std::unique_ptr<MovePredictor>()>;

std::unique_ptr<MovePredictor> model_predictor(const nn::Model<float>& model);

// Every step i in [1, len]: feed the true prefix, count an error iff the
// top-1 generated move is illegal on the board reached by replaying the
// true prefix.
ErrorReport eval_1hop(const PredictorFactory& factory, const oth::Dataset& test,
                      const std::string& dataset_id = "",
                      const std::string& checkpoint_id = "");

// Two consecutive greedy moves per prefix; the first is checked on the
// true-prefix board and, if legal, applied; the second is checked on the
// resulting board. A prefix is one error iff either move is illegal.
// Prefixes with fewer than 2 remaining plies are skipped.
ErrorReport eval_2hop(const PredictorFactory& factory, const oth::Dataset& test,
                      const std::string& dataset_id = "",
                      const std::string& checkpoint_id = "");

ErrorReport eval_1hop(const nn::Model<float>& model, const oth::Dataset& test,
                      const std::string& dataset_id = "",
                      const std::string& checkpoint_id = "");
ErrorReport eval_2hop(const nn::Model<float>& model, const oth::Dataset& test,
                      const std::string& dataset_id = "",
                      const std::string& checkpoint_id = "");

}  // namespace othx::eval
