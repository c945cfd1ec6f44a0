#include "othx/eval.hpp"

#include <map>

#include "othx/tokenizer.hpp"

namespace othx::eval {

namespace {

class ModelMovePredictor final : public MovePredictor {
 public:
  explicit ModelMovePredictor(const nn::Model<float>& model) : runner_(model) {}

  std::vector<oth::Tile> predict_all_steps(const oth::GameRecord& game) override {
    const auto& logits = runner_.step_logits(game);
    const int L = static_cast<int>(game.moves.size());
    std::vector<oth::Tile> out;
    out.reserve(L);
    for (int i = 0; i < L; ++i) {
      const float* row = logits.data() + static_cast<size_t>(i) * nn::Tokenizer::kVocab;
      out.push_back(nn::Tokenizer::tile_of(nn::argmax_move_token(row)));
    }
    return out;
  }

  oth::Tile predict_after(std::span<const oth::Tile> moves) override {
    prefix_.clear();
    prefix_.push_back(nn::Tokenizer::kBos);
    for (oth::Tile t : moves) prefix_.push_back(nn::Tokenizer::token_of(t));
    return nn::Tokenizer::tile_of(runner_.argmax_move(prefix_));
  }

 private:
  nn::StepwiseRunner runner_;
  std::vector<int32_t> prefix_;
};

struct GameOutcome {
  std::vector<uint8_t> error_at_step;  // index i-1 <-> step i
};

ErrorReport aggregate(int hop, std::vector<GameOutcome>& outcomes,
                      const std::string& dataset_id,
                      const std::string& checkpoint_id) {
  ErrorReport rep;
  rep.hop = hop;
  rep.dataset_id = dataset_id;
  rep.checkpoint_id = checkpoint_id;
  std::map<int, std::pair<int64_t, int64_t>> by_step;  // step -> (prefixes, errors)
  for (const auto& oc : outcomes) {
    for (size_t i = 0; i < oc.error_at_step.size(); ++i) {
      auto& [prefixes, errors] = by_step[static_cast<int>(i) + 1];
      ++prefixes;
      errors += oc.error_at_step[i];
      ++rep.total_prefixes;
      rep.errors += oc.error_at_step[i];
    }
  }
  rep.error_rate = rep.total_prefixes == 0
                       ? 0.0
                       : static_cast<double>(rep.errors) /
                             static_cast<double>(rep.total_prefixes);
  for (const auto& [step, pe] : by_step)
    rep.per_position.push_back(
        {step, pe.first, pe.second,
         static_cast<double>(pe.second) / static_cast<double>(pe.first)});
  return rep;
}

}  // namespace

std::unique_ptr<MovePredictor> model_predictor(const nn::Model<float>& model) {
  return std::make_unique<ModelMovePredictor>(model);
}

ErrorReport eval_1hop(const PredictorFactory& factory, const oth::Dataset& test,
                      const std::string& dataset_id,
                      const std::string& checkpoint_id) {
  const int64_t n = static_cast<int64_t>(test.games.size());
  std::vector<GameOutcome> outcomes(static_cast<size_t>(n));
#pragma omp parallel
  {
    auto predictor = factory();
#pragma omp for schedule(dynamic, 4)
    for (int64_t g = 0; g < n; ++g) {
      const auto& game = test.games[static_cast<size_t>(g)];
      const auto preds = predictor->predict_all_steps(game);
      auto& oc = outcomes[static_cast<size_t>(g)];
      oc.error_at_step.resize(game.moves.size());
      oth::Board b = oth::Board::initial();
      for (size_t i = 0; i < game.moves.size(); ++i) {
        oc.error_at_step[i] = oth::is_legal(b, preds[i]) ? 0 : 1;
        b = oth::apply_move(b, game.moves[i]);
      }
    }
  }
  return aggregate(1, outcomes, dataset_id, checkpoint_id);
}

ErrorReport eval_2hop(const PredictorFactory& factory, const oth::Dataset& test,
                      const std::string& dataset_id,
                      const std::string& checkpoint_id) {
  const int64_t n = static_cast<int64_t>(test.games.size());
  std::vector<GameOutcome> outcomes(static_cast<size_t>(n));
#pragma omp parallel
  {
    auto predictor = factory();
    std::vector<oth::Tile> two_prefix;
#pragma omp for schedule(dynamic, 2)
    for (int64_t g = 0; g < n; ++g) {
      const auto& game = test.games[static_cast<size_t>(g)];
      const auto first_moves = predictor->predict_all_steps(game);
      auto& oc = outcomes[static_cast<size_t>(g)];
      const size_t scored =
          game.moves.size() >= 2 ? game.moves.size() - 1 : 0;  // skip rule
      oc.error_at_step.resize(scored);
      oth::Board b = oth::Board::initial();
      for (size_t i = 0; i < scored; ++i) {
        const oth::Tile g1 = first_moves[i];
        bool error = true;
        if (oth::is_legal(b, g1)) {
          const oth::Board after_g1 = oth::apply_move(b, g1);
          two_prefix.assign(game.moves.begin(),
                            game.moves.begin() + static_cast<int64_t>(i));
          two_prefix.push_back(g1);
          const oth::Tile g2 = predictor->predict_after(two_prefix);
          error = !oth::is_legal(after_g1, g2);
        }
        oc.error_at_step[i] = error ? 1 : 0;
        b = oth::apply_move(b, game.moves[i]);
      }
    }
  }
  return aggregate(2, outcomes, dataset_id, checkpoint_id);
}

ErrorReport eval_1hop(const nn::Model<float>& model, const oth::Dataset& test,
                      const std::string& dataset_id,
                      const std::string& checkpoint_id) {
  return eval_1hop([&] { return model_predictor(model); }, test, dataset_id,
                   checkpoint_id);
}

ErrorReport eval_2hop(const nn::Model<float>& model, const oth::Dataset& test,
                      const std::string& dataset_id,
                      const std::string& checkpoint_id) {
  return eval_2hop([&] { return model_predictor(model); }, test, dataset_id,
                   checkpoint_id);
}

}  // namespace othx::eval
