#pragma once

#include <cstdint>
#include <vector>

#include "othx/othello.hpp"

namespace othx::nn {

// 62-symbol vocabulary: the 60 playable tiles (token id == tile index, in
// canonical row-major tile order) plus BOS and PAD.
struct Tokenizer {
  static constexpr int32_t kMoveTokens = 60;
  static constexpr int32_t kBos = 60;
  static constexpr int32_t kPad = 61;
  static constexpr int32_t kVocab = 62;

  static int32_t token_of(oth::Tile t) { return t.index(); }

  static oth::Tile tile_of(int32_t token) {
    if (token < 0 || token >= kMoveTokens)
      throw ConfigError("token " + std::to_string(token) + " is not a move token");
    return oth::Tile::from_index(token);
  }

  static bool is_move_token(int32_t token) {
    return token >= 0 && token < kMoveTokens;
  }

  // [BOS, t1, ..., tn]
  static std::vector<int32_t> encode_game(const oth::GameRecord& game) {
    std::vector<int32_t> out;
    out.reserve(game.moves.size() + 1);
    out.push_back(kBos);
    for (oth::Tile t : game.moves) out.push_back(token_of(t));
    return out;
  }

  static oth::GameRecord decode_moves(const std::vector<int32_t>& tokens) {
    oth::GameRecord g;
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i == 0 && tokens[i] == kBos) continue;
      g.moves.push_back(tile_of(tokens[i]));
    }
    return g;
  }
};

}  // namespace othx::nn
