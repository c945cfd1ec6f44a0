#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "othx/errors.hpp"

namespace othx::oth {

enum class Player : uint8_t { Black = 0, White = 1 };

inline Player opponent(Player p) {
  return p == Player::Black ? Player::White : Player::Black;
}

// One of the 60 playable squares. The four center squares D4/E4/D5/E5 are
// occupied from the start and excluded. Indices run row-major from A1 (0)
// to H8 (59), skipping the center four; this ordering doubles as the move
// token-id order.
class Tile {
 public:
  static constexpr int kCount = 60;

  Tile() = default;

  static Tile from_index(int index);           // [0, 60)
  static Tile from_square(int square);         // playable square in [0, 64)
  static Tile parse(std::string_view label);   // "d3" / "D3" -> D3; ParseError

  int index() const { return index_; }
  int square() const;                          // board square in [0, 64)
  int col() const { return square() % 8; }     // 0 = A
  int row() const { return square() / 8; }     // 0 = rank 1
  std::string label() const;                   // uppercase canonical form

  auto operator<=>(const Tile&) const = default;

 private:
  explicit Tile(int index) : index_(static_cast<int8_t>(index)) {}
  int8_t index_ = 0;
};

// Full position: two disc bitboards (bit i = square i = row*8 + col) plus
// the side to move.
struct Board {
  uint64_t black = 0;
  uint64_t white = 0;
  Player to_move = Player::Black;

  static Board initial();

  uint64_t occupied() const { return black | white; }
  uint64_t own() const { return to_move == Player::Black ? black : white; }
  uint64_t opp() const { return to_move == Player::Black ? white : black; }
  int disc_count() const;
  int count(Player p) const;

  bool operator==(const Board&) const = default;
};

// Bitboard of squares where `to_move` can place a disc flipping at least one
// opponent disc. Zero means the player must pass.
uint64_t legal_mask(const Board& board);

// The same set as sorted tiles (ascending tile index).
std::vector<Tile> legal_moves(const Board& board);

bool is_legal(const Board& board, Tile tile);

// Successor board: disc placed, bracketed discs flipped in all 8 directions,
// side to move advanced to the opponent unless the opponent has no legal
// move (then it stays). Throws IllegalMove if `tile` is not legal.
Board apply_move(const Board& board, Tile tile);

bool game_over(const Board& board);

// One game: ordered placements (passes are implicit; replay recomputes the
// side to move) plus an optional final outcome.
struct GameRecord {
  enum class Outcome : uint8_t { BlackWin, WhiteWin, Draw };

  std::vector<Tile> moves;
  std::optional<Outcome> outcome;

  bool operator==(const GameRecord& o) const { return moves == o.moves; }
};

GameRecord::Outcome outcome_of(const Board& board);

// Board after replaying `count` moves from the start (all of them if
// count < 0). Throws IllegalGame when a move is not legal at its step.
Board replay(const GameRecord& game, int count = -1);

struct Dataset {
  enum class Source : uint8_t { Synthetic, Championship, Other };

  std::vector<GameRecord> games;
  Source source_tag = Source::Other;
  std::optional<uint64_t> seed;
};

// `count` games of uniform-random legal play, bit-reproducible for a fixed
// seed: game i uses its own SplitMix64 stream seeded with seed ^ i, so the
// result does not depend on scheduling.
Dataset generate_games(int64_t count, uint64_t seed);

struct DatasetStats {
  int64_t games = 0;
  double mean_length = 0.0;
  int min_length = 0;
  double full_length_fraction = 0.0;  // games with all 60 placements
};

DatasetStats dataset_stats(const Dataset& dataset);

}  // namespace othx::oth
