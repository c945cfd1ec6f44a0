#include "othx/othello.hpp"

#include <bit>
#include <cctype>

#include "othx/rng.hpp"

namespace othx::oth {

namespace {

constexpr uint64_t kFileA = 0x0101010101010101ull;
constexpr uint64_t kFileH = 0x8080808080808080ull;
constexpr uint64_t kNotA = ~kFileA;
constexpr uint64_t kNotH = ~kFileH;

// Center squares, occupied from move zero: D4, E4, D5, E5.
constexpr int kCenter[4] = {27, 28, 35, 36};
constexpr uint64_t kCenterMask =
    (1ull << 27) | (1ull << 28) | (1ull << 35) | (1ull << 36);

struct TileTables {
  std::array<int8_t, 64> square_to_index{};
  std::array<int8_t, 60> index_to_square{};
  constexpr TileTables() {
    square_to_index.fill(-1);
    int idx = 0;
    for (int sq = 0; sq < 64; ++sq) {
      if ((kCenterMask >> sq) & 1ull) continue;
      square_to_index[sq] = static_cast<int8_t>(idx);
      index_to_square[idx] = static_cast<int8_t>(sq);
      ++idx;
    }
  }
};
constexpr TileTables kTiles{};

// dir 0..7: E, W, S, N, SE, SW, NE, NW with column masks against wrap.
inline uint64_t shift_dir(uint64_t x, int dir) {
  switch (dir) {
    case 0: return (x & kNotH) << 1;
    case 1: return (x & kNotA) >> 1;
    case 2: return x << 8;
    case 3: return x >> 8;
    case 4: return (x & kNotH) << 9;
    case 5: return (x & kNotA) << 7;
    case 6: return (x & kNotH) >> 7;
    default: return (x & kNotA) >> 9;
  }
}

uint64_t legal_mask_for(uint64_t own, uint64_t opp) {
  const uint64_t empty = ~(own | opp);
  uint64_t moves = 0;
  for (int dir = 0; dir < 8; ++dir) {
    uint64_t run = shift_dir(own, dir) & opp;
    for (int i = 0; i < 5; ++i) run |= shift_dir(run, dir) & opp;
    moves |= shift_dir(run, dir) & empty;
  }
  return moves;
}

uint64_t flips_for(uint64_t own, uint64_t opp, int square) {
  const uint64_t placed = 1ull << square;
  uint64_t flips = 0;
  for (int dir = 0; dir < 8; ++dir) {
    uint64_t run = 0;
    uint64_t cur = shift_dir(placed, dir);
    while (cur & opp) {
      run |= cur;
      cur = shift_dir(cur, dir);
    }
    if (cur & own) flips |= run;
  }
  return flips;
}

}  // namespace

Tile Tile::from_index(int index) {
  if (index < 0 || index >= kCount)
    throw ParseError("tile index out of range: " + std::to_string(index));
  return Tile(index);
}

Tile Tile::from_square(int square) {
  if (square < 0 || square >= 64 || kTiles.square_to_index[square] < 0)
    throw ParseError("square is not playable: " + std::to_string(square));
  return Tile(kTiles.square_to_index[square]);
}

Tile Tile::parse(std::string_view label) {
  if (label.size() != 2)
    throw ParseError("bad tile label '" + std::string(label) + "'");
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
  const char r = label[1];
  if (c < 'A' || c > 'H' || r < '1' || r > '8')
    throw ParseError("bad tile label '" + std::string(label) + "'");
  const int sq = (r - '1') * 8 + (c - 'A');
  if (kTiles.square_to_index[sq] < 0)
    throw ParseError("center square '" + std::string(label) + "' is not playable");
  return Tile(kTiles.square_to_index[sq]);
}

int Tile::square() const { return kTiles.index_to_square[index_]; }

std::string Tile::label() const {
  const int sq = square();
  std::string s(2, ' ');
  s[0] = static_cast<char>('A' + sq % 8);
  s[1] = static_cast<char>('1' + sq / 8);
  return s;
}

Board Board::initial() {
  Board b;
  b.white = (1ull << 27) | (1ull << 36);  // D4, E5
  b.black = (1ull << 28) | (1ull << 35);  // E4, D5
  b.to_move = Player::Black;
  return b;
}

int Board::disc_count() const { return std::popcount(black | white); }

int Board::count(Player p) const {
  return std::popcount(p == Player::Black ? black : white);
}

uint64_t legal_mask(const Board& board) {
  return legal_mask_for(board.own(), board.opp());
}

std::vector<Tile> legal_moves(const Board& board) {
  uint64_t mask = legal_mask(board);
  std::vector<Tile> out;
  out.reserve(std::popcount(mask));
  while (mask) {
    const int sq = std::countr_zero(mask);
    mask &= mask - 1;
    out.push_back(Tile::from_square(sq));
  }
  return out;  // ascending square order == ascending tile index
}

bool is_legal(const Board& board, Tile tile) {
  return (legal_mask(board) >> tile.square()) & 1ull;
}

Board apply_move(const Board& board, Tile tile) {
  const int sq = tile.square();
  uint64_t own = board.own();
  uint64_t opp = board.opp();
  if ((board.occupied() >> sq) & 1ull)
    throw IllegalMove("tile " + tile.label() + " is occupied");
  const uint64_t flips = flips_for(own, opp, sq);
  if (flips == 0)
    throw IllegalMove("tile " + tile.label() + " flips no discs");

  own |= (1ull << sq) | flips;
  opp &= ~flips;

  Board next;
  if (board.to_move == Player::Black) {
    next.black = own;
    next.white = opp;
  } else {
    next.white = own;
    next.black = opp;
  }
  // Opponent moves next unless they must pass.
  next.to_move = opponent(board.to_move);
  if (legal_mask_for(opp, own) == 0) next.to_move = board.to_move;
  return next;
}

bool game_over(const Board& board) {
  if (legal_mask(board) != 0) return false;
  return legal_mask_for(board.opp(), board.own()) == 0;
}

GameRecord::Outcome outcome_of(const Board& board) {
  const int b = board.count(Player::Black);
  const int w = board.count(Player::White);
  if (b > w) return GameRecord::Outcome::BlackWin;
  if (w > b) return GameRecord::Outcome::WhiteWin;
  return GameRecord::Outcome::Draw;
}

Board replay(const GameRecord& game, int count) {
  const size_t n = count < 0 ? game.moves.size()
                             : std::min<size_t>(count, game.moves.size());
  Board b = Board::initial();
  for (size_t i = 0; i < n; ++i) {
    const Tile t = game.moves[i];
    if (!is_legal(b, t))
      throw IllegalGame("move " + std::to_string(i + 1) + " (" + t.label() +
                        ") is not legal at its step");
    b = apply_move(b, t);
  }
  return b;
}

Dataset generate_games(int64_t count, uint64_t seed) {
  Dataset ds;
  ds.source_tag = Dataset::Source::Synthetic;
  ds.seed = seed;
  ds.games.resize(static_cast<size_t>(count));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < count; ++i) {
    SplitMix64 rng(seed ^ static_cast<uint64_t>(i));
    GameRecord game;
    game.moves.reserve(60);
    Board b = Board::initial();
    for (;;) {
      uint64_t mask = legal_mask(b);
      if (mask == 0) break;  // apply_move keeps the turn on forced passes
      const int n = std::popcount(mask);
      int pick = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      while (pick--) mask &= mask - 1;
      const Tile t = Tile::from_square(std::countr_zero(mask));
      b = apply_move(b, t);
      game.moves.push_back(t);
    }
    game.outcome = outcome_of(b);
    ds.games[static_cast<size_t>(i)] = std::move(game);
  }
  return ds;
}

DatasetStats dataset_stats(const Dataset& dataset) {
  DatasetStats st;
  st.games = static_cast<int64_t>(dataset.games.size());
  if (st.games == 0) return st;
  int64_t total = 0, full = 0;
  int min_len = 61;
  for (const auto& g : dataset.games) {
    const int len = static_cast<int>(g.moves.size());
    total += len;
    if (len == 60) ++full;
    min_len = std::min(min_len, len);
  }
  st.mean_length = static_cast<double>(total) / static_cast<double>(st.games);
  st.min_length = min_len;
  st.full_length_fraction = static_cast<double>(full) / static_cast<double>(st.games);
  return st;
}

}  // namespace othx::oth
