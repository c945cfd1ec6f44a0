#include "othx/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "othx/hash.hpp"

namespace othx::oth {

std::string game_line(const GameRecord& game) {
  std::string line;
  line.reserve(game.moves.size() * 3);
  for (size_t i = 0; i < game.moves.size(); ++i) {
    if (i) line += ' ';
    line += game.moves[i].label();
  }
  return line;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (const auto& g : dataset.games) out << game_line(g) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path, Dataset::Source source_tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());

  Dataset ds;
  ds.source_tag = source_tag;
  std::string line;
  int64_t line_no = 0;
  int64_t short_games = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    std::istringstream toks(line);
    GameRecord game;
    std::string tok;
    int token_no = 0;
    while (toks >> tok) {
      ++token_no;
      try {
        game.moves.push_back(Tile::parse(tok));
      } catch (const ParseError&) {
        throw ParseError("line " + std::to_string(line_no) + ", token " +
                         std::to_string(token_no) + ": bad tile label '" + tok + "'");
      }
    }
    if (game.moves.empty()) continue;  // blank / comment-only line
    if (game.moves.size() > 60)
      throw IllegalGame("line " + std::to_string(line_no) + ": game longer than 60 moves");
    try {
      const Board final_board = replay(game);
      game.outcome = outcome_of(final_board);
    } catch (const IllegalGame& e) {
      throw IllegalGame("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (game.moves.size() < 4) ++short_games;
    ds.games.push_back(std::move(game));
  }
  if (short_games > 0)
    std::fprintf(stderr, "warning: %lld game(s) shorter than 4 moves in %s\n",
                 static_cast<long long>(short_games), path.string().c_str());
  return ds;
}

uint64_t dataset_hash(const Dataset& dataset) {
  Fnv1a h;
  for (const auto& g : dataset.games) {
    h.update(game_line(g));
    h.update("\n");
  }
  return h.value();
}

}  // namespace othx::oth
