#pragma once

#include <filesystem>
#include <string>

#include "othx/othello.hpp"

namespace othx::oth {

// Text format, UTF-8: one game per line, uppercase tile labels separated by
// single spaces, optional trailing "#" comment, blank lines ignored. Used for
// synthetic output and for ingesting external (championship-style) corpora.

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Parses and replays every game; rejects malformed lines (ParseError, with
// 1-based token index) and games that do not replay (IllegalGame, with line
// number). Games shorter than 4 moves are accepted with a warning on stderr.
Dataset read_dataset(const std::filesystem::path& path,
                     Dataset::Source source_tag = Dataset::Source::Other);

// Canonical serialization of one game ("D3 C4 ..."), used by the writer and
// for content hashing.
std::string game_line(const GameRecord& game);

// FNV-1a 64 over the canonical text serialization of all games.
uint64_t dataset_hash(const Dataset& dataset);

}  // namespace othx::oth
