#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "othx/dataset_io.hpp"

using namespace othx;
using namespace othx::oth;
namespace fs = std::filesystem;

namespace {
fs::path tmp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "othx_io_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}
}  // namespace

TEST_CASE("round-trip reproduces move sequences exactly") {
  const auto ds = generate_games(1000, 7);
  const auto path = tmp_file("roundtrip.txt");
  write_dataset(ds, path);
  const auto back = read_dataset(path, Dataset::Source::Synthetic);
  REQUIRE(back.games.size() == ds.games.size());
  for (size_t i = 0; i < ds.games.size(); ++i) CHECK(back.games[i] == ds.games[i]);
  CHECK(dataset_hash(back) == dataset_hash(ds));
  CHECK(back.source_tag == Dataset::Source::Synthetic);
}

TEST_CASE("write is byte-deterministic") {
  const auto ds = generate_games(50, 9);
  const auto p1 = tmp_file("det1.txt");
  const auto p2 = tmp_file("det2.txt");
  write_dataset(ds, p1);
  write_dataset(ds, p2);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
  CHECK(!sa.empty());
}

TEST_CASE("malformed token reports its position") {
  const auto path = tmp_file("badtoken.txt");
  write_text(path, "D3 C5 ZZ\n");
  try {
    read_dataset(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("token 3") != std::string::npos);
  }
}

TEST_CASE("illegal replay reports the line number") {
  const auto path = tmp_file("badgame.txt");
  write_text(path, "D3 C5\nD3 D3\n");
  try {
    read_dataset(path);
    FAIL("expected IllegalGame");
  } catch (const IllegalGame& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
  }
}

TEST_CASE("comments, blank lines, and lowercase labels") {
  const auto path = tmp_file("comments.txt");
  write_text(path, "\nD3 C5 # a comment\n\nd3 c5\n# only a comment\n");
  const auto ds = read_dataset(path);
  REQUIRE(ds.games.size() == 2);
  CHECK(ds.games[0] == ds.games[1]);
  CHECK(ds.games[0].moves[0].label() == "D3");
  CHECK(ds.games[0].moves[1].label() == "C5");
}

TEST_CASE("games shorter than 4 moves are accepted (with a warning)") {
  const auto path = tmp_file("short.txt");
  write_text(path, "D3\n");
  const auto ds = read_dataset(path);
  REQUIRE(ds.games.size() == 1);
  CHECK(ds.games[0].moves.size() == 1);
}

TEST_CASE("games longer than 60 moves are rejected") {
  // 61 tokens cannot replay anyway, but the length gate fires first.
  std::string line;
  for (int i = 0; i < 61; ++i) line += "D3 ";
  const auto path = tmp_file("toolong.txt");
  write_text(path, line + "\n");
  CHECK_THROWS_AS(read_dataset(path), IllegalGame);
}
