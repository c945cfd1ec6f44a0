#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "othx/pca.hpp"
#include "othx/rng.hpp"
#include "othx/train.hpp"
#include "othx/viz.hpp"

using namespace othx;
using namespace othx::viz;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd random_matrix(int64_t n, int64_t h, uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd m(n, h);
  for (auto& v : m.reshaped()) v = rng.normal();
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

size_t count_substr(const std::string& hay, const std::string& needle) {
  size_t n = 0, pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    ++n;
    pos += needle.size();
  }
  return n;
}

fs::path tmp_dir() {
  const auto dir = fs::temp_directory_path() / "othx_viz_test";
  fs::create_directories(dir);
  return dir;
}

nn::Model<float> tiny_model(uint64_t seed) {
  nn::ModelConfig cfg;
  cfg.layers = 2;
  cfg.hidden_dim = 16;
  cfg.heads = 2;
  cfg.seed = seed;
  return nn::Model<float>(cfg);
}

}  // namespace

TEST_CASE("pca: collinear points put all variance on the first component") {
  Eigen::MatrixXd pts(3, 5);
  Eigen::RowVectorXd dir = Eigen::RowVectorXd::Zero(5);
  dir << 1, 2, -1, 0.5, 3;
  pts.row(0) = 0.0 * dir;
  pts.row(1) = 1.0 * dir;
  pts.row(2) = 2.5 * dir;
  const auto result = pca(pts, 2);
  CHECK(result.explained_variance_ratio[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(result.explained_variance_ratio[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("pca: full-rank ratios sum to one, components orthonormal") {
  const auto data = random_matrix(50, 8, 1);
  const auto result = pca(data, 8);
  double sum = 0.0;
  for (double r : result.explained_variance_ratio) sum += r;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  for (size_t i = 1; i < result.explained_variance_ratio.size(); ++i)
    CHECK(result.explained_variance_ratio[i] <=
          result.explained_variance_ratio[i - 1] + 1e-12);
  const Eigen::MatrixXd gram =
      result.components * result.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pca: reconstruction error is non-increasing in d") {
  const auto data = random_matrix(80, 10, 2);
  double prev = std::numeric_limits<double>::infinity();
  for (int d = 1; d <= 9; ++d) {
    const auto result = pca(data, d);
    const Eigen::MatrixXd centered = data.rowwise() - result.mean.transpose();
    const Eigen::MatrixXd recon = result.projected * result.components;
    const double err = (centered - recon).squaredNorm();
    CHECK(err <= prev + 1e-9);
    prev = err;
  }
}

TEST_CASE("pca: deterministic sign convention; duplicated rows coincide") {
  auto data = random_matrix(40, 6, 3);
  data.row(7) = data.row(3);  // duplicate
  const auto a = pca(data, 3);
  const auto b = pca(data, 3);
  CHECK((a.components - b.components).cwiseAbs().maxCoeff() == 0.0);
  for (int c = 0; c < 3; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < 6; ++i)
      if (std::abs(a.components(c, i)) > std::abs(a.components(c, arg))) arg = i;
    CHECK(a.components(c, arg) > 0.0);
  }
  CHECK((a.projected.row(7) - a.projected.row(3)).norm() < 1e-12);

  CHECK_THROWS_AS(pca(data, 0), DimError);
  CHECK_THROWS_AS(pca(data, 7), DimError);  // > h
  CHECK_THROWS_AS(pca(random_matrix(3, 8, 4), 3), DimError);  // > n-1
}

TEST_CASE("latent_move_projection invariants") {
  const auto model = tiny_model(5);
  const auto game = oth::generate_games(1, 6).games[0];
  oth::GameRecord prefix;
  prefix.moves.assign(game.moves.begin(), game.moves.begin() + 10);

  const auto bp = latent_move_projection(model, prefix);
  double sum = 0.0;
  for (double p : bp.probabilities) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

  REQUIRE(bp.top5.size() == 5);
  for (size_t i = 1; i < 5; ++i) CHECK(bp.top5[i - 1].score >= bp.top5[i].score);
  CHECK(bp.top_candidate == bp.top5[0].tile);
  // top5 really are the 5 highest
  double sixth_best = -1.0;
  for (int t = 0; t < 60; ++t) {
    bool in_top = false;
    for (const auto& st : bp.top5) in_top |= st.tile.index() == t;
    if (!in_top) sixth_best = std::max(sixth_best, bp.probabilities[t]);
  }
  CHECK(bp.top5.back().score >= sixth_best);

  REQUIRE(bp.nearest3.size() == 3);
  for (const auto& st : bp.nearest3) CHECK(st.tile != bp.top_candidate);

  // legality mask against the engine
  const auto board = oth::replay(prefix);
  for (int t = 0; t < 60; ++t)
    CHECK(bp.legality_mask[t] ==
          oth::is_legal(board, oth::Tile::from_index(t)));

  oth::GameRecord bad;
  bad.moves = {oth::Tile::parse("A1")};
  CHECK_THROWS_AS(latent_move_projection(model, bad), IllegalPrefix);
}

TEST_CASE("board svg: byte-deterministic, schema-conformant") {
  const auto model = tiny_model(7);
  oth::GameRecord empty_prefix;
  const auto bp = latent_move_projection(model, empty_prefix);

  // opening board: 4 discs, 4 legal tiles
  int legal = 0;
  for (bool b : bp.legality_mask) legal += b;
  CHECK(legal == 4);

  const auto p1 = tmp_dir() / "board1.svg";
  const auto p2 = tmp_dir() / "board2.svg";
  render_board_svg(bp, p1.string());
  render_board_svg(bp, p2.string());
  const std::string svg = slurp(p1);
  CHECK(svg == slurp(p2));

  // documented schema (docs/svg_schema.md)
  CHECK(count_substr(svg, "class=\"tile\"") == 64);
  CHECK(count_substr(svg, "id=\"tile-A1\"") == 1);
  CHECK(count_substr(svg, "id=\"tile-H8\"") == 1);
  CHECK(count_substr(svg, "id=\"tile-D4\"") == 1);
  CHECK(count_substr(svg, "class=\"top-box\"") == 1);
  CHECK(count_substr(svg, "class=\"heat\"") == 5);
  CHECK(count_substr(svg, "class=\"shadow\"") == 3);
  CHECK(count_substr(svg, "class=\"disc disc-black\"") == 2);
  CHECK(count_substr(svg, "class=\"disc disc-white\"") == 2);
  CHECK(count_substr(svg, "class=\"legal-dot\"") == 4);
  CHECK(count_substr(svg, "data-legal=\"1\"") == 4);
  CHECK(count_substr(svg, "data-legal=\"0\"") == 56);
  CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") == 0);
}

TEST_CASE("project_game: identical models overlay exactly; output shape") {
  const auto model = tiny_model(9);
  const auto game = oth::generate_games(1, 10).games[0];
  const auto overlay = project_game(model, model, game, 2);
  const int len = static_cast<int>(game.moves.size());
  REQUIRE(static_cast<int>(overlay.points.size()) == 2 * len);
  for (int i = 0; i < len; ++i) {
    const auto& a = overlay.points[static_cast<size_t>(i)];
    const auto& b = overlay.points[static_cast<size_t>(len + i)];
    CHECK(a.model == 0);
    CHECK(b.model == 1);
    CHECK(a.step == b.step);
    REQUIRE(a.coords.size() == 2);
    for (int c = 0; c < 2; ++c)
      CHECK(a.coords[static_cast<size_t>(c)] ==
            doctest::Approx(b.coords[static_cast<size_t>(c)]).epsilon(1e-5));
  }
}

TEST_CASE("project_game: alignment beats a random orthogonal map on most games") {
  // two small models trained on the same data with different seeds
  const auto data = oth::generate_games(300, 11);
  nn::ModelConfig mc;
  mc.layers = 2;
  mc.hidden_dim = 32;
  mc.heads = 2;
  nn::TrainConfig tc;
  tc.total_steps = 250;
  tc.batch_size = 16;
  tc.warmup_steps = 20;
  tc.eval_interval = 100;
  mc.seed = 1;
  const auto a = nn::train(mc, tc, data, false);
  mc.seed = 2;
  tc.seed = 1;
  const auto b = nn::train(mc, tc, data, false);

  SplitMix64 rng(12);
  int aligned_wins = 0;
  const int n_games = 20;
  for (int g = 0; g < n_games; ++g) {
    const auto& game = data.games[static_cast<size_t>(g)];
    oth::Dataset one;
    one.games.push_back(game);
    const auto fa = align::preprocess(
        align::to_eigen(nn::extract_features(a.model, one, mc.layers - 1)));
    const auto fb = align::preprocess(
        align::to_eigen(nn::extract_features(b.model, one, mc.layers - 1)));

    align::PairDictionary pairs;
    for (int i = 0; i < static_cast<int>(game.moves.size()); ++i)
      pairs.pairs.emplace_back(i, i);
    const auto w = align::procrustes_fit(fb, fa, pairs);

    Eigen::MatrixXd gauss(32, 32);
    for (auto& v : gauss.reshaped()) v = rng.normal();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        gauss, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::MatrixXd w_rand = svd.matrixU() * svd.matrixV().transpose();

    const double d_aligned = (fb * w - fa).rowwise().norm().mean();
    const double d_random = (fb * w_rand - fa).rowwise().norm().mean();
    aligned_wins += d_aligned < d_random;
  }
  CHECK(aligned_wins >= static_cast<int>(0.95 * n_games));
}

TEST_CASE("overlay and heatmap artifacts are byte-deterministic") {
  const auto model = tiny_model(13);
  const auto game = oth::generate_games(1, 14).games[0];
  const auto overlay = project_game(model, model, game, 3);
  const auto p1 = tmp_dir() / "ov1.txt";
  const auto p2 = tmp_dir() / "ov2.txt";
  write_overlay(overlay, p1.string());
  write_overlay(overlay, p2.string());
  CHECK(slurp(p1) == slurp(p2));
  const std::string txt = slurp(p1);
  CHECK(txt.find("# model step x y z") == 0);

  align::HeatmapGrid grid;
  grid.rows_a = 2;
  grid.cols_b = 3;
  grid.values = Eigen::MatrixXd::Zero(2, 3);
  grid.values << 0.2, 0.5, 0.9, std::nan(""), 0.4, 0.6;
  const auto h1 = tmp_dir() / "h1.svg";
  const auto h2 = tmp_dir() / "h2.svg";
  render_heatmap_svg(grid, h1.string());
  render_heatmap_svg(grid, h2.string());
  CHECK(slurp(h1) == slurp(h2));
  const std::string svg = slurp(h1);
  CHECK(count_substr(svg, "class=\"cell\"") == 6);
  CHECK(count_substr(svg, "data-value=\"nan\"") == 1);
  CHECK(count_substr(svg, "id=\"cell-1-2\"") == 1);

  const auto t1 = tmp_dir() / "grid.txt";
  write_heatmap_text(grid, t1.string());
  const std::string grid_txt = slurp(t1);
  CHECK(count_substr(grid_txt, "nan") == 1);
  CHECK(count_substr(grid_txt, "\n") == 3);  // header + 2 rows
}
