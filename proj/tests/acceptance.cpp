// Acceptance suite: one criterion per test case, one [PASS]/[FAIL] line per
// criterion on stdout (duplicated to acceptance_results.txt in the working
// directory). Trained checkpoints are cached under acceptance_cache/ keyed
// by their full configuration, so re-runs skip training.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "gradcheck_util.hpp"
#include "naive_othello.hpp"
#include "othx/align.hpp"
#include "othx/dataset_io.hpp"
#include "othx/eval.hpp"
#include "othx/features.hpp"
#include "othx/hash.hpp"
#include "othx/train.hpp"
#include "othx/viz.hpp"

using namespace othx;
namespace fs = std::filesystem;

namespace {

void report_line(bool ok, const char* fmt, ...) {
  char msg[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(msg, sizeof(msg), fmt, args);
  va_end(args);
  std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", msg);
  std::fflush(stdout);
  std::ofstream out("acceptance_results.txt", std::ios::app);
  out << (ok ? "[PASS] " : "[FAIL] ") << msg << "\n";
}

// ---- shared experiment configuration (mirrors manifests/trend.json) --------

constexpr uint64_t kDataSeed = 7;
constexpr int64_t kEvalGames = 500;

nn::ModelConfig default_decoder(uint64_t seed) {
  nn::ModelConfig cfg;  // 4 layers / 128 dim / 4 heads
  cfg.seed = seed;
  return cfg;
}

nn::TrainConfig train_config(int64_t steps) {
  nn::TrainConfig tc;
  tc.batch_size = 64;
  tc.learning_rate = 1e-3;
  tc.warmup_steps = 100;
  tc.total_steps = steps;
  tc.eval_interval = 200;
  tc.seed = 1;
  return tc;
}

int64_t steps_for_scale(int64_t scale) {
  if (scale <= 2000) return 1200;
  if (scale <= 20000) return 2600;
  return 5200;
}

const oth::Dataset& dataset_at_scale(int64_t scale) {
  static std::map<int64_t, oth::Dataset> cache;
  auto it = cache.find(scale);
  if (it == cache.end())
    it = cache.emplace(scale, oth::generate_games(scale, kDataSeed)).first;
  return it->second;
}

// Train (or load from acceptance_cache/) the default decoder at a scale.
nn::LoadedCheckpoint trained_model(int64_t scale, uint64_t model_seed) {
  fs::create_directories("acceptance_cache");
  const int64_t steps = steps_for_scale(scale);
  char name[128];
  std::snprintf(name, sizeof(name), "acceptance_cache/dec-s%llu-sc%lld-t%lld.ckpt",
                static_cast<unsigned long long>(model_seed),
                static_cast<long long>(scale), static_cast<long long>(steps));
  if (fs::exists(name)) return nn::load_checkpoint(name);

  std::fprintf(stderr, "[acceptance] training seed=%llu scale=%lld steps=%lld\n",
               static_cast<unsigned long long>(model_seed),
               static_cast<long long>(scale), static_cast<long long>(steps));
  const auto split = nn::split_dataset(dataset_at_scale(scale));
  auto result = nn::train(default_decoder(model_seed), train_config(steps),
                          split.train);
  nn::save_checkpoint(result.model, result.meta, name);
  return nn::load_checkpoint(name);
}

oth::Dataset eval_split(int64_t scale, int64_t max_games = kEvalGames) {
  const auto split = nn::split_dataset(dataset_at_scale(scale));
  oth::Dataset test;
  test.source_tag = split.test.source_tag;
  const int64_t n =
      std::min<int64_t>(max_games, static_cast<int64_t>(split.test.games.size()));
  test.games.assign(split.test.games.begin(), split.test.games.begin() + n);
  return test;
}

struct HopRates {
  double hop1 = 0.0, hop2 = 0.0;
};

// Evaluation results are deterministic given (checkpoint, test set); cache
// them next to the checkpoints.
HopRates eval_rates(int64_t scale, uint64_t model_seed) {
  char name[128];
  std::snprintf(name, sizeof(name), "acceptance_cache/eval-s%llu-sc%lld.txt",
                static_cast<unsigned long long>(model_seed),
                static_cast<long long>(scale));
  HopRates rates;
  if (fs::exists(name)) {
    std::ifstream in(name);
    in >> rates.hop1 >> rates.hop2;
    if (in) return rates;
  }
  const auto ck = trained_model(scale, model_seed);
  const auto test = eval_split(scale);
  rates.hop1 = eval::eval_1hop(ck.model, test).error_rate;
  rates.hop2 = eval::eval_2hop(ck.model, test).error_rate;
  std::ofstream out(name);
  out.precision(17);
  out << rates.hop1 << " " << rates.hop2 << "\n";
  return rates;
}

Eigen::MatrixXd random_matrix(int64_t n, int64_t h, uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd m(n, h);
  for (auto& v : m.reshaped()) v = rng.normal();
  return m;
}

Eigen::MatrixXd random_orthogonal(int64_t h, uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(h, h, seed));
  return Eigen::MatrixXd(qr.householderQ());
}

Eigen::MatrixXd clustered_matrix(int64_t n, int64_t h, int clusters,
                                 uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd centers(clusters, h);
  for (auto& v : centers.reshaped()) v = rng.normal();
  std::vector<int> assign;
  for (int j = 0; j < clusters; ++j)
    for (int c = 0; c < static_cast<int>(2 + 3.0 * clusters / (j + 1)); ++c)
      assign.push_back(j);
  Eigen::MatrixXd m(n, h);
  for (int64_t i = 0; i < n; ++i) {
    const int z = assign[rng.below(assign.size())];
    for (int64_t j = 0; j < h; ++j) m(i, j) = centers(z, j) + 0.3 * rng.normal();
  }
  return m;
}

// Features for the cross-model criteria: fit rows from 1000 validation
// games, held-out scoring rows from 200 test games.
struct CrossModelFeatures {
  nn::FeatureMatrix f1, f2;
  align::AlignOptions opts;
};

CrossModelFeatures cross_model_features(const nn::Model<float>& a,
                                        const nn::Model<float>& b) {
  const auto split = nn::split_dataset(dataset_at_scale(20000));
  oth::Dataset games;
  games.games.assign(split.val.games.begin(), split.val.games.begin() + 1000);
  const int64_t fit_games = static_cast<int64_t>(games.games.size());
  games.games.insert(games.games.end(), split.test.games.begin(),
                     split.test.games.begin() + 200);
  int64_t fit_rows = 0;
  for (int64_t g = 0; g < fit_games; ++g)
    fit_rows += static_cast<int64_t>(games.games[static_cast<size_t>(g)].moves.size());

  CrossModelFeatures out;
  out.f1 = nn::extract_features(a, games, a.config().layers - 1, "m1");
  out.f2 = nn::extract_features(b, games, b.config().layers - 1, "m2");
  out.opts.seed = 1;
  for (int64_t i = 0; i < out.f1.n; ++i)
    (i < fit_rows ? out.opts.fit_rows : out.opts.score_rows).push_back(i);
  return out;
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

}  // namespace

TEST_CASE("criterion 1: engine vs naive oracle on 10,000 random games") {
  const double t0 = omp_get_wtime();
  const auto games = oth::generate_games(10000, 20240301);
  std::atomic<int64_t> board_mismatches{0}, legal_mismatches{0}, plies{0};
#pragma omp parallel for schedule(dynamic, 64)
  for (int64_t g = 0; g < static_cast<int64_t>(games.games.size()); ++g) {
    const auto& game = games.games[static_cast<size_t>(g)];
    oth::Board b = oth::Board::initial();
    auto nb = naive::NaiveBoard::initial();
    int64_t local_plies = 0;
    for (oth::Tile mv : game.moves) {
      // legal sets must agree square-for-square
      const uint64_t mask = oth::legal_mask(b);
      uint64_t naive_mask = 0;
      for (auto [r, c] : naive::naive_legal_moves(nb))
        naive_mask |= 1ull << (r * 8 + c);
      if (mask != naive_mask) ++legal_mismatches;
      b = oth::apply_move(b, mv);
      nb = naive::naive_apply(nb, mv.row(), mv.col());
      uint64_t nblack = 0, nwhite = 0;
      for (int sq = 0; sq < 64; ++sq) {
        if (nb.cell[sq / 8][sq % 8] == naive::kBlack) nblack |= 1ull << sq;
        if (nb.cell[sq / 8][sq % 8] == naive::kWhite) nwhite |= 1ull << sq;
      }
      const bool turn_match =
          (b.to_move == oth::Player::Black) == (nb.to_move == naive::kBlack);
      if (b.black != nblack || b.white != nwhite || !turn_match)
        ++board_mismatches;
      ++local_plies;
    }
    plies += local_plies;
  }
  const double dt = omp_get_wtime() - t0;
  const bool ok = board_mismatches == 0 && legal_mismatches == 0 && dt <= 60.0;
  report_line(ok,
              "criterion 1: oracle equivalence over 10000 games (%lld plies, "
              "%lld board / %lld legal-set mismatches, %.1f s)",
              static_cast<long long>(plies.load()),
              static_cast<long long>(board_mismatches.load()),
              static_cast<long long>(legal_mismatches.load()), dt);
  CHECK(ok);
}

TEST_CASE("criterion 2: move-tree counts, depths 1-6") {
  const double t0 = omp_get_wtime();
  const uint64_t expected[6] = {4, 12, 56, 244, 1396, 8200};

  // main engine enumerator
  struct Counter {
    static uint64_t count(const oth::Board& b, int depth) {
      if (depth == 0) return 1;
      const auto moves = oth::legal_moves(b);
      if (moves.empty()) return 1;
      uint64_t total = 0;
      for (oth::Tile t : moves) total += count(oth::apply_move(b, t), depth - 1);
      return total;
    }
  };
  bool ok = true;
  for (int d = 1; d <= 6; ++d) {
    const uint64_t main_count = Counter::count(oth::Board::initial(), d);
    const uint64_t naive_count =
        naive::naive_count_sequences(naive::NaiveBoard::initial(), d);
    ok = ok && main_count == expected[d - 1] && naive_count == expected[d - 1];
  }
  const double dt = omp_get_wtime() - t0;
  ok = ok && dt <= 120.0;
  report_line(ok, "criterion 2: depth 1-6 sequence counts match exactly (%.1f s)", dt);
  CHECK(ok);
}

TEST_CASE("criterion 3: generator statistics at 100,000 games") {
  const auto stats = oth::dataset_stats(oth::generate_games(100000, 20240302));
  const bool ok = stats.mean_length >= 59.5 && stats.mean_length <= 60.0 &&
                  stats.full_length_fraction >= 0.97;
  report_line(ok,
              "criterion 3: 100k-game stats mean_length=%.3f full_fraction=%.4f "
              "(bands [59.5, 60.0] / >= 0.97)",
              stats.mean_length, stats.full_length_fraction);
  CHECK(ok);
}

TEST_CASE("criterion 4: analytic vs finite-difference gradients") {
  const double t0 = omp_get_wtime();
  nn::ModelConfig cfg;
  cfg.architecture = nn::Arch::DecoderOnly;
  cfg.layers = 1;
  cfg.hidden_dim = 8;
  cfg.heads = 2;
  cfg.seed = 3;
  const double worst = gradcheck::max_group_rel_error(cfg, false);
  const double dt = omp_get_wtime() - t0;
  const bool ok = worst < 1e-3 && dt <= 60.0;
  report_line(ok,
              "criterion 4: gradient check 1-layer/8-dim, worst group rel err "
              "%.2e (tolerance 1e-3, %.1f s)",
              worst, dt);
  CHECK(ok);
}

TEST_CASE("criterion 5: data-size trend at 2k/20k/200k") {
  const HopRates r2k = eval_rates(2000, 1);
  const HopRates r20k = eval_rates(20000, 1);
  const HopRates r200k = eval_rates(200000, 1);
  const bool decreasing = r2k.hop1 > r20k.hop1 && r20k.hop1 > r200k.hop1;
  const bool ok = decreasing && r20k.hop1 <= 0.45 && r200k.hop1 <= 0.20;
  report_line(ok,
              "criterion 5: 1-hop error 2k=%.3f 20k=%.3f 200k=%.3f "
              "(strictly decreasing; <= 0.45 at 20k; <= 0.20 at 200k)",
              r2k.hop1, r20k.hop1, r200k.hop1);
  CHECK(ok);
}

TEST_CASE("criterion 6: 2-hop error dominates 1-hop for every checkpoint") {
  bool ok = true;
  std::string detail;
  for (const auto& [scale, seed] : std::vector<std::pair<int64_t, uint64_t>>{
           {2000, 1}, {20000, 1}, {200000, 1}, {20000, 2}}) {
    const HopRates r = eval_rates(scale, seed);
    ok = ok && r.hop2 >= r.hop1;
    char buf[96];
    std::snprintf(buf, sizeof(buf), " [sc%lld/s%llu 1hop=%.3f 2hop=%.3f]",
                  static_cast<long long>(scale),
                  static_cast<unsigned long long>(seed), r.hop1, r.hop2);
    detail += buf;
  }
  report_line(ok, "criterion 6: 2-hop >= 1-hop on the same test split%s",
              detail.c_str());
  CHECK(ok);
}

TEST_CASE("criterion 7: alignment synthetic recovery") {
  const double t0 = omp_get_wtime();

  // supervised, noiseless rotation
  const auto f = clustered_matrix(1200, 24, 30, 101);
  const auto rot = random_orthogonal(24, 201);
  const auto [ms0, rs0] = align::align_supervised(f, (f * rot).eval(), 2);

  // supervised, noise sigma = 0.01
  SplitMix64 rng(301);
  Eigen::MatrixXd noisy = f * rot;
  for (auto& v : noisy.reshaped()) v += 0.01 * rng.normal();
  const auto [ms1, rs1] = align::align_supervised(f, noisy, 2);

  // unsupervised (defaults) on the noiseless rotation
  align::AlignOptions opts;
  opts.seed = 1;
  const auto [mu, ru] = align::align_unsupervised(f, (f * rot).eval(), 8000, 3, opts);

  const double dt = omp_get_wtime() - t0;
  const bool ok = rs0.mean_cosine >= 0.999 && rs1.mean_cosine >= 0.99 &&
                  ru.mean_cosine >= 0.95 && dt <= 300.0;
  report_line(ok,
              "criterion 7: synthetic recovery supervised=%.4f (>=0.999) "
              "noisy=%.4f (>=0.99) unsupervised=%.4f (>=0.95) in %.0f s (<=300)",
              rs0.mean_cosine, rs1.mean_cosine, ru.mean_cosine, dt);
  CHECK(ok);
}

TEST_CASE("criterion 8: cross-model alignment at 20k") {
  const auto a = trained_model(20000, 1);
  const auto b = trained_model(20000, 2);
  const auto feats = cross_model_features(a.model, b.model);

  const auto [ms, rs] = align::align_supervised(feats.f1, feats.f2, 3, feats.opts);
  const auto [mu, ru] =
      align::align_unsupervised(feats.f1, feats.f2, 15000, 3, feats.opts);

  const bool ok = rs.mean_cosine >= 0.60 &&
                  rs.mean_cosine >= rs.baseline_mean_cosine + 0.20 &&
                  std::abs(ru.mean_cosine - rs.mean_cosine) <= 0.15;
  report_line(ok,
              "criterion 8: cross-model supervised=%.4f (baseline %.4f, need "
              ">=0.60 and baseline+0.20) unsupervised=%.4f (within +-0.15)",
              rs.mean_cosine, rs.baseline_mean_cosine, ru.mean_cosine);
  CHECK(ok);
}

TEST_CASE("criterion 9: layer-grid structure") {
  const auto a = trained_model(20000, 1);
  const auto b = trained_model(20000, 2);
  const auto split = nn::split_dataset(dataset_at_scale(20000));
  oth::Dataset games;
  games.games.assign(split.val.games.begin(), split.val.games.begin() + 150);

  align::AlignOptions opts;
  opts.seed = 1;
  const auto grid = align::layer_similarity_matrix(
      a.model, b.model, games, align::Mode::Supervised, 2, 0, opts);

  std::vector<double> cells;
  for (int l = 0; l < grid.rows_a; ++l)
    for (int m = 0; m < grid.cols_b; ++m)
      if (!std::isnan(grid.values(l, m))) cells.push_back(grid.values(l, m));
  std::sort(cells.begin(), cells.end(), std::greater<>());
  const double last_last = grid.values(grid.rows_a - 1, grid.cols_b - 1);
  const size_t quartile = (cells.size() + 3) / 4;
  const bool in_top = !cells.empty() && !std::isnan(last_last) &&
                      last_last >= cells[std::min(cells.size() - 1, quartile - 1)];

  // artifacts for criterion 10's reproducibility check as well
  viz::write_heatmap_text(grid, "acceptance_cache/layer-grid.txt");
  viz::render_heatmap_svg(grid, "acceptance_cache/layer-grid.svg");

  std::string row;
  for (int m = 0; m < grid.cols_b; ++m) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), " %.3f", grid.values(grid.rows_a - 1, m));
    row += buf;
  }
  report_line(in_top,
              "criterion 9: (last,last)=%.4f ranks in the top quartile of %zu "
              "cells (last row:%s)",
              last_last, cells.size(), row.c_str());
  CHECK(in_top);
}

TEST_CASE("criterion 10: projection legality and artifact reproducibility") {
  const auto ck = trained_model(200000, 1);
  const auto test = eval_split(200000, 2000);

  SplitMix64 rng(20240303);
  int legal = 0;
  const int samples = 500;
  viz::BoardProjection last_bp;
  for (int s = 0; s < samples; ++s) {
    const auto& game = test.games[rng.below(test.games.size())];
    const int steps = 1 + static_cast<int>(rng.below(game.moves.size() - 1));
    oth::GameRecord prefix;
    prefix.moves.assign(game.moves.begin(), game.moves.begin() + steps);
    const auto bp = viz::latent_move_projection(ck.model, prefix);
    legal += bp.legality_mask[static_cast<size_t>(bp.top_candidate.index())];
    if (s + 1 == samples) last_bp = bp;
  }
  const double frac = static_cast<double>(legal) / samples;

  // emitted files: schema-valid and byte-reproducible
  viz::render_board_svg(last_bp, "acceptance_cache/board-a.svg");
  viz::render_board_svg(last_bp, "acceptance_cache/board-b.svg");
  const std::string svg = slurp("acceptance_cache/board-a.svg");
  const bool svg_repro = svg == slurp("acceptance_cache/board-b.svg");
  const bool svg_schema = count_substr(svg, "class=\"tile\"") == 64 &&
                          count_substr(svg, "class=\"top-box\"") == 1 &&
                          count_substr(svg, "class=\"heat\"") == 5 &&
                          count_substr(svg, "class=\"shadow\"") == 3 &&
                          svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") == 0;

  const auto overlay =
      viz::project_game(ck.model, ck.model, test.games[0], 2);
  viz::write_overlay(overlay, "acceptance_cache/overlay-a.txt");
  viz::write_overlay(overlay, "acceptance_cache/overlay-b.txt");
  const bool overlay_repro =
      slurp("acceptance_cache/overlay-a.txt") == slurp("acceptance_cache/overlay-b.txt");

  const bool ok = frac >= 0.80 && svg_repro && svg_schema && overlay_repro;
  report_line(ok,
              "criterion 10: top-1 legal for %.1f%% of %d test prefixes "
              "(>=80%%); svg schema=%d repro=%d overlay repro=%d",
              100.0 * frac, samples, svg_schema, svg_repro, overlay_repro);
  CHECK(ok);
}

TEST_CASE("criterion 11: end-to-end smoke manifest under 10 minutes") {
  const double t0 = omp_get_wtime();
  fs::remove_all("out/smoke");
  const std::string manifest =
      std::string(OTHX_SOURCE_DIR) + "/manifests/smoke.json";
  const std::string othx = fs::exists("othx") ? "./othx" : "./build/othx";

  int rc = 0;
  for (const char* stage : {"train", "eval", "align", "viz"}) {
    const std::string cmd = othx + " " + stage + " --manifest " + manifest +
                            " >> acceptance_smoke.log 2>&1";
    rc = std::system(cmd.c_str());
    if (rc != 0) break;
  }
  const double dt = omp_get_wtime() - t0;

  bool artifacts = false;
  if (rc == 0) {
    int svgs = 0, reports = 0;
    for (const auto& e : fs::recursive_directory_iterator("out/smoke")) {
      svgs += e.path().extension() == ".svg";
      reports += e.path().extension() == ".txt" &&
                 e.path().parent_path().filename() == "reports";
    }
    artifacts = svgs >= 1 && reports >= 3;
  }
  const bool ok = rc == 0 && dt <= 600.0 && artifacts;
  report_line(ok,
              "criterion 11: smoke manifest (train+eval+align+viz) exit=%d in "
              "%.0f s (<=600), artifacts=%d",
              rc, dt, artifacts);
  CHECK(ok);
}
