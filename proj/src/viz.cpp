#include "othx/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace othx::viz {

namespace {

constexpr int kTile = 56;
constexpr int kBoardPx = kTile * 8;

std::string fmt(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::string square_label(int sq) {
  std::string s(2, ' ');
  s[0] = static_cast<char>('A' + sq % 8);
  s[1] = static_cast<char>('1' + sq / 8);
  return s;
}

std::vector<ScoredTile> top_scored(const double* scores, int count,
                                   int exclude = -1) {
  std::vector<int> idx;
  for (int i = 0; i < 60; ++i)
    if (i != exclude) idx.push_back(i);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;  // ties by lowest id
  });
  std::vector<ScoredTile> out;
  for (int i = 0; i < count && i < static_cast<int>(idx.size()); ++i)
    out.push_back({oth::Tile::from_index(idx[static_cast<size_t>(i)]),
                   scores[idx[static_cast<size_t>(i)]]});
  return out;
}

}  // namespace

BoardProjection latent_move_projection(const nn::Model<float>& model,
                                       const oth::GameRecord& prefix) {
  oth::Board board;
  try {
    board = oth::replay(prefix);
  } catch (const IllegalGame& e) {
    throw IllegalPrefix(e.what());
  }

  BoardProjection bp;
  bp.prefix = prefix;
  const auto tokens = nn::Tokenizer::encode_game(prefix);
  const auto dist = nn::next_move_distribution(model, tokens);
  std::copy(dist.begin(), dist.end(), bp.probabilities.begin());

  bp.top5 = top_scored(bp.probabilities.data(), 5);
  bp.top_candidate = bp.top5.front().tile;

  // cosine similarity in the input token-embedding table
  const auto& emb = model.token_embedding();
  const int h = model.config().hidden_dim;
  const int top = bp.top_candidate.index();
  auto row = [&](int t) { return emb.ptr() + static_cast<int64_t>(t) * h; };
  auto norm = [&](const float* p) {
    double s = 0;
    for (int e = 0; e < h; ++e) s += static_cast<double>(p[e]) * p[e];
    return std::sqrt(s);
  };
  const double ntop = norm(row(top));
  double cosines[60];
  for (int t = 0; t < 60; ++t) {
    if (t == top) {
      cosines[t] = -2.0;
      continue;
    }
    double dot = 0;
    for (int e = 0; e < h; ++e)
      dot += static_cast<double>(row(top)[e]) * row(t)[e];
    cosines[t] = dot / std::max(1e-30, ntop * norm(row(t)));
  }
  bp.nearest3 = top_scored(cosines, 3, top);

  const uint64_t legal = oth::legal_mask(board);
  for (int t = 0; t < 60; ++t)
    bp.legality_mask[static_cast<size_t>(t)] =
        (legal >> oth::Tile::from_index(t).square()) & 1ull;
  return bp;
}

OverlayData project_game(const nn::Model<float>& model_a,
                         const nn::Model<float>& model_b,
                         const oth::GameRecord& game, int d) {
  if (model_a.config().hidden_dim != model_b.config().hidden_dim)
    throw ConfigError("project_game: models have different hidden dims");
  const int len = static_cast<int>(game.moves.size());
  if (len < 2) throw ConfigError("project_game: game needs at least 2 moves");

  oth::Dataset ds;
  ds.games.push_back(game);
  const auto fa = nn::extract_features(model_a, ds, model_a.config().layers - 1);
  const auto fb = nn::extract_features(model_b, ds, model_b.config().layers - 1);
  const Eigen::MatrixXd fa_p = align::preprocess(align::to_eigen(fa));
  const Eigen::MatrixXd fb_p = align::preprocess(align::to_eigen(fb));

  // supervised map (step-paired Procrustes), B onto A
  align::PairDictionary pairs;
  pairs.construction = align::PairDictionary::Construction::Given;
  for (int i = 0; i < len; ++i)
    pairs.pairs.emplace_back(static_cast<int32_t>(i), static_cast<int32_t>(i));
  const Eigen::MatrixXd w = align::procrustes_fit(fb_p, fa_p, pairs);

  Eigen::MatrixXd joint(2 * len, fa_p.cols());
  joint.topRows(len) = fa_p;
  joint.bottomRows(len) = fb_p * w;
  const PcaResult p = pca(joint, d);

  OverlayData out;
  out.dims = d;
  for (int m = 0; m < 2; ++m)
    for (int i = 0; i < len; ++i) {
      OverlayPoint pt;
      pt.model = m;
      pt.step = i + 1;
      const auto r = p.projected.row(m * len + i);
      for (int c = 0; c < d; ++c) pt.coords.push_back(r(c));
      out.points.push_back(std::move(pt));
    }
  return out;
}

void render_board_svg(const BoardProjection& bp, const std::string& path) {
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kBoardPx
      << " " << kBoardPx << "\" width=\"" << kBoardPx << "\" height=\""
      << kBoardPx << "\">\n";
  out << "<rect id=\"board\" x=\"0\" y=\"0\" width=\"" << kBoardPx
      << "\" height=\"" << kBoardPx << "\" fill=\"#2e8b57\"/>\n";

  // all 64 squares, row-major; playable tiles carry the ground-truth legality
  for (int sq = 0; sq < 64; ++sq) {
    const int x = (sq % 8) * kTile;
    const int y = (sq / 8) * kTile;
    out << "<rect id=\"tile-" << square_label(sq) << "\" class=\"tile\" x=\""
        << x << "\" y=\"" << y << "\" width=\"" << kTile << "\" height=\""
        << kTile << "\" fill=\"none\" stroke=\"#1d5c39\" stroke-width=\"1\"";
    const bool playable = !(sq == 27 || sq == 28 || sq == 35 || sq == 36);
    if (playable) {
      const int t = oth::Tile::from_square(sq).index();
      out << " data-legal=\"" << (bp.legality_mask[static_cast<size_t>(t)] ? 1 : 0)
          << "\"";
    }
    out << "/>\n";
  }

  // blue heat for the top-5 candidates, opacity linear in p / p_top
  const double p_top = std::max(1e-30, bp.top5.front().score);
  for (const auto& st : bp.top5) {
    const int sq = st.tile.square();
    const double opacity = 0.15 + 0.85 * (st.score / p_top);
    out << "<rect class=\"heat\" data-tile=\"" << st.tile.label()
        << "\" data-prob=\"" << fmt(st.score, 4) << "\" x=\""
        << (sq % 8) * kTile + 2 << "\" y=\"" << (sq / 8) * kTile + 2
        << "\" width=\"" << kTile - 4 << "\" height=\"" << kTile - 4
        << "\" fill=\"#1f77d0\" fill-opacity=\"" << fmt(opacity, 4) << "\"/>\n";
  }

  // shadows for the tiles with embeddings closest to the top candidate
  const double sim_max = std::max(1e-30, bp.nearest3.front().score);
  for (const auto& st : bp.nearest3) {
    const int sq = st.tile.square();
    const double opacity = 0.2 + 0.5 * std::max(0.0, st.score) / std::max(1e-30, std::max(0.0, sim_max));
    out << "<rect class=\"shadow\" data-tile=\"" << st.tile.label()
        << "\" data-sim=\"" << fmt(st.score, 4) << "\" x=\""
        << (sq % 8) * kTile + 8 << "\" y=\"" << (sq / 8) * kTile + 8
        << "\" width=\"" << kTile - 16 << "\" height=\"" << kTile - 16
        << "\" fill=\"#222222\" fill-opacity=\"" << fmt(opacity, 4) << "\"/>\n";
  }

  // black box around the top candidate
  {
    const int sq = bp.top_candidate.square();
    out << "<rect class=\"top-box\" data-tile=\"" << bp.top_candidate.label()
        << "\" x=\"" << (sq % 8) * kTile + 2 << "\" y=\"" << (sq / 8) * kTile + 2
        << "\" width=\"" << kTile - 4 << "\" height=\"" << kTile - 4
        << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"4\"/>\n";
  }

  // discs from the replayed prefix
  const oth::Board board = oth::replay(bp.prefix);
  for (int sq = 0; sq < 64; ++sq) {
    const bool black = (board.black >> sq) & 1ull;
    const bool white = (board.white >> sq) & 1ull;
    if (!black && !white) continue;
    out << "<circle class=\"disc disc-" << (black ? "black" : "white")
        << "\" cx=\"" << (sq % 8) * kTile + kTile / 2 << "\" cy=\""
        << (sq / 8) * kTile + kTile / 2 << "\" r=\"" << kTile / 2 - 6
        << "\" fill=\"" << (black ? "#111111" : "#f5f5f5")
        << "\" stroke=\"#000000\" stroke-width=\"1\"/>\n";
  }

  // gold dots on the engine-legal tiles
  for (int t = 0; t < 60; ++t) {
    if (!bp.legality_mask[static_cast<size_t>(t)]) continue;
    const int sq = oth::Tile::from_index(t).square();
    out << "<circle class=\"legal-dot\" cx=\"" << (sq % 8) * kTile + kTile / 2
        << "\" cy=\"" << (sq / 8) * kTile + kTile / 2
        << "\" r=\"4\" fill=\"#ffd700\"/>\n";
  }

  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

void write_overlay(const OverlayData& data, const std::string& path) {
  auto out = open_out(path);
  out << "# model step";
  for (int c = 0; c < data.dims; ++c) out << " " << static_cast<char>('x' + c);
  out << "\n";
  for (const auto& pt : data.points) {
    out << pt.model << " " << pt.step;
    for (double c : pt.coords) out << " " << fmt(c, 6);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

void write_heatmap_text(const align::HeatmapGrid& grid, const std::string& path) {
  auto out = open_out(path);
  out << "# layer similarity grid mode="
      << (grid.mode == align::Mode::Supervised ? "supervised" : "unsupervised")
      << " rows=source_layers cols=target_layers\n";
  for (int l = 0; l < grid.rows_a; ++l) {
    for (int m = 0; m < grid.cols_b; ++m) {
      if (m) out << " ";
      const double v = grid.values(l, m);
      out << (std::isnan(v) ? std::string("nan") : fmt(v, 6));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

void render_heatmap_svg(const align::HeatmapGrid& grid, const std::string& path) {
  const int cell = 64;
  const int margin = 48;
  const int w = margin + grid.cols_b * cell + 8;
  const int h = margin + grid.rows_a * cell + 8;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < grid.rows_a; ++l)
    for (int m = 0; m < grid.cols_b; ++m) {
      const double v = grid.values(l, m);
      if (!std::isnan(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;

  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " "
      << h << "\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"#ffffff\"/>\n";
  for (int l = 0; l < grid.rows_a; ++l) {
    for (int m = 0; m < grid.cols_b; ++m) {
      const double v = grid.values(l, m);
      const int x = margin + m * cell;
      const int y = margin + l * cell;
      std::string fill = "#999999";
      std::string value = "nan";
      if (!std::isnan(v)) {
        const double t = (v - lo) / span;
        const int r = static_cast<int>(std::lround(255 - 224 * t));
        const int g = static_cast<int>(std::lround(255 - 136 * t));
        char buf[16];
        std::snprintf(buf, sizeof(buf), "#%02x%02xff", r, g);
        fill = buf;
        value = fmt(v, 6);
      }
      out << "<rect id=\"cell-" << l << "-" << m << "\" class=\"cell\" x=\"" << x
          << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" data-value=\"" << value << "\" fill=\"" << fill
          << "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    }
  }
  for (int m = 0; m < grid.cols_b; ++m)
    out << "<text class=\"col-label\" x=\"" << margin + m * cell + cell / 2
        << "\" y=\"" << margin - 12
        << "\" font-size=\"14\" text-anchor=\"middle\">B" << m << "</text>\n";
  for (int l = 0; l < grid.rows_a; ++l)
    out << "<text class=\"row-label\" x=\"" << margin - 12 << "\" y=\""
        << margin + l * cell + cell / 2 + 5
        << "\" font-size=\"14\" text-anchor=\"middle\">A" << l << "</text>\n";
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace othx::viz
