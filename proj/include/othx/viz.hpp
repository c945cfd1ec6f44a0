#pragma once

#include <array>
#include <string>
#include <vector>

#include "othx/align.hpp"
#include "othx/model.hpp"
#include "othx/othello.hpp"
#include "othx/pca.hpp"

namespace othx::viz {

struct ScoredTile {
  oth::Tile tile;
  double score = 0.0;
};

// Board-shaped view of a model's next-move belief for one game prefix, plus
// the tiles whose input embeddings sit closest to the top candidate.
struct BoardProjection {
  oth::GameRecord prefix;
  std::array<double, 60> probabilities{};
  std::vector<ScoredTile> top5;      // highest-probability tiles, ties by id
  oth::Tile top_candidate;
  std::vector<ScoredTile> nearest3;  // embedding cosine to top candidate
  std::array<bool, 60> legality_mask{};  // engine ground truth
};

BoardProjection latent_move_projection(const nn::Model<float>& model,
                                       const oth::GameRecord& prefix);

// One step feature per model per step, aligned (B onto A) and jointly
// PCA-reduced so the two trajectories share a basis.
struct OverlayPoint {
  int model = 0;  // 0 = A, 1 = B
  int step = 0;   // 1-based
  std::vector<double> coords;
};

struct OverlayData {
  int dims = 2;
  std::vector<OverlayPoint> points;
};

OverlayData project_game(const nn::Model<float>& model_a,
                         const nn::Model<float>& model_b,
                         const oth::GameRecord& game, int d = 2);

// Deterministic SVG rendering of a BoardProjection per the schema in
// docs/svg_schema.md (element ids tile-A1 .. tile-H8).
void render_board_svg(const BoardProjection& bp, const std::string& path);

// Plot-data file: one point per line "model step x y [z]".
void write_overlay(const OverlayData& data, const std::string& path);

// Layer-similarity grid artifacts.
void write_heatmap_text(const align::HeatmapGrid& grid, const std::string& path);
void render_heatmap_svg(const align::HeatmapGrid& grid, const std::string& path);

}  // namespace othx::viz
