#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "othx/model.hpp"
#include "othx/othello.hpp"

namespace othx::nn {

// Per-step hidden representations from one decoder layer: row r holds the
// hidden vector at the final prefix position that predicts step `prov[r].step`
// of game `prov[r].game`. Rows are (game, step) lexicographic.
struct FeatureMatrix {
  std::string model_id;
  std::string dataset_id;
  int layer = 0;
  int64_t n = 0;
  int h = 0;
  std::vector<std::pair<uint32_t, uint32_t>> prov;  // (game index, step index >= 1)
  std::vector<float> rows;                          // n * h, row-major

  const float* row(int64_t r) const { return rows.data() + r * h; }
};

FeatureMatrix extract_features(const Model<float>& model,
                               const oth::Dataset& games, int layer,
                               const std::string& model_id = "",
                               const std::string& dataset_id = "");

void write_features(const FeatureMatrix& fm, const std::string& path);
FeatureMatrix read_features(const std::string& path);

}  // namespace othx::nn
