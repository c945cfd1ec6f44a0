#include "othx/features.hpp"

#include <fstream>

#include "json.hpp"
#include "othx/errors.hpp"

namespace othx::nn {

FeatureMatrix extract_features(const Model<float>& model,
                               const oth::Dataset& games, int layer,
                               const std::string& model_id,
                               const std::string& dataset_id) {
  const auto& cfg = model.config();
  if (layer < 0 || layer >= cfg.layers)
    throw LayerError("layer " + std::to_string(layer) + " out of range [0, " +
                     std::to_string(cfg.layers) + ")");

  FeatureMatrix fm;
  fm.model_id = model_id;
  fm.dataset_id = dataset_id;
  fm.layer = layer;
  fm.h = cfg.hidden_dim;

  const int64_t n_games = static_cast<int64_t>(games.games.size());
  std::vector<int64_t> offsets(n_games + 1, 0);
  for (int64_t g = 0; g < n_games; ++g)
    offsets[g + 1] = offsets[g] + static_cast<int64_t>(games.games[g].moves.size());
  fm.n = offsets[n_games];
  fm.rows.assign(static_cast<size_t>(fm.n) * fm.h, 0.0f);
  fm.prov.resize(static_cast<size_t>(fm.n));
  for (int64_t g = 0; g < n_games; ++g)
    for (int64_t s = 0; s < offsets[g + 1] - offsets[g]; ++s)
      fm.prov[static_cast<size_t>(offsets[g] + s)] = {static_cast<uint32_t>(g),
                                                      static_cast<uint32_t>(s + 1)};

  // Games are independent; each writes a disjoint row range.
#pragma omp parallel
  {
    StepwiseRunner runner(model);
#pragma omp for schedule(dynamic, 8)
    for (int64_t g = 0; g < n_games; ++g) {
      runner.step_hidden(games.games[static_cast<size_t>(g)], layer,
                         fm.rows.data() + offsets[g] * fm.h);
    }
  }
  return fm;
}

namespace {
constexpr char kMagic[8] = {'O', 'T', 'H', 'X', 'F', 'E', 'A', 'T'};
constexpr uint32_t kVersion = 1;
}  // namespace

void write_features(const FeatureMatrix& fm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  nlohmann::json j = {{"model_id", fm.model_id},
                      {"dataset_id", fm.dataset_id},
                      {"layer", fm.layer}};
  const std::string js = j.dump();
  const uint32_t jlen = static_cast<uint32_t>(js.size());
  out.write(reinterpret_cast<const char*>(&jlen), sizeof(jlen));
  out.write(js.data(), jlen);
  const uint64_t n = static_cast<uint64_t>(fm.n);
  const uint32_t h = static_cast<uint32_t>(fm.h);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(fm.prov.data()),
            static_cast<std::streamsize>(fm.prov.size() * sizeof(fm.prov[0])));
  out.write(reinterpret_cast<const char*>(fm.rows.data()),
            static_cast<std::streamsize>(fm.rows.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

FeatureMatrix read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string_view(magic, 8) != std::string_view(kMagic, 8))
    throw IoError("not a feature file: " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw IoError("unsupported feature file version " + std::to_string(version));
  uint32_t jlen = 0;
  in.read(reinterpret_cast<char*>(&jlen), sizeof(jlen));
  std::string js(jlen, '\0');
  in.read(js.data(), jlen);
  const auto j = nlohmann::json::parse(js);
  FeatureMatrix fm;
  fm.model_id = j.at("model_id").get<std::string>();
  fm.dataset_id = j.at("dataset_id").get<std::string>();
  fm.layer = j.at("layer").get<int>();
  uint64_t n = 0;
  uint32_t h = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  fm.n = static_cast<int64_t>(n);
  fm.h = static_cast<int>(h);
  fm.prov.resize(n);
  in.read(reinterpret_cast<char*>(fm.prov.data()),
          static_cast<std::streamsize>(fm.prov.size() * sizeof(fm.prov[0])));
  fm.rows.resize(n * h);
  in.read(reinterpret_cast<char*>(fm.rows.data()),
          static_cast<std::streamsize>(fm.rows.size() * sizeof(float)));
  if (!in) throw IoError("truncated feature file: " + path);
  return fm;
}

}  // namespace othx::nn
