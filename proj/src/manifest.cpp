#include "othx/manifest.hpp"

#include <fstream>

#include "json.hpp"
#include "othx/hash.hpp"

namespace othx::cli {

namespace {

using nlohmann::json;

template <typename T>
T require(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key))
    throw ManifestError("missing field: " + path + "." + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ManifestError("bad value for field: " + path + "." + key);
  }
}

template <typename T>
T optional_of(const json& j, const std::string& path, const std::string& key,
              T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ManifestError("bad value for field: " + path + "." + key);
  }
}

nn::ModelConfig parse_model(const json& j, const std::string& path) {
  nn::ModelConfig c;
  const std::string arch = optional_of<std::string>(j, path, "architecture",
                                                    "decoder_only");
  if (arch == "decoder_only")
    c.architecture = nn::Arch::DecoderOnly;
  else if (arch == "encoder_decoder")
    c.architecture = nn::Arch::EncoderDecoder;
  else
    throw ManifestError("bad value for field: " + path + ".architecture");
  c.layers = optional_of<int>(j, path, "layers", 4);
  c.hidden_dim = optional_of<int>(j, path, "hidden_dim", 128);
  c.heads = optional_of<int>(j, path, "heads", 4);
  c.max_seq_len = optional_of<int>(j, path, "max_seq_len", 64);
  c.dropout = optional_of<double>(j, path, "dropout", 0.0);
  c.seed = optional_of<uint64_t>(j, path, "seed", 0);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ManifestError(path + ": " + e.what());
  }
  return c;
}

}  // namespace

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest: " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), {});

  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ManifestError("manifest parse error: " + std::string(e.what()));
  }

  ExperimentManifest m;
  m.source_path = path;
  Fnv1a h;
  h.update(text);
  m.manifest_hash = h.value();

  m.name = require<std::string>(j, "manifest", "name");
  m.out_dir = require<std::string>(j, "manifest", "out_dir");

  {
    if (!j.contains("dataset")) throw ManifestError("missing field: manifest.dataset");
    const auto& d = j.at("dataset");
    m.dataset.source = optional_of<std::string>(d, "dataset", "source", "synthetic");
    if (m.dataset.source == "synthetic") {
      m.dataset.count = require<int64_t>(d, "dataset", "count");
      m.dataset.seed = require<uint64_t>(d, "dataset", "seed");
      if (m.dataset.count < 1) throw ManifestError("bad value for field: dataset.count");
    } else if (m.dataset.source == "file") {
      m.dataset.path = require<std::string>(d, "dataset", "path");
    } else {
      throw ManifestError("bad value for field: dataset.source");
    }
  }

  if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
    throw ManifestError("missing field: manifest.models (non-empty array)");
  for (size_t i = 0; i < j.at("models").size(); ++i) {
    const auto& mj = j.at("models")[i];
    const std::string path_i = "models[" + std::to_string(i) + "]";
    const std::string id = require<std::string>(mj, path_i, "id");
    for (const auto& [eid, _] : m.models)
      if (eid == id) throw ManifestError(path_i + ".id: duplicate model id '" + id + "'");
    m.models.emplace_back(id, parse_model(mj, path_i));
  }

  if (j.contains("train")) {
    const auto& t = j.at("train");
    m.train.batch_size = optional_of<int>(t, "train", "batch_size", 64);
    m.train.learning_rate = optional_of<double>(t, "train", "learning_rate", 1e-3);
    m.train.warmup_steps = optional_of<int>(t, "train", "warmup_steps", 100);
    m.train.total_steps = optional_of<int64_t>(t, "train", "total_steps", 2000);
    m.train.weight_decay = optional_of<double>(t, "train", "weight_decay", 0.01);
    m.train.gradient_clip_norm =
        optional_of<double>(t, "train", "gradient_clip_norm", 1.0);
    m.train.eval_interval = optional_of<int64_t>(t, "train", "eval_interval", 100);
    m.train.seed = optional_of<uint64_t>(t, "train", "seed", 0);
    try {
      m.train.validate();
    } catch (const ConfigError& e) {
      throw ManifestError(std::string("train: ") + e.what());
    }
  }

  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    m.eval.hops = optional_of<std::vector<int>>(e, "eval", "hops", {1, 2});
    for (int hop : m.eval.hops)
      if (hop != 1 && hop != 2) throw ManifestError("bad value for field: eval.hops");
    m.eval.max_games = optional_of<int64_t>(e, "eval", "max_games", 1000);
    m.eval.scales = optional_of<std::vector<int64_t>>(e, "eval", "scales", {});
    if (e.contains("steps_per_scale")) {
      for (const auto& [key, val] : e.at("steps_per_scale").items()) {
        try {
          m.eval.steps_per_scale[std::stoll(key)] = val.get<int64_t>();
        } catch (...) {
          throw ManifestError("bad value for field: eval.steps_per_scale." + key);
        }
      }
    }
  }

  if (j.contains("align")) {
    const auto& a = j.at("align");
    m.align.mode = optional_of<std::string>(a, "align", "mode", "supervised");
    if (m.align.mode != "supervised" && m.align.mode != "unsupervised" &&
        m.align.mode != "both")
      throw ManifestError("bad value for field: align.mode");
    m.align.refinement_iters = optional_of<int>(a, "align", "refinement_iters", 3);
    m.align.adversarial_iters =
        optional_of<int>(a, "align", "adversarial_iters", 10000);
    m.align.layer_a = optional_of<int>(a, "align", "layer_a", -1);
    m.align.layer_b = optional_of<int>(a, "align", "layer_b", -1);
    m.align.fit_games = optional_of<int>(a, "align", "fit_games", 1000);
    m.align.score_games = optional_of<int>(a, "align", "score_games", 200);
    m.align.layer_grid = optional_of<bool>(a, "align", "layer_grid", false);
    m.align.grid_games = optional_of<int>(a, "align", "grid_games", 100);
    m.align.seed = optional_of<uint64_t>(a, "align", "seed", 0);
  }

  if (j.contains("viz")) {
    const auto& v = j.at("viz");
    m.viz.board_model = optional_of<std::string>(v, "viz", "board_model", "");
    m.viz.board_game = optional_of<int>(v, "viz", "board_game", 0);
    m.viz.board_steps = optional_of<int>(v, "viz", "board_steps", 10);
    m.viz.project_game = optional_of<bool>(v, "viz", "project_game", true);
    m.viz.project_dims = optional_of<int>(v, "viz", "project_dims", 2);
  }

  if (!m.viz.board_model.empty()) {
    bool found = false;
    for (const auto& [id, _] : m.models) found |= id == m.viz.board_model;
    if (!found)
      throw ManifestError("viz.board_model: unknown model id '" + m.viz.board_model + "'");
  }

  return m;
}

}  // namespace othx::cli
