#include "othx/pipeline.hpp"

#include <cstdio>
#include <filesystem>

#include "othx/align.hpp"
#include "othx/dataset_io.hpp"
#include "othx/eval.hpp"
#include "othx/features.hpp"
#include "othx/hash.hpp"
#include "othx/report.hpp"
#include "othx/sweep.hpp"
#include "othx/viz.hpp"

namespace othx::cli {

namespace fs = std::filesystem;

namespace {

void ensure_layout(const fs::path& out_dir) {
  for (const char* sub : {"datasets", "checkpoints", "features", "reports", "figures"})
    fs::create_directories(out_dir / sub);
}

// Stable id of (model config, train config, dataset): names the checkpoint
// artifact before training happens, so later stages can resolve it.
uint64_t run_hash(const ExperimentManifest& m, const std::string& model_id,
                  const nn::ModelConfig& mc) {
  Fnv1a h;
  h.update(model_id);
  h.update_pod(static_cast<uint8_t>(mc.architecture));
  h.update_pod(mc.layers);
  h.update_pod(mc.hidden_dim);
  h.update_pod(mc.heads);
  h.update_pod(mc.max_seq_len);
  h.update_pod(mc.dropout);
  h.update_pod(mc.seed);
  h.update_pod(m.train.batch_size);
  h.update_pod(m.train.learning_rate);
  h.update_pod(m.train.warmup_steps);
  h.update_pod(m.train.total_steps);
  h.update_pod(m.train.weight_decay);
  h.update_pod(m.train.gradient_clip_norm);
  h.update_pod(m.train.seed);
  h.update(m.dataset.source);
  h.update_pod(m.dataset.count);
  h.update_pod(m.dataset.seed);
  h.update(m.dataset.path);
  return h.value();
}

fs::path checkpoint_path(const ExperimentManifest& m, const std::string& model_id,
                         const nn::ModelConfig& mc) {
  return fs::path(m.out_dir) / "checkpoints" /
         (model_id + "-" + short_hex(run_hash(m, model_id, mc)) + ".ckpt");
}

oth::Dataset load_or_generate_dataset(const ExperimentManifest& m) {
  if (m.dataset.source == "file") {
    if (!fs::exists(m.dataset.path))
      throw MissingArtifact("dataset (expected file at " + m.dataset.path + ")");
    return oth::read_dataset(m.dataset.path, oth::Dataset::Source::Championship);
  }
  // synthetic datasets are deterministic in (count, seed); regenerate and
  // persist once under datasets/
  auto ds = oth::generate_games(m.dataset.count, m.dataset.seed);
  const uint64_t hash = oth::dataset_hash(ds);
  const fs::path path = fs::path(m.out_dir) / "datasets" /
                        ("synthetic-c" + std::to_string(m.dataset.count) + "-s" +
                         std::to_string(m.dataset.seed) + "-" + short_hex(hash) +
                         ".txt");
  if (!fs::exists(path)) {
    ensure_layout(m.out_dir);
    oth::write_dataset(ds, path);
  }
  return ds;
}

const nn::ModelConfig& config_of(const ExperimentManifest& m,
                                 const std::string& model_id) {
  for (const auto& [id, cfg] : m.models)
    if (id == model_id) return cfg;
  throw ManifestError("unknown model id '" + model_id + "'");
}

nn::LoadedCheckpoint load_required_checkpoint(const ExperimentManifest& m,
                                              const std::string& model_id) {
  const fs::path path = checkpoint_path(m, model_id, config_of(m, model_id));
  if (!fs::exists(path))
    throw MissingArtifact("checkpoint (expected at " + path.string() +
                          "; run `othx train` first)");
  return nn::load_checkpoint(path.string());
}

int resolve_layer(int requested, const nn::ModelConfig& cfg) {
  const int layer = requested < 0 ? cfg.layers - 1 : requested;
  if (layer < 0 || layer >= cfg.layers)
    throw ManifestError("align layer " + std::to_string(requested) +
                        " out of range for a " + std::to_string(cfg.layers) +
                        "-layer model");
  return layer;
}

oth::Dataset head_games(const oth::Dataset& src, int64_t count) {
  oth::Dataset out;
  out.source_tag = src.source_tag;
  out.seed = src.seed;
  const int64_t n = std::min<int64_t>(count, static_cast<int64_t>(src.games.size()));
  out.games.assign(src.games.begin(), src.games.begin() + n);
  return out;
}

}  // namespace

void cmd_gen(int64_t count, uint64_t seed, const fs::path& out) {
  if (count < 1) throw ConfigError("gen: count must be >= 1");
  const auto ds = oth::generate_games(count, seed);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  oth::write_dataset(ds, out);
  const auto st = oth::dataset_stats(ds);
  std::printf("gen games=%lld mean_length=%.3f full_fraction=%.4f min_length=%d "
              "seed=%llu out=%s hash=%s\n",
              static_cast<long long>(st.games), st.mean_length,
              st.full_length_fraction, st.min_length,
              static_cast<unsigned long long>(seed), out.string().c_str(),
              hex64(oth::dataset_hash(ds)).c_str());
}

void cmd_train(const ExperimentManifest& m) {
  ensure_layout(m.out_dir);
  const auto data = load_or_generate_dataset(m);
  const auto split = nn::split_dataset(data);
  for (const auto& [model_id, mconfig] : m.models) {
    const fs::path path = checkpoint_path(m, model_id, mconfig);
    if (fs::exists(path)) {
      std::printf("train model=%s checkpoint=%s status=exists\n", model_id.c_str(),
                  path.string().c_str());
      continue;
    }
    auto result = nn::train(mconfig, m.train, split.train);
    nn::save_checkpoint(result.model, result.meta, path.string());
    std::printf("train model=%s steps=%lld final_loss=%.4f checkpoint=%s "
                "weights=%s\n",
                model_id.c_str(), static_cast<long long>(result.meta.steps),
                result.meta.final_loss, path.string().c_str(),
                short_hex(nn::checkpoint_weight_hash(result.model)).c_str());
  }
}

void cmd_eval(const ExperimentManifest& m) {
  ensure_layout(m.out_dir);
  const auto data = load_or_generate_dataset(m);
  const auto split = nn::split_dataset(data);
  oth::Dataset test = head_games(split.test, m.eval.max_games);
  const std::string dataset_id = hex64(oth::dataset_hash(data));

  for (const auto& [model_id, mconfig] : m.models) {
    const auto ck = load_required_checkpoint(m, model_id);
    const std::string ckpt_id = hex64(nn::checkpoint_weight_hash(ck.model));
    for (const int hop : m.eval.hops) {
      const auto rep = hop == 1
                           ? eval::eval_1hop(ck.model, test, dataset_id, ckpt_id)
                           : eval::eval_2hop(ck.model, test, dataset_id, ckpt_id);
      const fs::path path = fs::path(m.out_dir) / "reports" /
                            ("eval-" + model_id + "-hop" + std::to_string(hop) + ".txt");
      write_error_report(rep, m.manifest_hash, path.string());
      std::printf("eval model=%s hop=%d prefixes=%lld errors=%lld rate=%.6f "
                  "report=%s\n",
                  model_id.c_str(), hop, static_cast<long long>(rep.total_prefixes),
                  static_cast<long long>(rep.errors), rep.error_rate,
                  path.string().c_str());
    }
  }
}

void cmd_align(const ExperimentManifest& m) {
  ensure_layout(m.out_dir);
  if (m.models.size() < 2)
    throw ManifestError("align needs at least two models in the manifest");
  const auto data = load_or_generate_dataset(m);
  const auto split = nn::split_dataset(data);

  // fit pairs come from validation games, held-out scoring from test games
  oth::Dataset fit_games = head_games(split.val, m.align.fit_games);
  oth::Dataset score_games = head_games(split.test, m.align.score_games);
  oth::Dataset both = fit_games;
  both.games.insert(both.games.end(), score_games.games.begin(),
                    score_games.games.end());

  const auto& [id_a, cfg_a] = m.models[0];
  const auto& [id_b, cfg_b] = m.models[1];
  const auto ck_a = load_required_checkpoint(m, id_a);
  const auto ck_b = load_required_checkpoint(m, id_b);
  const int layer_a = resolve_layer(m.align.layer_a, cfg_a);
  const int layer_b = resolve_layer(m.align.layer_b, cfg_b);
  const std::string dataset_id = hex64(oth::dataset_hash(data));

  auto f_a = nn::extract_features(ck_a.model, both, layer_a, id_a, dataset_id);
  auto f_b = nn::extract_features(ck_b.model, both, layer_b, id_b, dataset_id);
  const fs::path fdir = fs::path(m.out_dir) / "features";
  const fs::path fa_path =
      fdir / (id_a + "-L" + std::to_string(layer_a) + "-" + short_hex(m.manifest_hash) + ".feat");
  const fs::path fb_path =
      fdir / (id_b + "-L" + std::to_string(layer_b) + "-" + short_hex(m.manifest_hash) + ".feat");
  if (!fs::exists(fa_path)) nn::write_features(f_a, fa_path.string());
  if (!fs::exists(fb_path)) nn::write_features(f_b, fb_path.string());

  align::AlignOptions opts;
  opts.seed = m.align.seed;
  int64_t fit_rows = 0;
  for (const auto& g : fit_games.games) fit_rows += static_cast<int64_t>(g.moves.size());
  for (int64_t i = 0; i < f_a.n; ++i)
    (i < fit_rows ? opts.fit_rows : opts.score_rows).push_back(i);

  std::vector<std::string> modes;
  if (m.align.mode == "both") {
    modes = {"supervised", "unsupervised"};
  } else {
    modes = {m.align.mode};
  }
  for (const std::string& mode : modes) {
    const auto [map, rep] =
        mode == "supervised"
            ? align::align_supervised(f_a, f_b, m.align.refinement_iters, opts)
            : align::align_unsupervised(f_a, f_b, m.align.adversarial_iters,
                                        m.align.refinement_iters, opts);
    const fs::path map_path = fs::path(m.out_dir) / "features" /
                              ("align-" + mode + "-" + id_a + "-" + id_b + ".map");
    if (!fs::exists(map_path)) align::save_alignment(map, map_path.string());
    const fs::path rep_path = fs::path(m.out_dir) / "reports" /
                              ("align-" + mode + "-" + id_a + "-" + id_b + ".txt");
    write_similarity_report(rep, map, m.manifest_hash, rep_path.string());
    std::printf("align mode=%s source=%s target=%s mean_cosine=%.4f baseline=%.4f "
                "pairs=%lld report=%s\n",
                mode.c_str(), id_a.c_str(), id_b.c_str(), rep.mean_cosine,
                rep.baseline_mean_cosine, static_cast<long long>(rep.pair_count),
                rep_path.string().c_str());
  }

  if (m.align.layer_grid) {
    const auto grid_games = head_games(split.val, m.align.grid_games);
    const auto mode = m.align.mode == "unsupervised" ? align::Mode::Unsupervised
                                                     : align::Mode::Supervised;
    const auto grid = align::layer_similarity_matrix(
        ck_a.model, ck_b.model, grid_games, mode, m.align.refinement_iters,
        m.align.adversarial_iters, opts);
    const fs::path txt = fs::path(m.out_dir) / "reports" / "layer-grid.txt";
    const fs::path svg = fs::path(m.out_dir) / "figures" / "layer-grid.svg";
    viz::write_heatmap_text(grid, txt.string());
    viz::render_heatmap_svg(grid, svg.string());
    std::printf("align-grid rows=%d cols=%d figure=%s\n", grid.rows_a, grid.cols_b,
                svg.string().c_str());
  }
}

void cmd_viz(const ExperimentManifest& m) {
  ensure_layout(m.out_dir);
  const auto data = load_or_generate_dataset(m);
  const auto split = nn::split_dataset(data);
  if (split.test.games.empty()) throw ManifestError("viz: empty test split");

  const std::string board_model =
      m.viz.board_model.empty() ? m.models[0].first : m.viz.board_model;
  const auto ck = load_required_checkpoint(m, board_model);

  const int game_idx =
      std::min<int>(m.viz.board_game, static_cast<int>(split.test.games.size()) - 1);
  const auto& game = split.test.games[static_cast<size_t>(game_idx)];
  oth::GameRecord prefix;
  const int steps = std::min<int>(m.viz.board_steps,
                                  static_cast<int>(game.moves.size()) - 1);
  prefix.moves.assign(game.moves.begin(), game.moves.begin() + steps);

  const auto bp = viz::latent_move_projection(ck.model, prefix);
  const fs::path svg = fs::path(m.out_dir) / "figures" /
                       ("board-" + board_model + "-g" + std::to_string(game_idx) +
                        "-s" + std::to_string(steps) + ".svg");
  viz::render_board_svg(bp, svg.string());
  std::printf("viz board model=%s game=%d steps=%d top=%s top_legal=%d figure=%s\n",
              board_model.c_str(), game_idx, steps, bp.top_candidate.label().c_str(),
              bp.legality_mask[static_cast<size_t>(bp.top_candidate.index())] ? 1 : 0,
              svg.string().c_str());

  if (m.viz.project_game && m.models.size() >= 2) {
    const auto& id_b = m.models[1].first;
    const auto ck_b = load_required_checkpoint(m, id_b);
    const auto overlay =
        viz::project_game(ck.model, ck_b.model, game, m.viz.project_dims);
    const fs::path path = fs::path(m.out_dir) / "figures" /
                          ("overlay-" + board_model + "-" + id_b + "-g" +
                           std::to_string(game_idx) + ".txt");
    viz::write_overlay(overlay, path.string());
    std::printf("viz overlay models=%s,%s game=%d points=%zu out=%s\n",
                board_model.c_str(), id_b.c_str(), game_idx, overlay.points.size(),
                path.string().c_str());
  }
}

void cmd_sweep(const ExperimentManifest& m) {
  ensure_layout(m.out_dir);
  if (m.eval.scales.empty())
    throw ManifestError("sweep requires eval.scales in the manifest");

  eval::SweepPlan plan;
  plan.models = m.models;
  plan.tconfig = m.train;
  plan.scales = m.eval.scales;
  plan.steps_per_scale = m.eval.steps_per_scale;
  plan.data_seed = m.dataset.seed;
  plan.hops = m.eval.hops;
  plan.eval_max_games = m.eval.max_games;

  const auto sink = [&](const std::string& model_id, int64_t scale,
                        const nn::TrainResult& result) {
    const fs::path path =
        fs::path(m.out_dir) / "checkpoints" /
        (model_id + "-sc" + std::to_string(scale) + "-" +
         short_hex(nn::checkpoint_weight_hash(result.model)) + ".ckpt");
    if (!fs::exists(path))
      nn::save_checkpoint(result.model, result.meta, path.string());
  };
  const auto result = eval::run_sweep(plan, sink);

  const fs::path table = fs::path(m.out_dir) / "reports" / "sweep.tsv";
  const fs::path plot = fs::path(m.out_dir) / "reports" / "sweep_plot.txt";
  write_sweep_table(result, m.manifest_hash, table.string());
  write_sweep_plot_data(result, plot.string());
  for (const auto& c : result.cells)
    std::printf("sweep model=%s scale=%lld hop=%d rate=%.6f%s%s\n",
                c.model_id.c_str(), static_cast<long long>(c.scale), c.hop, c.rate,
                c.error.empty() ? "" : " error=", c.error.c_str());
  std::printf("sweep table=%s plot=%s\n", table.string().c_str(),
              plot.string().c_str());
}

}  // namespace othx::cli
