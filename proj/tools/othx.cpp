// othx: generate Othello datasets, train small sequence models, measure
// legal-move error, align representations across models, and emit figures.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "othx/errors.hpp"
#include "othx/manifest.hpp"
#include "othx/pipeline.hpp"

namespace {

othx::cli::ExperimentManifest load(const std::string& manifest_path,
                                   const std::string& out_override) {
  auto m = othx::cli::load_manifest(manifest_path);
  if (!out_override.empty()) m.out_dir = out_override;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("OTHX_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }

  CLI::App app{"Othello world-model probing toolkit"};
  app.require_subcommand(1);

  // gen
  int64_t gen_count = 1000;
  uint64_t gen_seed = 0;
  std::string gen_out = "games.txt";
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--count", gen_count, "number of games")->required();
  gen->add_option("--seed", gen_seed, "RNG seed")->required();
  gen->add_option("--out", gen_out, "output path")->required();

  // manifest-driven stages
  std::string manifest_path, out_dir;
  int hop = 0;
  std::string mode, layers;
  auto add_manifest_cmd = [&](const char* name, const char* desc) {
    auto* cmd = app.add_subcommand(name, desc);
    cmd->add_option("--manifest", manifest_path, "experiment manifest (JSON)")
        ->required();
    cmd->add_option("--out", out_dir, "override the manifest output directory");
    return cmd;
  };
  auto* train = add_manifest_cmd("train", "train the manifest's models");
  auto* eval = add_manifest_cmd("eval", "legal-move error evaluation");
  eval->add_option("--hop", hop, "restrict to one hop (1 or 2)");
  auto* align = add_manifest_cmd("align", "cross-model representation alignment");
  align->add_option("--mode", mode, "override alignment mode (supervised|unsupervised|both)");
  align->add_option("--layers", layers, "override layer pair, e.g. 3,3");
  auto* viz = add_manifest_cmd("viz", "board projection and overlay figures");
  auto* sweep = add_manifest_cmd("sweep", "train/eval across eval.scales");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      othx::cli::cmd_gen(gen_count, gen_seed, gen_out);
    } else if (train->parsed()) {
      othx::cli::cmd_train(load(manifest_path, out_dir));
    } else if (eval->parsed()) {
      auto m = load(manifest_path, out_dir);
      if (hop == 1 || hop == 2) m.eval.hops = {hop};
      othx::cli::cmd_eval(m);
    } else if (align->parsed()) {
      auto m = load(manifest_path, out_dir);
      if (!mode.empty()) m.align.mode = mode;
      if (!layers.empty()) {
        const auto comma = layers.find(',');
        if (comma == std::string::npos)
          throw othx::ManifestError("--layers expects lA,lB");
        m.align.layer_a = std::stoi(layers.substr(0, comma));
        m.align.layer_b = std::stoi(layers.substr(comma + 1));
      }
      othx::cli::cmd_align(m);
    } else if (viz->parsed()) {
      othx::cli::cmd_viz(load(manifest_path, out_dir));
    } else if (sweep->parsed()) {
      othx::cli::cmd_sweep(load(manifest_path, out_dir));
    }
  } catch (const othx::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
