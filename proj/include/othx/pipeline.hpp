#pragma once

#include <filesystem>

#include "othx/manifest.hpp"

namespace othx::cli {

// Subcommand bodies. Each writes its outputs under
// out_dir/{datasets,checkpoints,features,reports,figures}/ with content-hash
// filenames (write-once: an existing artifact is never rewritten), prints a
// one-line machine-parsable summary per artifact on stdout, and throws on
// configuration or I/O failure.

void cmd_gen(int64_t count, uint64_t seed, const std::filesystem::path& out);

void cmd_train(const ExperimentManifest& manifest);
void cmd_eval(const ExperimentManifest& manifest);
void cmd_align(const ExperimentManifest& manifest);
void cmd_viz(const ExperimentManifest& manifest);
void cmd_sweep(const ExperimentManifest& manifest);

}  // namespace othx::cli
