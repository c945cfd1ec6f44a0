#pragma once

#include <string>
#include <vector>

#include "othx/align.hpp"
#include "othx/eval.hpp"
#include "othx/sweep.hpp"

namespace othx {

inline constexpr const char* kBuildVersion = "othx-0.1.0";

// Structured text, one record per line of key=value pairs. Every report
// embeds the manifest hash and build version for provenance. No timestamps:
// identical inputs produce identical bytes.
void write_error_report(const eval::ErrorReport& report, uint64_t manifest_hash,
                        const std::string& path);

void write_similarity_report(const align::SimilarityReport& report,
                             const align::AlignmentMap& map,
                             uint64_t manifest_hash, const std::string& path);

// Aggregate sweep table: model, scale, hop, prefixes, errors, rate (TSV),
// plus a plot-data file of "model scale hop rate" lines.
void write_sweep_table(const eval::SweepResult& result, uint64_t manifest_hash,
                       const std::string& table_path);
void write_sweep_plot_data(const eval::SweepResult& result,
                           const std::string& path);

}  // namespace othx
