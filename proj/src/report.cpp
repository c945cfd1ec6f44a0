#include "othx/report.hpp"

#include <cstdio>
#include <fstream>

#include "othx/hash.hpp"

namespace othx {

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}
}  // namespace

void write_error_report(const eval::ErrorReport& report, uint64_t manifest_hash,
                        const std::string& path) {
  auto out = open_out(path);
  out << "kind=summary report=move_eval hop=" << report.hop
      << " prefixes=" << report.total_prefixes << " errors=" << report.errors
      << " rate=" << fmt(report.error_rate) << " checkpoint=" << report.checkpoint_id
      << " dataset=" << report.dataset_id << " manifest=" << hex64(manifest_hash)
      << " build=" << kBuildVersion << "\n";
  for (const auto& ps : report.per_position)
    out << "kind=position step=" << ps.step << " prefixes=" << ps.prefixes
        << " errors=" << ps.errors << " rate=" << fmt(ps.rate) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void write_similarity_report(const align::SimilarityReport& report,
                             const align::AlignmentMap& map,
                             uint64_t manifest_hash, const std::string& path) {
  auto out = open_out(path);
  out << "kind=summary report=rep_align mode="
      << (map.mode == align::Mode::Supervised ? "supervised" : "unsupervised")
      << " mean_cosine=" << fmt(report.mean_cosine)
      << " baseline_mean_cosine=" << fmt(report.baseline_mean_cosine)
      << " pairs=" << report.pair_count
      << " refinement_iters=" << map.refinement_iters
      << " adversarial_iters=" << map.adversarial_iters
      << " source=" << map.source_id << " target=" << map.target_id
      << " source_layer=" << map.source_layer
      << " target_layer=" << map.target_layer
      << " manifest=" << hex64(manifest_hash) << " build=" << kBuildVersion
      << "\n";
  if (!out) throw IoError("write failed: " + path);
}

void write_sweep_table(const eval::SweepResult& result, uint64_t manifest_hash,
                       const std::string& table_path) {
  auto out = open_out(table_path);
  out << "# manifest=" << hex64(manifest_hash) << " build=" << kBuildVersion << "\n";
  out << "model\tscale\thop\tprefixes\terrors\trate\terror\n";
  for (const auto& c : result.cells)
    out << c.model_id << "\t" << c.scale << "\t" << c.hop << "\t" << c.prefixes
        << "\t" << c.errors << "\t" << fmt(c.rate) << "\t" << c.error << "\n";
  if (!out) throw IoError("write failed: " + table_path);
}

void write_sweep_plot_data(const eval::SweepResult& result,
                           const std::string& path) {
  auto out = open_out(path);
  out << "# model scale hop rate\n";
  for (const auto& c : result.cells)
    if (c.error.empty())
      out << c.model_id << " " << c.scale << " " << c.hop << " " << fmt(c.rate)
          << "\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace othx
