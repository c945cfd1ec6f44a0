#include "othx/sweep.hpp"

#include <algorithm>
#include <cstdio>

#include "othx/dataset_io.hpp"
#include "othx/hash.hpp"

namespace othx::eval {

SweepResult run_sweep(const SweepPlan& plan, const CheckpointSink& sink,
                      bool verbose) {
  if (!std::is_sorted(plan.scales.begin(), plan.scales.end()))
    throw ConfigError("sweep scales must be sorted ascending");
  if (plan.models.empty()) throw ConfigError("sweep needs at least one model");

  SweepResult result;
  for (const int64_t scale : plan.scales) {
    const auto data = oth::generate_games(scale, plan.data_seed);
    const auto split = nn::split_dataset(data);
    oth::Dataset test = split.test;
    if (static_cast<int64_t>(test.games.size()) > plan.eval_max_games)
      test.games.resize(static_cast<size_t>(plan.eval_max_games));
    const std::string dataset_id = hex64(oth::dataset_hash(data));

    for (const auto& [model_id, mconfig] : plan.models) {
      nn::TrainConfig tc = plan.tconfig;
      if (auto it = plan.steps_per_scale.find(scale); it != plan.steps_per_scale.end())
        tc.total_steps = it->second;
      try {
        if (verbose)
          std::fprintf(stderr, "[sweep] training %s at scale %lld (%lld steps)\n",
                       model_id.c_str(), static_cast<long long>(scale),
                       static_cast<long long>(tc.total_steps));
        auto trained = nn::train(mconfig, tc, split.train, verbose);
        if (sink) sink(model_id, scale, trained);
        const std::string ckpt_id = hex64(nn::checkpoint_weight_hash(trained.model));
        for (const int hop : plan.hops) {
          const ErrorReport rep = hop == 1
                                      ? eval_1hop(trained.model, test, dataset_id, ckpt_id)
                                      : eval_2hop(trained.model, test, dataset_id, ckpt_id);
          result.cells.push_back({model_id, scale, hop, rep.total_prefixes,
                                  rep.errors, rep.error_rate, ""});
          if (verbose)
            std::fprintf(stderr, "[sweep] %s scale=%lld hop=%d rate=%.4f\n",
                         model_id.c_str(), static_cast<long long>(scale), hop,
                         rep.error_rate);
        }
      } catch (const std::exception& e) {
        for (const int hop : plan.hops)
          result.cells.push_back({model_id, scale, hop, 0, 0, 0.0, e.what()});
        if (verbose)
          std::fprintf(stderr, "[sweep] %s scale=%lld failed: %s\n",
                       model_id.c_str(), static_cast<long long>(scale), e.what());
      }
    }
  }
  return result;
}

}  // namespace othx::eval
