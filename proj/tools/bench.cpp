// Serial vs OpenMP kernel benchmark on the shapes the trainer actually uses,
// plus end-to-end generation / training-step / evaluation throughput.

#include <omp.h>

#include <cstdio>
#include <vector>

#include "othx/eval.hpp"
#include "othx/kernels.hpp"
#include "othx/model.hpp"
#include "othx/othello.hpp"
#include "othx/rng.hpp"
#include "othx/train.hpp"

using namespace othx;

namespace {

double now() { return omp_get_wtime(); }

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now();
    fn();
    best = std::min(best, now() - t0);
  }
  return best;
}

void fill_random(std::vector<float>& v, uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& x : v) x = static_cast<float>(rng.normal());
}

void bench_matmul(int64_t m, int64_t k, int64_t n) {
  std::vector<float> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n)),
      c(static_cast<size_t>(m * n)), c_ref(static_cast<size_t>(m * n));
  fill_random(a, 1);
  fill_random(b, 2);
  const double gflop = 2.0 * m * k * n * 1e-9;
  const double ts = time_best_of(3, [&] {
    nn::kern::serial::matmul_nn(a.data(), b.data(), c_ref.data(), m, k, n);
  });
  const double tp = time_best_of(3, [&] {
    nn::kern::matmul_nn(a.data(), b.data(), c.data(), m, k, n);
  });
  const bool same = c == c_ref;
  std::printf("matmul %5lldx%4lldx%4lld  serial %7.2f ms (%6.2f GF/s)  omp %7.2f ms "
              "(%6.2f GF/s)  speedup %4.2fx  bitwise_equal=%s\n",
              static_cast<long long>(m), static_cast<long long>(k),
              static_cast<long long>(n), ts * 1e3, gflop / ts, tp * 1e3, gflop / tp,
              ts / tp, same ? "yes" : "NO");
}

}  // namespace

int main() {
  std::printf("threads=%d\n", omp_get_max_threads());

  // trainer shapes: (batch*seq) x hidden x {hidden, mlp, vocab}
  bench_matmul(64 * 61, 128, 128);
  bench_matmul(64 * 61, 128, 512);
  bench_matmul(64 * 61, 512, 128);
  bench_matmul(64 * 61, 128, 62);

  {
    const double t0 = now();
    const auto ds = oth::generate_games(20000, 7);
    const double dt = now() - t0;
    std::printf("generate_games 20k: %.2f s (%.0f games/s)\n", dt, 20000.0 / dt);

    nn::ModelConfig mc;
    mc.layers = 4;
    mc.hidden_dim = 128;
    mc.heads = 4;
    nn::TrainConfig tc;
    tc.total_steps = 10;
    tc.batch_size = 64;
    tc.eval_interval = 10;
    const double t1 = now();
    auto trained = nn::train(mc, tc, ds, /*verbose=*/false);
    const double dt_train = (now() - t1) / tc.total_steps;
    std::printf("train step (B=64, 4L/128d): %.0f ms/step\n", dt_train * 1e3);

    oth::Dataset test;
    test.games.assign(ds.games.begin(), ds.games.begin() + 50);
    const double t2 = now();
    const auto rep = eval::eval_1hop(trained.model, test);
    const double dt_eval = now() - t2;
    std::printf("eval_1hop 50 games: %.2f s (%lld prefixes, rate=%.3f)\n", dt_eval,
                static_cast<long long>(rep.total_prefixes), rep.error_rate);
  }
  return 0;
}
