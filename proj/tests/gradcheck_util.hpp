#pragma once

// Finite-difference gradient checking on the double-precision instantiation
// of the model. Shared by the unit suite and the acceptance suite.

#include <cmath>
#include <cstdio>
#include <vector>

#include "othx/model.hpp"
#include "othx/model_impl.hpp"
#include "othx/othello.hpp"

namespace gradcheck {

using namespace othx;
using namespace othx::nn;


struct Batch {
  std::vector<int32_t> tokens, targets, enc;
  int B = 0, T = 0, Te = 0;
};

// two short real-game prefixes, PAD-padded
inline Batch make_batch(bool enc_dec) {
  const auto ds = oth::generate_games(2, 77);
  const int lens[2] = {5, 7};
  Batch batch;
  batch.B = 2;
  batch.T = enc_dec ? 7 : 8;
  batch.Te = enc_dec ? 1 : 0;
  batch.tokens.assign(static_cast<size_t>(batch.B) * batch.T, Tokenizer::kPad);
  batch.targets.assign(static_cast<size_t>(batch.B) * batch.T, -1);
  if (enc_dec) batch.enc.assign(2, Tokenizer::kBos);
  for (int b = 0; b < 2; ++b) {
    const auto& game = ds.games[static_cast<size_t>(b)];
    const int moves = lens[b];
    int32_t* trow = batch.tokens.data() + b * batch.T;
    int32_t* yrow = batch.targets.data() + b * batch.T;
    if (!enc_dec) {
      trow[0] = Tokenizer::kBos;
      for (int t = 0; t < moves; ++t) trow[t + 1] = game.moves[t].index();
      for (int t = 0; t < moves; ++t) yrow[t] = game.moves[t].index();
    } else {
      batch.enc[static_cast<size_t>(b)] = game.moves[0].index();
      trow[0] = Tokenizer::kBos;
      for (int t = 2; t <= moves; ++t) trow[t - 1] = game.moves[t - 1].index();
      for (int t = 0; t + 2 <= moves; ++t) yrow[t] = game.moves[t + 1].index();
    }
  }
  return batch;
}

inline double loss_only(Model<double>& model, const Batch& b, RunState<double>& st) {
  model.forward(b.tokens.data(), b.B, b.T, b.enc.empty() ? nullptr : b.enc.data(),
                b.Te, st);
  return model.loss(b.targets.data(), st, /*grad=*/false);
}

// per-group L2 relative error between analytic and central-difference grads
inline double max_group_rel_error(const ModelConfig& cfg, bool enc_dec,
                           bool print = false) {
  const Batch batch = make_batch(enc_dec);
  Model<double> model(cfg);
  RunState<double> st;
  model.zero_grads();
  model.forward(batch.tokens.data(), batch.B, batch.T,
                batch.enc.empty() ? nullptr : batch.enc.data(), batch.Te, st);
  model.loss(batch.targets.data(), st, /*grad=*/true);
  model.backward(st);

  const double h = 1e-5;
  double worst = 0.0;
  for (auto* p : model.params()) {
    const std::vector<double> analytic = p->g.data;
    double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
    for (int64_t i = 0; i < p->w.numel(); ++i) {
      const double keep = p->w.data[static_cast<size_t>(i)];
      p->w.data[static_cast<size_t>(i)] = keep + h;
      const double lp = loss_only(model, batch, st);
      p->w.data[static_cast<size_t>(i)] = keep - h;
      const double lm = loss_only(model, batch, st);
      p->w.data[static_cast<size_t>(i)] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double an = analytic[static_cast<size_t>(i)];
      diff_sq += (an - fd) * (an - fd);
      a_sq += an * an;
      n_sq += fd * fd;
    }
    // A group whose true gradient is identically zero (e.g. the key bias,
    // which softmax attention cancels) compares noise against noise; treat
    // both-below-noise-floor as a match, requiring the analytic side to agree
    // that it vanishes.
    double rel;
    if (std::sqrt(a_sq) < 1e-9 && std::sqrt(n_sq) < 1e-8) {
      rel = 0.0;
    } else {
      rel = std::sqrt(diff_sq) / (std::sqrt(a_sq) + std::sqrt(n_sq) + 1e-30);
    }
    if (print)
      std::printf("  %-14s rel_err=%.3e  |g|=%.3e\n", p->name.c_str(), rel,
                  std::sqrt(a_sq));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace gradcheck