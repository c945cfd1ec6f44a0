#include "othx/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "othx/dataset_io.hpp"
#include "othx/hash.hpp"

namespace othx::nn {

namespace {

struct AdamState {
  std::vector<Tensor<float>> m, v;

  explicit AdamState(Model<float>& model) {
    for (auto* p : model.params()) {
      m.emplace_back(p->w.shape);
      v.emplace_back(p->w.shape);
    }
  }

  uint64_t hash() const {
    Fnv1a h;
    for (const auto& t : m) h.update(t.data.data(), t.data.size() * sizeof(float));
    for (const auto& t : v) h.update(t.data.data(), t.data.size() * sizeof(float));
    return h.value();
  }
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

double grad_global_norm(Model<float>& model) {
  double sq = 0.0;
  for (auto* p : model.params()) {
    const float* g = p->g.ptr();
    const int64_t n = p->g.numel();
    double s = 0.0;
#pragma omp simd reduction(+ : s)
    for (int64_t i = 0; i < n; ++i) s += static_cast<double>(g[i]) * g[i];
    sq += s;
  }
  return std::sqrt(sq);
}

void scale_grads(Model<float>& model, float factor) {
  for (auto* p : model.params()) {
    float* g = p->g.ptr();
    const int64_t n = p->g.numel();
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) g[i] *= factor;
  }
}

}  // namespace

TrainResult train(const ModelConfig& mconfig, const TrainConfig& tconfig,
                  const oth::Dataset& data, bool verbose) {
  mconfig.validate();
  tconfig.validate();
  if (data.games.empty()) throw DataError("train: empty dataset");

  const bool enc_dec = mconfig.architecture == Arch::EncoderDecoder;
  std::vector<std::vector<int32_t>> seqs;
  seqs.reserve(data.games.size());
  size_t longest = 0;
  for (const auto& g : data.games) {
    seqs.push_back(Tokenizer::encode_game(g));
    longest = std::max(longest, seqs.back().size());
  }
  if (static_cast<int>(longest) > mconfig.max_seq_len)
    throw ConfigError("longest training sequence (" + std::to_string(longest) +
                      ") exceeds max_seq_len");

  TrainResult result{Model<float>(mconfig), TrainMeta{}, {}};
  Model<float>& model = result.model;
  AdamState opt(model);
  RunState<float> state;
  SplitMix64 perm_rng(tconfig.seed);
  SplitMix64 dropout_rng(tconfig.seed ^ 0x5dee7d6a1b2c3d4eull);

  const int64_t n = static_cast<int64_t>(seqs.size());
  std::vector<int64_t> order(n);
  for (int64_t i = 0; i < n; ++i) order[i] = i;
  int64_t cursor = n;  // force a shuffle before the first batch

  std::vector<int32_t> tokens, targets, enc_tokens;
  double last_loss = 0.0;

  for (int64_t step = 1; step <= tconfig.total_steps; ++step) {
    // batch composition is seed-determined: reshuffle per epoch, slice in order
    const int64_t bsz = std::min<int64_t>(tconfig.batch_size, n);
    if (cursor + bsz > n) {
      for (int64_t i = n - 1; i > 0; --i) {
        const int64_t j = static_cast<int64_t>(perm_rng.below(static_cast<uint64_t>(i + 1)));
        std::swap(order[i], order[j]);
      }
      cursor = 0;
    }

    int td = 1;
    for (int64_t b = 0; b < bsz; ++b) {
      const auto& s = seqs[static_cast<size_t>(order[cursor + b])];
      const int len = static_cast<int>(s.size());  // BOS + moves
      td = std::max(td, enc_dec ? std::max(1, len - 1) : len);
    }
    tokens.assign(static_cast<size_t>(bsz) * td, Tokenizer::kPad);
    targets.assign(static_cast<size_t>(bsz) * td, -1);
    enc_tokens.assign(enc_dec ? static_cast<size_t>(bsz) : 0, Tokenizer::kBos);

    for (int64_t b = 0; b < bsz; ++b) {
      const auto& s = seqs[static_cast<size_t>(order[cursor + b])];
      const int moves = static_cast<int>(s.size()) - 1;
      int32_t* trow = tokens.data() + b * td;
      int32_t* yrow = targets.data() + b * td;
      if (!enc_dec) {
        for (int t = 0; t <= moves; ++t) trow[t] = s[static_cast<size_t>(t)];
        for (int t = 0; t < moves; ++t) yrow[t] = s[static_cast<size_t>(t + 1)];
      } else {
        // encoder sees move 1; decoder predicts moves 2..n from BOS onward
        enc_tokens[static_cast<size_t>(b)] = moves >= 1 ? s[1] : Tokenizer::kBos;
        trow[0] = Tokenizer::kBos;
        for (int t = 2; t <= moves; ++t) trow[t - 1] = s[static_cast<size_t>(t)];
        for (int t = 0; t + 2 <= moves; ++t) yrow[t] = s[static_cast<size_t>(t + 2)];
      }
    }
    cursor += bsz;

    model.zero_grads();
    model.forward(tokens.data(), static_cast<int>(bsz), td,
                  enc_dec ? enc_tokens.data() : nullptr, enc_dec ? 1 : 0, state,
                  mconfig.dropout > 0.0 ? &dropout_rng : nullptr);
    last_loss = model.loss(targets.data(), state, /*grad=*/true);
    model.backward(state);

    if (tconfig.gradient_clip_norm > 0.0) {
      const double norm = grad_global_norm(model);
      if (norm > tconfig.gradient_clip_norm)
        scale_grads(model, static_cast<float>(tconfig.gradient_clip_norm / norm));
    }

    const double lr =
        tconfig.warmup_steps > 0
            ? tconfig.learning_rate *
                  std::min(1.0, static_cast<double>(step) / tconfig.warmup_steps)
            : tconfig.learning_rate;
    auto params = model.params();
    for (size_t pi = 0; pi < params.size(); ++pi) {
      kern::adamw_update(params[pi]->w.ptr(), params[pi]->g.ptr(),
                         opt.m[pi].ptr(), opt.v[pi].ptr(), params[pi]->w.numel(),
                         lr, kBeta1, kBeta2, kEps, tconfig.weight_decay, step);
    }

    if (step == 1 || step % tconfig.eval_interval == 0 ||
        step == tconfig.total_steps) {
      result.loss_log.emplace_back(step, last_loss);
      if (verbose)
        std::fprintf(stderr, "step=%lld/%lld loss=%.4f lr=%.2e\n",
                     static_cast<long long>(step),
                     static_cast<long long>(tconfig.total_steps), last_loss, lr);
    }
  }

  result.meta.dataset_hash = oth::dataset_hash(data);
  result.meta.steps = tconfig.total_steps;
  result.meta.final_loss = last_loss;
  result.meta.optimizer_state_hash = opt.hash();
  return result;
}

DatasetSplit split_dataset(const oth::Dataset& data) {
  const int64_t n = static_cast<int64_t>(data.games.size());
  DatasetSplit out;
  out.train.source_tag = out.val.source_tag = out.test.source_tag = data.source_tag;
  out.train.seed = out.val.seed = out.test.seed = data.seed;
  int64_t n_train = 0, n_val = 0;
  if (n >= 40000) {
    n_train = n - 20000;
    n_val = 10000;
  } else {
    n_train = n * 8 / 10;
    n_val = n / 10;
  }
  for (int64_t i = 0; i < n; ++i) {
    const auto& g = data.games[static_cast<size_t>(i)];
    if (i < n_train)
      out.train.games.push_back(g);
    else if (i < n_train + n_val)
      out.val.games.push_back(g);
    else
      out.test.games.push_back(g);
  }
  return out;
}

}  // namespace othx::nn
