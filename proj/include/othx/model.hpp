#pragma once

// Small from-scratch transformer sequence models over the 62-token Othello
// vocabulary: a causal decoder-only stack, and an encoder-decoder variant
// whose encoder consumes exactly the first move token while the decoder
// generates the remainder. Pre-norm blocks, learned absolute positions,
// output head tied to the token embedding. Templated on the scalar type so
// tests can instantiate the whole network in double precision for finite-
// difference gradient checks.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "othx/errors.hpp"
#include "othx/kernels.hpp"
#include "othx/rng.hpp"
#include "othx/tensor.hpp"
#include "othx/tokenizer.hpp"

namespace othx::nn {

enum class Arch : uint8_t { DecoderOnly = 0, EncoderDecoder = 1 };

struct ModelConfig {
  Arch architecture = Arch::DecoderOnly;
  int layers = 4;        // decoder blocks; the encoder (if any) uses the same count
  int hidden_dim = 128;
  int heads = 4;
  int max_seq_len = 64;
  double dropout = 0.0;
  uint64_t seed = 0;

  int mlp_dim() const { return 4 * hidden_dim; }
  int head_dim() const { return hidden_dim / heads; }

  void validate() const {
    if (layers < 1) throw ConfigError("layers must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (heads < 1 || hidden_dim % heads != 0)
      throw ConfigError("heads must be >= 1 and divide hidden_dim");
    if (max_seq_len < 61)
      throw ConfigError("max_seq_len must be >= 61 (BOS + a full game)");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must be in [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct AttnParams {
  Param<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

template <typename T>
struct BlockParams {
  Param<T> ln1_g, ln1_b;
  AttnParams<T> attn;          // self-attention
  bool has_cross = false;
  Param<T> lnx_g, lnx_b;       // cross-attention (enc-dec decoder blocks)
  AttnParams<T> cross;
  Param<T> ln2_g, ln2_b;
  Param<T> w1, b1, w2, b2;     // MLP
};

// Per-block activation caches kept for the backward pass.
template <typename T>
struct BlockState {
  Tensor<T> ln1_out, ln1_mean, ln1_rstd;
  Tensor<T> q, k, v;           // (rows, h), heads packed in the feature dim
  Tensor<T> att_p;             // (B, A, T, Tk) attention probabilities
  Tensor<T> att_out;           // concatenated head outputs, pre-projection
  Tensor<uint8_t> sa_mask;     // dropout masks (allocated only if dropout > 0)
  Tensor<T> x1;                // residual after self-attention

  Tensor<T> lnx_out, lnx_mean, lnx_rstd;
  Tensor<T> xq, xk, xv;
  Tensor<T> x_p;               // (B, A, T, Te)
  Tensor<T> x_att_out;
  Tensor<uint8_t> ca_mask;
  Tensor<T> x2;                // residual after cross-attention

  Tensor<T> ln2_out, ln2_mean, ln2_rstd;
  Tensor<T> fc1_out, gelu_out;
  Tensor<uint8_t> mlp_mask;
  Tensor<T> x3;                // block output
};

// All activations for one packed batch. Reused across steps; eval threads
// own one each.
template <typename T>
struct RunState {
  int B = 0, Td = 0, Te = 0;

  Tensor<T> dec_emb;                       // decoder embedding output
  std::vector<BlockState<T>> dec;
  Tensor<T> lnf_out, lnf_mean, lnf_rstd;
  Tensor<T> logits;                        // (B*Td, V)

  Tensor<T> enc_emb;
  std::vector<BlockState<T>> enc;
  Tensor<T> enc_out;                       // encoder final LN output
  Tensor<T> enc_lnf_mean, enc_lnf_rstd;

  // backward scratch
  Tensor<T> dx, scratch_h1, scratch_h2, scratch_h3, scratch_h4, scratch_f, d_p;
  Tensor<T> d_enc, d_ek, d_ev, scratch_e;
  Tensor<T> dlogits;

  std::vector<int32_t> tokens, enc_tokens;  // copies for backward/scatter
};

struct TrainMeta {
  uint64_t dataset_hash = 0;
  int64_t steps = 0;
  double final_loss = 0.0;
  uint64_t optimizer_state_hash = 0;
};

template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  std::vector<Param<T>*> params();
  std::vector<const Param<T>*> params() const;
  int64_t param_count() const;
  void zero_grads();

  const Tensor<T>& token_embedding() const { return tok_emb_.w; }

  // Forward over a packed batch. `tokens` is B*Td ids padded with PAD;
  // `enc_tokens` is B*Te ids (enc-dec only, pass nullptr/0 otherwise).
  // Fills state.logits. Thread-safe: the model is read-only here.
  void forward(const int32_t* tokens, int B, int Td, const int32_t* enc_tokens,
               int Te, RunState<T>& state, SplitMix64* dropout_rng = nullptr) const;

  // PAD-masked mean cross-entropy of the next-move targets. `targets` is
  // B*Td ids with -1 = ignore; probabilities are normalized over the 60
  // move tokens only. Fills state.dlogits when grad=true.
  double loss(const int32_t* targets, RunState<T>& state, bool grad) const;

  // Backward from state.dlogits into parameter gradients (accumulating).
  void backward(RunState<T>& state);

  // Hidden states of decoder block `layer` (0-based), shape (B*Td, h).
  const T* block_output(const RunState<T>& state, int layer) const;

 private:
  void build();
  void init_weights();
  void alloc_block_state(BlockState<T>& bs, int B, int Tq, int Tk,
                         bool cross) const;
  void block_forward(const BlockParams<T>& bp, BlockState<T>& bs, const T* x_in,
                     int B, int Tq, bool causal, const T* enc_out, int Te,
                     RunState<T>& state, SplitMix64* dropout_rng) const;
  void block_backward(BlockParams<T>& bp, BlockState<T>& bs, const T* x_in,
                      int B, int Tq, bool causal, const T* enc_out, int Te,
                      RunState<T>& state);
  void attention_forward(const T* q, const T* k, const T* v, T* p, T* out,
                         int B, int Tq, int Tk, bool causal) const;
  void attention_backward(const T* q, const T* k, const T* v, const T* p,
                          const T* d_out, T* dq, T* dk, T* dv, T* dp, int B,
                          int Tq, int Tk, bool causal) const;

  ModelConfig cfg_;
  Param<T> tok_emb_, pos_emb_;
  std::vector<BlockParams<T>> enc_blocks_;
  Param<T> enc_lnf_g_, enc_lnf_b_;
  std::vector<BlockParams<T>> dec_blocks_;
  Param<T> lnf_g_, lnf_b_;
};

using ModelF = Model<float>;

// ---- checkpoints ------------------------------------------------------------

// Self-describing binary container: magic, format version, embedded config
// and training metadata, then a named tensor table of little-endian float32.
void save_checkpoint(const Model<float>& model, const TrainMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
  Model<float> model;
  TrainMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Content id of a checkpoint's weights (FNV-1a over the tensor table).
uint64_t checkpoint_weight_hash(const Model<float>& model);

// ---- inference --------------------------------------------------------------

// Splits a BOS-led token prefix into (encoder tokens, decoder tokens) for
// the encoder-decoder variant: the encoder consumes exactly the first move
// token (BOS when the prefix has no move yet).
void split_enc_dec(std::span<const int32_t> prefix, std::vector<int32_t>& enc,
                   std::vector<int32_t>& dec);

// Softmax of the final-position logits restricted to the 60 move tokens.
std::vector<double> next_move_distribution(const Model<float>& model,
                                           std::span<const int32_t> prefix);

// Greedy decoding of k in {1,2} moves; ties broken by lowest token id.
std::vector<oth::Tile> generate_k(const Model<float>& model,
                                  std::span<const int32_t> prefix, int k);

// Reusable per-thread inference context (forward passes only).
class StepwiseRunner {
 public:
  explicit StepwiseRunner(const Model<float>& model) : model_(&model) {}

  // Logits at every predicting position of `game`: row i-1 holds the
  // final-position logits for step i (i = 1..len), shape (len, V).
  const std::vector<float>& step_logits(const oth::GameRecord& game);

  // As above but returns hidden rows (len, h) from decoder block `layer`.
  void step_hidden(const oth::GameRecord& game, int layer, float* out);

  std::vector<double> distribution(std::span<const int32_t> prefix);
  int32_t argmax_move(std::span<const int32_t> prefix);

  const Model<float>& model() const { return *model_; }

 private:
  void run_prefix(std::span<const int32_t> prefix);

  const Model<float>* model_;
  RunState<float> state_;
  RunState<float> state_step1_;   // enc-dec: separate tiny run for step 1
  std::vector<float> logits_;
  std::vector<int32_t> enc_buf_, dec_buf_;
};

int32_t argmax_move_token(const float* logits_row);
int32_t argmax_move_token(const double* probs60);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace othx::nn
