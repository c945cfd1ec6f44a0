#pragma once

// Templated implementation of Model<T>. Included by src/model.cpp, which
// provides the explicit float/double instantiations.

#include <cassert>
#include <cmath>
#include <cstring>

#include "othx/model.hpp"

namespace othx::nn {

namespace {

template <typename T>
inline T dot_span(const T* __restrict a, const T* __restrict b, int n) {
  T s = T(0);
#pragma omp simd reduction(+ : s)
  for (int e = 0; e < n; ++e) s += a[e] * b[e];
  return s;
}

template <typename T>
inline void axpy_span(T alpha, const T* __restrict x, T* __restrict y, int n) {
#pragma omp simd
  for (int e = 0; e < n; ++e) y[e] += alpha * x[e];
}

template <typename T>
void apply_dropout_fwd(T* x, Tensor<uint8_t>& mask, int64_t n, double p,
                       SplitMix64* rng) {
  if (p <= 0.0 || rng == nullptr) return;
  if (mask.numel() != n) mask.resize({n});
  uint8_t* m = mask.ptr();
  for (int64_t i = 0; i < n; ++i) m[i] = rng->uniform() >= p ? 1 : 0;
  const T scale = static_cast<T>(1.0 / (1.0 - p));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) x[i] = m[i] ? x[i] * scale : T(0);
}

template <typename T>
void apply_dropout_bwd(T* dx, const Tensor<uint8_t>& mask, int64_t n, double p) {
  if (p <= 0.0 || mask.numel() != n) return;
  const uint8_t* m = mask.ptr();
  const T scale = static_cast<T>(1.0 / (1.0 - p));
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = m[i] ? dx[i] * scale : T(0);
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  build();
  init_weights();
}

template <typename T>
void Model<T>::build() {
  const int64_t h = cfg_.hidden_dim;
  const int64_t f = cfg_.mlp_dim();
  const int64_t v = Tokenizer::kVocab;

  tok_emb_.init_shape("tok_emb", {v, h});
  pos_emb_.init_shape("pos_emb", {cfg_.max_seq_len, h});

  auto build_attn = [&](AttnParams<T>& a, const std::string& prefix) {
    a.wq.init_shape(prefix + ".wq", {h, h});
    a.bq.init_shape(prefix + ".bq", {h});
    a.wk.init_shape(prefix + ".wk", {h, h});
    a.bk.init_shape(prefix + ".bk", {h});
    a.wv.init_shape(prefix + ".wv", {h, h});
    a.bv.init_shape(prefix + ".bv", {h});
    a.wo.init_shape(prefix + ".wo", {h, h});
    a.bo.init_shape(prefix + ".bo", {h});
  };
  auto build_block = [&](BlockParams<T>& b, const std::string& prefix, bool cross) {
    b.ln1_g.init_shape(prefix + ".ln1.g", {h});
    b.ln1_b.init_shape(prefix + ".ln1.b", {h});
    build_attn(b.attn, prefix + ".attn");
    b.has_cross = cross;
    if (cross) {
      b.lnx_g.init_shape(prefix + ".lnx.g", {h});
      b.lnx_b.init_shape(prefix + ".lnx.b", {h});
      build_attn(b.cross, prefix + ".cross");
    }
    b.ln2_g.init_shape(prefix + ".ln2.g", {h});
    b.ln2_b.init_shape(prefix + ".ln2.b", {h});
    b.w1.init_shape(prefix + ".mlp.w1", {h, f});
    b.b1.init_shape(prefix + ".mlp.b1", {f});
    b.w2.init_shape(prefix + ".mlp.w2", {f, h});
    b.b2.init_shape(prefix + ".mlp.b2", {h});
  };

  if (cfg_.architecture == Arch::EncoderDecoder) {
    enc_blocks_.resize(cfg_.layers);
    for (int l = 0; l < cfg_.layers; ++l)
      build_block(enc_blocks_[l], "enc." + std::to_string(l), false);
    enc_lnf_g_.init_shape("enc.lnf.g", {h});
    enc_lnf_b_.init_shape("enc.lnf.b", {h});
  }
  dec_blocks_.resize(cfg_.layers);
  for (int l = 0; l < cfg_.layers; ++l)
    build_block(dec_blocks_[l], "dec." + std::to_string(l),
                cfg_.architecture == Arch::EncoderDecoder);
  lnf_g_.init_shape("lnf.g", {h});
  lnf_b_.init_shape("lnf.b", {h});
}

template <typename T>
void Model<T>::init_weights() {
  SplitMix64 rng(cfg_.seed);
  const int total_blocks =
      cfg_.layers * (cfg_.architecture == Arch::EncoderDecoder ? 2 : 1);
  const double std_base = 0.02;
  const double std_resid = std_base / std::sqrt(2.0 * total_blocks);

  auto fill_normal = [&](Param<T>& p, double std) {
    for (auto& x : p.w.data) x = static_cast<T>(rng.normal() * std);
  };
  auto fill_const = [&](Param<T>& p, double c) {
    std::fill(p.w.data.begin(), p.w.data.end(), static_cast<T>(c));
  };
  auto init_attn = [&](AttnParams<T>& a) {
    fill_normal(a.wq, std_base);
    fill_normal(a.wk, std_base);
    fill_normal(a.wv, std_base);
    fill_normal(a.wo, std_resid);  // residual projections scaled down
  };
  auto init_block = [&](BlockParams<T>& b) {
    fill_const(b.ln1_g, 1.0);
    init_attn(b.attn);
    if (b.has_cross) {
      fill_const(b.lnx_g, 1.0);
      init_attn(b.cross);
    }
    fill_const(b.ln2_g, 1.0);
    fill_normal(b.w1, std_base);
    fill_normal(b.w2, std_resid);
  };

  fill_normal(tok_emb_, std_base);
  fill_normal(pos_emb_, std_base);
  for (auto& b : enc_blocks_) init_block(b);
  if (cfg_.architecture == Arch::EncoderDecoder) fill_const(enc_lnf_g_, 1.0);
  for (auto& b : dec_blocks_) init_block(b);
  fill_const(lnf_g_, 1.0);
}

template <typename T>
std::vector<Param<T>*> Model<T>::params() {
  std::vector<Param<T>*> out;
  auto add_attn = [&](AttnParams<T>& a) {
    out.insert(out.end(), {&a.wq, &a.bq, &a.wk, &a.bk, &a.wv, &a.bv, &a.wo, &a.bo});
  };
  auto add_block = [&](BlockParams<T>& b) {
    out.push_back(&b.ln1_g);
    out.push_back(&b.ln1_b);
    add_attn(b.attn);
    if (b.has_cross) {
      out.push_back(&b.lnx_g);
      out.push_back(&b.lnx_b);
      add_attn(b.cross);
    }
    out.push_back(&b.ln2_g);
    out.push_back(&b.ln2_b);
    out.insert(out.end(), {&b.w1, &b.b1, &b.w2, &b.b2});
  };
  out.push_back(&tok_emb_);
  out.push_back(&pos_emb_);
  for (auto& b : enc_blocks_) add_block(b);
  if (cfg_.architecture == Arch::EncoderDecoder) {
    out.push_back(&enc_lnf_g_);
    out.push_back(&enc_lnf_b_);
  }
  for (auto& b : dec_blocks_) add_block(b);
  out.push_back(&lnf_g_);
  out.push_back(&lnf_b_);
  return out;
}

template <typename T>
std::vector<const Param<T>*> Model<T>::params() const {
  auto mut = const_cast<Model<T>*>(this)->params();
  return {mut.begin(), mut.end()};
}

template <typename T>
int64_t Model<T>::param_count() const {
  int64_t n = 0;
  for (const auto* p : params()) n += p->w.numel();
  return n;
}

template <typename T>
void Model<T>::zero_grads() {
  for (auto* p : params()) p->g.zero();
}

template <typename T>
void Model<T>::alloc_block_state(BlockState<T>& bs, int B, int Tq, int Tk,
                                 bool cross) const {
  const int64_t h = cfg_.hidden_dim;
  const int64_t f = cfg_.mlp_dim();
  const int64_t rows = static_cast<int64_t>(B) * Tq;
  const int64_t a = cfg_.heads;
  bs.ln1_out.resize({rows, h});
  bs.ln1_mean.resize({rows});
  bs.ln1_rstd.resize({rows});
  bs.q.resize({rows, h});
  bs.k.resize({rows, h});
  bs.v.resize({rows, h});
  bs.att_p.resize({static_cast<int64_t>(B) * a, Tq, Tq});
  bs.att_out.resize({rows, h});
  bs.x1.resize({rows, h});
  if (cross) {
    const int64_t erows = static_cast<int64_t>(B) * Tk;
    bs.lnx_out.resize({rows, h});
    bs.lnx_mean.resize({rows});
    bs.lnx_rstd.resize({rows});
    bs.xq.resize({rows, h});
    bs.xk.resize({erows, h});
    bs.xv.resize({erows, h});
    bs.x_p.resize({static_cast<int64_t>(B) * a, Tq, Tk});
    bs.x_att_out.resize({rows, h});
    bs.x2.resize({rows, h});
  }
  bs.ln2_out.resize({rows, h});
  bs.ln2_mean.resize({rows});
  bs.ln2_rstd.resize({rows});
  bs.fc1_out.resize({rows, f});
  bs.gelu_out.resize({rows, f});
  bs.x3.resize({rows, h});
}

template <typename T>
void Model<T>::attention_forward(const T* q, const T* k, const T* v, T* p,
                                 T* out, int B, int Tq, int Tk,
                                 bool causal) const {
  const int h = cfg_.hidden_dim;
  const int A = cfg_.heads;
  const int dh = cfg_.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
#pragma omp parallel for schedule(static)
  for (int u = 0; u < B * A; ++u) {
    const int b = u / A;
    const int a = u % A;
    T* pu = p + static_cast<int64_t>(u) * Tq * Tk;
    for (int i = 0; i < Tq; ++i) {
      const int valid = causal ? std::min(i + 1, Tk) : Tk;
      const T* qrow = q + (static_cast<int64_t>(b) * Tq + i) * h + a * dh;
      T* prow = pu + static_cast<int64_t>(i) * Tk;
      for (int j = 0; j < valid; ++j) {
        const T* krow = k + (static_cast<int64_t>(b) * Tk + j) * h + a * dh;
        prow[j] = scale * dot_span(qrow, krow, dh);
      }
      kern::detail::softmax_row(prow, valid, Tk);
      T* orow = out + (static_cast<int64_t>(b) * Tq + i) * h + a * dh;
      std::fill(orow, orow + dh, T(0));
      for (int j = 0; j < valid; ++j) {
        const T* vrow = v + (static_cast<int64_t>(b) * Tk + j) * h + a * dh;
        axpy_span(prow[j], vrow, orow, dh);
      }
    }
  }
}

template <typename T>
void Model<T>::attention_backward(const T* q, const T* k, const T* v,
                                  const T* p, const T* d_out, T* dq, T* dk,
                                  T* dv, T* dp, int B, int Tq, int Tk,
                                  bool causal) const {
  const int h = cfg_.hidden_dim;
  const int A = cfg_.heads;
  const int dh = cfg_.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  // dq/dk/dv are zero-filled by the caller; each (b, head) unit touches a
  // disjoint column slice, so the parallel loop is deterministic.
#pragma omp parallel for schedule(static)
  for (int u = 0; u < B * A; ++u) {
    const int b = u / A;
    const int a = u % A;
    const T* pu = p + static_cast<int64_t>(u) * Tq * Tk;
    T* dpu = dp + static_cast<int64_t>(u) * Tq * Tk;
    for (int i = 0; i < Tq; ++i) {
      const int valid = causal ? std::min(i + 1, Tk) : Tk;
      const T* prow = pu + static_cast<int64_t>(i) * Tk;
      T* dprow = dpu + static_cast<int64_t>(i) * Tk;
      const T* dorow = d_out + (static_cast<int64_t>(b) * Tq + i) * h + a * dh;
      for (int j = 0; j < valid; ++j) {
        const T* vrow = v + (static_cast<int64_t>(b) * Tk + j) * h + a * dh;
        dprow[j] = dot_span(dorow, vrow, dh);
        T* dvrow = dv + (static_cast<int64_t>(b) * Tk + j) * h + a * dh;
        axpy_span(prow[j], dorow, dvrow, dh);
      }
      kern::detail::softmax_bwd_row(prow, dprow, dprow, valid, Tk);
      T* dqrow = dq + (static_cast<int64_t>(b) * Tq + i) * h + a * dh;
      for (int j = 0; j < valid; ++j) {
        const T ds = dprow[j] * scale;
        const T* krow = k + (static_cast<int64_t>(b) * Tk + j) * h + a * dh;
        axpy_span(ds, krow, dqrow, dh);
        const T* qrow = q + (static_cast<int64_t>(b) * Tq + i) * h + a * dh;
        T* dkrow = dk + (static_cast<int64_t>(b) * Tk + j) * h + a * dh;
        axpy_span(ds, qrow, dkrow, dh);
      }
    }
  }
}

template <typename T>
void Model<T>::block_forward(const BlockParams<T>& bp, BlockState<T>& bs,
                             const T* x_in, int B, int Tq, bool causal,
                             const T* enc_out, int Te, RunState<T>& state,
                             SplitMix64* dropout_rng) const {
  const int64_t h = cfg_.hidden_dim;
  const int64_t f = cfg_.mlp_dim();
  const int64_t rows = static_cast<int64_t>(B) * Tq;

  // self-attention sublayer
  kern::layernorm_fwd(x_in, bp.ln1_g.w.ptr(), bp.ln1_b.w.ptr(), bs.ln1_out.ptr(),
                      bs.ln1_mean.ptr(), bs.ln1_rstd.ptr(), rows, h);
  kern::matmul_nn(bs.ln1_out.ptr(), bp.attn.wq.w.ptr(), bs.q.ptr(), rows, h, h);
  kern::add_bias_rows(bs.q.ptr(), bp.attn.bq.w.ptr(), rows, h);
  kern::matmul_nn(bs.ln1_out.ptr(), bp.attn.wk.w.ptr(), bs.k.ptr(), rows, h, h);
  kern::add_bias_rows(bs.k.ptr(), bp.attn.bk.w.ptr(), rows, h);
  kern::matmul_nn(bs.ln1_out.ptr(), bp.attn.wv.w.ptr(), bs.v.ptr(), rows, h, h);
  kern::add_bias_rows(bs.v.ptr(), bp.attn.bv.w.ptr(), rows, h);
  attention_forward(bs.q.ptr(), bs.k.ptr(), bs.v.ptr(), bs.att_p.ptr(),
                    bs.att_out.ptr(), B, Tq, Tq, causal);
  kern::matmul_nn(bs.att_out.ptr(), bp.attn.wo.w.ptr(), bs.x1.ptr(), rows, h, h);
  kern::add_bias_rows(bs.x1.ptr(), bp.attn.bo.w.ptr(), rows, h);
  apply_dropout_fwd(bs.x1.ptr(), bs.sa_mask, rows * h, cfg_.dropout, dropout_rng);
  kern::add_inplace(bs.x1.ptr(), x_in, rows * h);

  const T* x_mid = bs.x1.ptr();

  // cross-attention sublayer (enc-dec decoder blocks)
  if (bp.has_cross) {
    const int64_t erows = static_cast<int64_t>(B) * Te;
    kern::layernorm_fwd(bs.x1.ptr(), bp.lnx_g.w.ptr(), bp.lnx_b.w.ptr(),
                        bs.lnx_out.ptr(), bs.lnx_mean.ptr(), bs.lnx_rstd.ptr(),
                        rows, h);
    kern::matmul_nn(bs.lnx_out.ptr(), bp.cross.wq.w.ptr(), bs.xq.ptr(), rows, h, h);
    kern::add_bias_rows(bs.xq.ptr(), bp.cross.bq.w.ptr(), rows, h);
    kern::matmul_nn(enc_out, bp.cross.wk.w.ptr(), bs.xk.ptr(), erows, h, h);
    kern::add_bias_rows(bs.xk.ptr(), bp.cross.bk.w.ptr(), erows, h);
    kern::matmul_nn(enc_out, bp.cross.wv.w.ptr(), bs.xv.ptr(), erows, h, h);
    kern::add_bias_rows(bs.xv.ptr(), bp.cross.bv.w.ptr(), erows, h);
    attention_forward(bs.xq.ptr(), bs.xk.ptr(), bs.xv.ptr(), bs.x_p.ptr(),
                      bs.x_att_out.ptr(), B, Tq, Te, false);
    kern::matmul_nn(bs.x_att_out.ptr(), bp.cross.wo.w.ptr(), bs.x2.ptr(), rows, h, h);
    kern::add_bias_rows(bs.x2.ptr(), bp.cross.bo.w.ptr(), rows, h);
    apply_dropout_fwd(bs.x2.ptr(), bs.ca_mask, rows * h, cfg_.dropout, dropout_rng);
    kern::add_inplace(bs.x2.ptr(), bs.x1.ptr(), rows * h);
    x_mid = bs.x2.ptr();
  }

  // MLP sublayer
  kern::layernorm_fwd(x_mid, bp.ln2_g.w.ptr(), bp.ln2_b.w.ptr(), bs.ln2_out.ptr(),
                      bs.ln2_mean.ptr(), bs.ln2_rstd.ptr(), rows, h);
  kern::matmul_nn(bs.ln2_out.ptr(), bp.w1.w.ptr(), bs.fc1_out.ptr(), rows, h, f);
  kern::add_bias_rows(bs.fc1_out.ptr(), bp.b1.w.ptr(), rows, f);
  kern::gelu_fwd(bs.fc1_out.ptr(), bs.gelu_out.ptr(), rows * f);
  kern::matmul_nn(bs.gelu_out.ptr(), bp.w2.w.ptr(), bs.x3.ptr(), rows, f, h);
  kern::add_bias_rows(bs.x3.ptr(), bp.b2.w.ptr(), rows, h);
  apply_dropout_fwd(bs.x3.ptr(), bs.mlp_mask, rows * h, cfg_.dropout, dropout_rng);
  kern::add_inplace(bs.x3.ptr(), x_mid, rows * h);
}

template <typename T>
void Model<T>::block_backward(BlockParams<T>& bp, BlockState<T>& bs,
                              const T* x_in, int B, int Tq, bool causal,
                              const T* enc_out, int Te, RunState<T>& state) {
  const int64_t h = cfg_.hidden_dim;
  const int64_t f = cfg_.mlp_dim();
  const int64_t rows = static_cast<int64_t>(B) * Tq;
  T* dx = state.dx.ptr();  // gradient w.r.t. the block output; becomes d(x_in)

  const T* x_mid = bp.has_cross ? bs.x2.ptr() : bs.x1.ptr();

  // MLP sublayer: x3 = x_mid + drop(fc2(gelu(fc1(ln2(x_mid)))))
  {
    T* dmlp = state.scratch_h1.ptr();
    std::memcpy(dmlp, dx, sizeof(T) * rows * h);
    apply_dropout_bwd(dmlp, bs.mlp_mask, rows * h, cfg_.dropout);
    kern::matmul_tn(bs.gelu_out.ptr(), dmlp, bp.w2.g.ptr(), rows, f, h, true);
    kern::bias_grad(dmlp, bp.b2.g.ptr(), rows, h);
    T* dgelu = state.scratch_f.ptr();
    kern::matmul_nt(dmlp, bp.w2.w.ptr(), dgelu, rows, h, f);
    kern::gelu_bwd(dgelu, bs.fc1_out.ptr(), dgelu, rows * f);  // in place
    kern::matmul_tn(bs.ln2_out.ptr(), dgelu, bp.w1.g.ptr(), rows, h, f, true);
    kern::bias_grad(dgelu, bp.b1.g.ptr(), rows, f);
    T* dln2 = state.scratch_h2.ptr();
    kern::matmul_nt(dgelu, bp.w1.w.ptr(), dln2, rows, f, h);
    kern::layernorm_bwd_dparams(dln2, x_mid, bs.ln2_mean.ptr(), bs.ln2_rstd.ptr(),
                                bp.ln2_g.g.ptr(), bp.ln2_b.g.ptr(), rows, h);
    T* dxm = state.scratch_h1.ptr();
    kern::layernorm_bwd_dx(dln2, x_mid, bp.ln2_g.w.ptr(), bs.ln2_mean.ptr(),
                           bs.ln2_rstd.ptr(), dxm, rows, h);
    kern::add_inplace(dx, dxm, rows * h);
  }

  // cross-attention sublayer: x2 = x1 + drop(proj(cross_att(lnx(x1), enc)))
  if (bp.has_cross) {
    const int64_t erows = static_cast<int64_t>(B) * Te;
    T* dca = state.scratch_h1.ptr();
    std::memcpy(dca, dx, sizeof(T) * rows * h);
    apply_dropout_bwd(dca, bs.ca_mask, rows * h, cfg_.dropout);
    kern::matmul_tn(bs.x_att_out.ptr(), dca, bp.cross.wo.g.ptr(), rows, h, h, true);
    kern::bias_grad(dca, bp.cross.bo.g.ptr(), rows, h);
    T* d_att = state.scratch_h2.ptr();
    kern::matmul_nt(dca, bp.cross.wo.w.ptr(), d_att, rows, h, h);

    T* dxq = state.scratch_h1.ptr();
    std::fill(dxq, dxq + rows * h, T(0));
    state.d_ek.zero();
    state.d_ev.zero();
    attention_backward(bs.xq.ptr(), bs.xk.ptr(), bs.xv.ptr(), bs.x_p.ptr(),
                       d_att, dxq, state.d_ek.ptr(), state.d_ev.ptr(),
                       state.d_p.ptr(), B, Tq, Te, false);

    kern::matmul_tn(enc_out, state.d_ek.ptr(), bp.cross.wk.g.ptr(), erows, h, h, true);
    kern::bias_grad(state.d_ek.ptr(), bp.cross.bk.g.ptr(), erows, h);
    kern::matmul_tn(enc_out, state.d_ev.ptr(), bp.cross.wv.g.ptr(), erows, h, h, true);
    kern::bias_grad(state.d_ev.ptr(), bp.cross.bv.g.ptr(), erows, h);
    kern::matmul_nt(state.d_ek.ptr(), bp.cross.wk.w.ptr(), state.scratch_e.ptr(),
                    erows, h, h);
    kern::add_inplace(state.d_enc.ptr(), state.scratch_e.ptr(), erows * h);
    kern::matmul_nt(state.d_ev.ptr(), bp.cross.wv.w.ptr(), state.scratch_e.ptr(),
                    erows, h, h);
    kern::add_inplace(state.d_enc.ptr(), state.scratch_e.ptr(), erows * h);

    kern::matmul_tn(bs.lnx_out.ptr(), dxq, bp.cross.wq.g.ptr(), rows, h, h, true);
    kern::bias_grad(dxq, bp.cross.bq.g.ptr(), rows, h);
    T* dlnx = state.scratch_h2.ptr();
    kern::matmul_nt(dxq, bp.cross.wq.w.ptr(), dlnx, rows, h, h);
    kern::layernorm_bwd_dparams(dlnx, bs.x1.ptr(), bs.lnx_mean.ptr(),
                                bs.lnx_rstd.ptr(), bp.lnx_g.g.ptr(),
                                bp.lnx_b.g.ptr(), rows, h);
    T* dx1 = state.scratch_h1.ptr();
    kern::layernorm_bwd_dx(dlnx, bs.x1.ptr(), bp.lnx_g.w.ptr(), bs.lnx_mean.ptr(),
                           bs.lnx_rstd.ptr(), dx1, rows, h);
    kern::add_inplace(dx, dx1, rows * h);
  }

  // self-attention sublayer: x1 = x_in + drop(proj(self_att(ln1(x_in))))
  {
    T* dsa = state.scratch_h1.ptr();
    std::memcpy(dsa, dx, sizeof(T) * rows * h);
    apply_dropout_bwd(dsa, bs.sa_mask, rows * h, cfg_.dropout);
    kern::matmul_tn(bs.att_out.ptr(), dsa, bp.attn.wo.g.ptr(), rows, h, h, true);
    kern::bias_grad(dsa, bp.attn.bo.g.ptr(), rows, h);
    T* d_att = state.scratch_h2.ptr();
    kern::matmul_nt(dsa, bp.attn.wo.w.ptr(), d_att, rows, h, h);

    T* dq = state.scratch_h1.ptr();
    T* dk = state.scratch_h3.ptr();
    T* dv = state.scratch_h4.ptr();
    std::fill(dq, dq + rows * h, T(0));
    std::fill(dk, dk + rows * h, T(0));
    std::fill(dv, dv + rows * h, T(0));
    attention_backward(bs.q.ptr(), bs.k.ptr(), bs.v.ptr(), bs.att_p.ptr(), d_att,
                       dq, dk, dv, state.d_p.ptr(), B, Tq, Tq, causal);

    kern::matmul_tn(bs.ln1_out.ptr(), dq, bp.attn.wq.g.ptr(), rows, h, h, true);
    kern::bias_grad(dq, bp.attn.bq.g.ptr(), rows, h);
    kern::matmul_tn(bs.ln1_out.ptr(), dk, bp.attn.wk.g.ptr(), rows, h, h, true);
    kern::bias_grad(dk, bp.attn.bk.g.ptr(), rows, h);
    kern::matmul_tn(bs.ln1_out.ptr(), dv, bp.attn.wv.g.ptr(), rows, h, h, true);
    kern::bias_grad(dv, bp.attn.bv.g.ptr(), rows, h);

    T* dln1 = state.scratch_h2.ptr();
    kern::matmul_nt(dq, bp.attn.wq.w.ptr(), dln1, rows, h, h);
    kern::matmul_nt(dk, bp.attn.wk.w.ptr(), dln1, rows, h, h, true);
    kern::matmul_nt(dv, bp.attn.wv.w.ptr(), dln1, rows, h, h, true);
    kern::layernorm_bwd_dparams(dln1, x_in, bs.ln1_mean.ptr(), bs.ln1_rstd.ptr(),
                                bp.ln1_g.g.ptr(), bp.ln1_b.g.ptr(), rows, h);
    T* dxin = state.scratch_h1.ptr();
    kern::layernorm_bwd_dx(dln1, x_in, bp.ln1_g.w.ptr(), bs.ln1_mean.ptr(),
                           bs.ln1_rstd.ptr(), dxin, rows, h);
    kern::add_inplace(dx, dxin, rows * h);
  }
}

template <typename T>
void Model<T>::forward(const int32_t* tokens, int B, int Td,
                       const int32_t* enc_tokens, int Te, RunState<T>& state,
                       SplitMix64* dropout_rng) const {
  const int64_t h = cfg_.hidden_dim;
  const int64_t v = Tokenizer::kVocab;
  const bool enc_dec = cfg_.architecture == Arch::EncoderDecoder;
  if (Td > cfg_.max_seq_len || (enc_dec && Te > cfg_.max_seq_len))
    throw LengthError("sequence length " + std::to_string(Td) +
                      " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
  if (enc_dec && (enc_tokens == nullptr || Te < 1))
    throw ConfigError("encoder-decoder forward requires encoder tokens");

  const int64_t rows = static_cast<int64_t>(B) * Td;
  const int64_t erows = enc_dec ? static_cast<int64_t>(B) * Te : 0;

  // (re)allocate the run state for this shape
  if (state.B != B || state.Td != Td || state.Te != (enc_dec ? Te : 0)) {
    state.B = B;
    state.Td = Td;
    state.Te = enc_dec ? Te : 0;
    state.dec_emb.resize({rows, h});
    state.dec.resize(dec_blocks_.size());
    for (auto& bs : state.dec) alloc_block_state(bs, B, Td, Te, enc_dec);
    state.lnf_out.resize({rows, h});
    state.lnf_mean.resize({rows});
    state.lnf_rstd.resize({rows});
    state.logits.resize({rows, v});
    state.dlogits.resize({rows, v});
    const int64_t rows_max = std::max(rows, erows);
    state.dx.resize({rows_max, h});
    state.scratch_h1.resize({rows_max, h});
    state.scratch_h2.resize({rows_max, h});
    state.scratch_h3.resize({rows_max, h});
    state.scratch_h4.resize({rows_max, h});
    state.scratch_f.resize({rows_max, static_cast<int64_t>(cfg_.mlp_dim())});
    const int64_t pa = static_cast<int64_t>(B) * cfg_.heads;
    const int64_t t_max = std::max<int64_t>(Td, enc_dec ? Te : 0);
    state.d_p.resize({pa, t_max, t_max});
    if (enc_dec) {
      state.enc_emb.resize({erows, h});
      state.enc.resize(enc_blocks_.size());
      for (auto& bs : state.enc) alloc_block_state(bs, B, Te, Te, false);
      state.enc_out.resize({erows, h});
      state.enc_lnf_mean.resize({erows});
      state.enc_lnf_rstd.resize({erows});
      state.d_enc.resize({erows, h});
      state.d_ek.resize({erows, h});
      state.d_ev.resize({erows, h});
      state.scratch_e.resize({erows, h});
    }
  }
  state.tokens.assign(tokens, tokens + rows);
  if (enc_dec) state.enc_tokens.assign(enc_tokens, enc_tokens + erows);

  auto embed = [&](const int32_t* toks, int Tlen, Tensor<T>& out) {
    const int64_t n = out.dim(0);
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < n; ++r) {
      const int32_t tok = toks[r];
      const int64_t t = r % Tlen;
      const T* te = tok_emb_.w.ptr() + static_cast<int64_t>(tok) * h;
      const T* pe = pos_emb_.w.ptr() + t * h;
      T* xr = out.ptr() + r * h;
#pragma omp simd
      for (int64_t e = 0; e < h; ++e) xr[e] = te[e] + pe[e];
    }
  };

  const T* enc_final = nullptr;
  if (enc_dec) {
    embed(state.enc_tokens.data(), Te, state.enc_emb);
    const T* x = state.enc_emb.ptr();
    for (size_t l = 0; l < enc_blocks_.size(); ++l) {
      block_forward(enc_blocks_[l], state.enc[l], x, B, Te, /*causal=*/false,
                    nullptr, 0, state, dropout_rng);
      x = state.enc[l].x3.ptr();
    }
    kern::layernorm_fwd(x, enc_lnf_g_.w.ptr(), enc_lnf_b_.w.ptr(),
                        state.enc_out.ptr(), state.enc_lnf_mean.ptr(),
                        state.enc_lnf_rstd.ptr(), erows, h);
    enc_final = state.enc_out.ptr();
  }

  embed(state.tokens.data(), Td, state.dec_emb);
  const T* x = state.dec_emb.ptr();
  for (size_t l = 0; l < dec_blocks_.size(); ++l) {
    block_forward(dec_blocks_[l], state.dec[l], x, B, Td, /*causal=*/true,
                  enc_final, Te, state, dropout_rng);
    x = state.dec[l].x3.ptr();
  }
  kern::layernorm_fwd(x, lnf_g_.w.ptr(), lnf_b_.w.ptr(), state.lnf_out.ptr(),
                      state.lnf_mean.ptr(), state.lnf_rstd.ptr(), rows, h);
  // tied output head: logits = lnf_out * tok_emb^T
  kern::matmul_nt(state.lnf_out.ptr(), tok_emb_.w.ptr(), state.logits.ptr(),
                  rows, h, v);
}

template <typename T>
double Model<T>::loss(const int32_t* targets, RunState<T>& state,
                      bool grad) const {
  const int64_t rows = static_cast<int64_t>(state.B) * state.Td;
  const int64_t v = Tokenizer::kVocab;
  const int64_t m = Tokenizer::kMoveTokens;

  int64_t count = 0;
  for (int64_t r = 0; r < rows; ++r)
    if (targets[r] >= 0) ++count;
  if (count == 0) throw DataError("loss: no unmasked target positions");

  std::vector<double> row_loss(rows, 0.0);
  if (grad) state.dlogits.zero();
  const double inv_count = 1.0 / static_cast<double>(count);
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const int32_t tgt = targets[r];
    if (tgt < 0) continue;
    const T* lrow = state.logits.ptr() + r * v;
    // softmax restricted to the 60 move tokens (BOS/PAD excluded)
    double mx = static_cast<double>(lrow[0]);
    for (int64_t j = 1; j < m; ++j) mx = std::max(mx, static_cast<double>(lrow[j]));
    double z = 0.0;
    for (int64_t j = 0; j < m; ++j) z += std::exp(static_cast<double>(lrow[j]) - mx);
    const double logz = std::log(z) + mx;
    row_loss[r] = logz - static_cast<double>(lrow[tgt]);
    if (grad) {
      T* drow = state.dlogits.ptr() + r * v;
      for (int64_t j = 0; j < m; ++j) {
        const double p = std::exp(static_cast<double>(lrow[j]) - logz);
        drow[j] = static_cast<T>((p - (j == tgt ? 1.0 : 0.0)) * inv_count);
      }
    }
  }
  double total = 0.0;
  for (int64_t r = 0; r < rows; ++r) total += row_loss[r];
  return total * inv_count;
}

template <typename T>
void Model<T>::backward(RunState<T>& state) {
  const int64_t h = cfg_.hidden_dim;
  const int64_t v = Tokenizer::kVocab;
  const bool enc_dec = cfg_.architecture == Arch::EncoderDecoder;
  const int B = state.B;
  const int Td = state.Td;
  const int Te = state.Te;
  const int64_t rows = static_cast<int64_t>(B) * Td;

  // head (tied): logits = lnf_out * tok_emb^T
  kern::matmul_tn(state.dlogits.ptr(), state.lnf_out.ptr(), tok_emb_.g.ptr(),
                  rows, v, h, true);
  T* dxf = state.scratch_h2.ptr();
  kern::matmul_nn(state.dlogits.ptr(), tok_emb_.w.ptr(), dxf, rows, v, h);

  const T* x_last =
      dec_blocks_.empty() ? state.dec_emb.ptr() : state.dec.back().x3.ptr();
  kern::layernorm_bwd_dparams(dxf, x_last, state.lnf_mean.ptr(),
                              state.lnf_rstd.ptr(), lnf_g_.g.ptr(),
                              lnf_b_.g.ptr(), rows, h);
  kern::layernorm_bwd_dx(dxf, x_last, lnf_g_.w.ptr(), state.lnf_mean.ptr(),
                         state.lnf_rstd.ptr(), state.dx.ptr(), rows, h);

  const T* enc_final = enc_dec ? state.enc_out.ptr() : nullptr;
  if (enc_dec) state.d_enc.zero();
  for (int l = static_cast<int>(dec_blocks_.size()) - 1; l >= 0; --l) {
    const T* x_in = l == 0 ? state.dec_emb.ptr() : state.dec[l - 1].x3.ptr();
    block_backward(dec_blocks_[l], state.dec[l], x_in, B, Td, true, enc_final,
                   Te, state);
  }

  auto scatter_embedding = [&](const std::vector<int32_t>& toks, int Tlen,
                               const T* dx, int64_t n_rows) {
    for (int64_t r = 0; r < n_rows; ++r) {
      const T* drow = dx + r * h;
      T* trow = tok_emb_.g.ptr() + static_cast<int64_t>(toks[r]) * h;
      for (int64_t e = 0; e < h; ++e) trow[e] += drow[e];
    }
#pragma omp parallel for schedule(static)
    for (int t = 0; t < Tlen; ++t) {
      T* prow = pos_emb_.g.ptr() + static_cast<int64_t>(t) * h;
      for (int64_t r = t; r < n_rows; r += Tlen) {
        const T* drow = dx + r * h;
        for (int64_t e = 0; e < h; ++e) prow[e] += drow[e];
      }
    }
  };
  scatter_embedding(state.tokens, Td, state.dx.ptr(), rows);

  if (enc_dec) {
    const int64_t erows = static_cast<int64_t>(B) * Te;
    // through the encoder's final layernorm
    const T* e_last =
        enc_blocks_.empty() ? state.enc_emb.ptr() : state.enc.back().x3.ptr();
    kern::layernorm_bwd_dparams(state.d_enc.ptr(), e_last,
                                state.enc_lnf_mean.ptr(), state.enc_lnf_rstd.ptr(),
                                enc_lnf_g_.g.ptr(), enc_lnf_b_.g.ptr(), erows, h);
    T* d_enc_x = state.scratch_e.ptr();
    kern::layernorm_bwd_dx(state.d_enc.ptr(), e_last, enc_lnf_g_.w.ptr(),
                           state.enc_lnf_mean.ptr(), state.enc_lnf_rstd.ptr(),
                           d_enc_x, erows, h);
    // encoder blocks run on the smaller row count; reuse dx buffer prefix
    std::memcpy(state.dx.ptr(), d_enc_x, sizeof(T) * erows * h);
    for (int l = static_cast<int>(enc_blocks_.size()) - 1; l >= 0; --l) {
      const T* x_in = l == 0 ? state.enc_emb.ptr() : state.enc[l - 1].x3.ptr();
      block_backward(enc_blocks_[l], state.enc[l], x_in, B, Te, false, nullptr,
                     0, state);
    }
    scatter_embedding(state.enc_tokens, Te, state.dx.ptr(), erows);
  }
}

template <typename T>
const T* Model<T>::block_output(const RunState<T>& state, int layer) const {
  if (layer < 0 || layer >= static_cast<int>(dec_blocks_.size()))
    throw LayerError("decoder layer " + std::to_string(layer) +
                     " out of range [0, " + std::to_string(dec_blocks_.size()) + ")");
  return state.dec[layer].x3.ptr();
}

}  // namespace othx::nn
