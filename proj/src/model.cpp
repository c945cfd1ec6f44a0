#include "othx/model.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "othx/hash.hpp"
#include "othx/model_impl.hpp"

namespace othx::nn {

template class Model<float>;
template class Model<double>;

// ---- checkpoint container ----------------------------------------------------

namespace {

constexpr char kMagic[8] = {'O', 'T', 'H', 'X', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& in) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {
      {"architecture",
       c.architecture == Arch::DecoderOnly ? "decoder_only" : "encoder_decoder"},
      {"layers", c.layers},
      {"hidden_dim", c.hidden_dim},
      {"heads", c.heads},
      {"max_seq_len", c.max_seq_len},
      {"dropout", c.dropout},
      {"seed", c.seed},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  const std::string arch = j.at("architecture").get<std::string>();
  if (arch == "decoder_only")
    c.architecture = Arch::DecoderOnly;
  else if (arch == "encoder_decoder")
    c.architecture = Arch::EncoderDecoder;
  else
    throw ConfigError("unknown architecture '" + arch + "'");
  c.layers = j.at("layers").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const Model<float>& model, const TrainMeta& meta,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);

  nlohmann::json j = {
      {"config", config_to_json(model.config())},
      {"meta",
       {{"dataset_hash", hex64(meta.dataset_hash)},
        {"steps", meta.steps},
        {"final_loss", meta.final_loss},
        {"optimizer_state_hash", hex64(meta.optimizer_state_hash)}}},
  };
  const std::string js = j.dump();
  write_u32(out, static_cast<uint32_t>(js.size()));
  out.write(js.data(), static_cast<std::streamsize>(js.size()));

  const auto params = model.params();
  write_u32(out, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    write_u32(out, static_cast<uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u32(out, static_cast<uint32_t>(p->w.shape.size()));
    for (int64_t d : p->w.shape) write_u64(out, static_cast<uint64_t>(d));
    out.write(reinterpret_cast<const char*>(p->w.data.data()),
              static_cast<std::streamsize>(p->w.data.size() * sizeof(float)));
  }
  if (!out) throw IoError("write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path);
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));

  const uint32_t jlen = read_u32(in);
  std::string js(jlen, '\0');
  in.read(js.data(), jlen);
  const auto j = nlohmann::json::parse(js);

  LoadedCheckpoint ck{Model<float>(config_from_json(j.at("config"))), TrainMeta{}};
  const auto& m = j.at("meta");
  ck.meta.dataset_hash = std::stoull(m.at("dataset_hash").get<std::string>(), nullptr, 16);
  ck.meta.steps = m.at("steps").get<int64_t>();
  ck.meta.final_loss = m.at("final_loss").get<double>();
  ck.meta.optimizer_state_hash =
      std::stoull(m.at("optimizer_state_hash").get<std::string>(), nullptr, 16);

  std::map<std::string, Param<float>*> by_name;
  for (auto* p : ck.model.params()) by_name[p->name] = p;

  const uint32_t n_tensors = read_u32(in);
  for (uint32_t i = 0; i < n_tensors; ++i) {
    const uint32_t nlen = read_u32(in);
    std::string name(nlen, '\0');
    in.read(name.data(), nlen);
    const uint32_t ndim = read_u32(in);
    std::vector<int64_t> shape(ndim);
    for (auto& d : shape) d = static_cast<int64_t>(read_u64(in));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("unknown tensor '" + name + "' in " + path);
    if (it->second->w.shape != shape)
      throw IoError("shape mismatch for tensor '" + name + "' in " + path);
    in.read(reinterpret_cast<char*>(it->second->w.data.data()),
            static_cast<std::streamsize>(it->second->w.data.size() * sizeof(float)));
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  return ck;
}

uint64_t checkpoint_weight_hash(const Model<float>& model) {
  Fnv1a h;
  for (const auto* p : model.params()) {
    h.update(p->name);
    h.update(p->w.data.data(), p->w.data.size() * sizeof(float));
  }
  return h.value();
}

// ---- inference helpers --------------------------------------------------------

void split_enc_dec(std::span<const int32_t> prefix, std::vector<int32_t>& enc,
                   std::vector<int32_t>& dec) {
  // Encoder consumes exactly one token: the first move, or BOS before any
  // move exists. Decoder sees BOS followed by the remaining moves.
  enc.clear();
  dec.clear();
  enc.push_back(prefix.size() > 1 ? prefix[1] : Tokenizer::kBos);
  dec.push_back(Tokenizer::kBos);
  for (size_t i = 2; i < prefix.size(); ++i) dec.push_back(prefix[i]);
}

namespace {
void validate_prefix(const Model<float>& model, std::span<const int32_t> prefix) {
  if (prefix.empty() || prefix[0] != Tokenizer::kBos)
    throw ConfigError("prefix must begin with BOS");
  if (static_cast<int>(prefix.size()) >= model.config().max_seq_len)
    throw LengthError("prefix length " + std::to_string(prefix.size()) +
                      " must be < max_seq_len " +
                      std::to_string(model.config().max_seq_len));
  for (size_t i = 1; i < prefix.size(); ++i)
    if (!Tokenizer::is_move_token(prefix[i]))
      throw ConfigError("prefix token " + std::to_string(i) + " is not a move token");
}
}  // namespace

int32_t argmax_move_token(const float* logits_row) {
  int32_t best = 0;
  for (int32_t j = 1; j < Tokenizer::kMoveTokens; ++j)
    if (logits_row[j] > logits_row[best]) best = j;  // ties keep the lowest id
  return best;
}

int32_t argmax_move_token(const double* probs60) {
  int32_t best = 0;
  for (int32_t j = 1; j < Tokenizer::kMoveTokens; ++j)
    if (probs60[j] > probs60[best]) best = j;
  return best;
}

void StepwiseRunner::run_prefix(std::span<const int32_t> prefix) {
  validate_prefix(*model_, prefix);
  if (model_->config().architecture == Arch::DecoderOnly) {
    model_->forward(prefix.data(), 1, static_cast<int>(prefix.size()), nullptr, 0,
                    state_);
  } else {
    split_enc_dec(prefix, enc_buf_, dec_buf_);
    model_->forward(dec_buf_.data(), 1, static_cast<int>(dec_buf_.size()),
                    enc_buf_.data(), static_cast<int>(enc_buf_.size()), state_);
  }
}

std::vector<double> StepwiseRunner::distribution(std::span<const int32_t> prefix) {
  run_prefix(prefix);
  const int64_t rows = state_.logits.dim(0);
  const float* row = state_.logits.ptr() + (rows - 1) * Tokenizer::kVocab;
  std::vector<double> p(Tokenizer::kMoveTokens);
  double mx = row[0];
  for (int j = 1; j < Tokenizer::kMoveTokens; ++j) mx = std::max(mx, (double)row[j]);
  double z = 0.0;
  for (int j = 0; j < Tokenizer::kMoveTokens; ++j) {
    p[j] = std::exp(static_cast<double>(row[j]) - mx);
    z += p[j];
  }
  for (auto& x : p) x /= z;
  return p;
}

int32_t StepwiseRunner::argmax_move(std::span<const int32_t> prefix) {
  run_prefix(prefix);
  const int64_t rows = state_.logits.dim(0);
  return argmax_move_token(state_.logits.ptr() + (rows - 1) * Tokenizer::kVocab);
}

const std::vector<float>& StepwiseRunner::step_logits(const oth::GameRecord& game) {
  const int L = static_cast<int>(game.moves.size());
  const int V = Tokenizer::kVocab;
  logits_.assign(static_cast<size_t>(L) * V, 0.0f);
  if (L == 0) return logits_;
  const auto tokens = Tokenizer::encode_game(game);
  if (model_->config().architecture == Arch::DecoderOnly) {
    model_->forward(tokens.data(), 1, L + 1, nullptr, 0, state_);
    std::memcpy(logits_.data(), state_.logits.ptr(),
                sizeof(float) * static_cast<size_t>(L) * V);
  } else {
    // main run: encoder gets move 1; decoder rows 0..L-2 predict steps 2..L
    split_enc_dec(std::span<const int32_t>(tokens), enc_buf_, dec_buf_);
    model_->forward(dec_buf_.data(), 1, static_cast<int>(dec_buf_.size()),
                    enc_buf_.data(), 1, state_);
    if (L >= 2)
      std::memcpy(logits_.data() + static_cast<size_t>(V), state_.logits.ptr(),
                  sizeof(float) * static_cast<size_t>(L - 1) * V);
    // step 1 (no move seen yet): encoder and decoder both get BOS
    const int32_t bos = Tokenizer::kBos;
    model_->forward(&bos, 1, 1, &bos, 1, state_step1_);
    std::memcpy(logits_.data(), state_step1_.logits.ptr(), sizeof(float) * V);
  }
  return logits_;
}

void StepwiseRunner::step_hidden(const oth::GameRecord& game, int layer,
                                 float* out) {
  const int L = static_cast<int>(game.moves.size());
  const int h = model_->config().hidden_dim;
  if (L == 0) return;
  const auto tokens = Tokenizer::encode_game(game);
  if (model_->config().architecture == Arch::DecoderOnly) {
    model_->forward(tokens.data(), 1, L + 1, nullptr, 0, state_);
    const float* hid = model_->block_output(state_, layer);
    std::memcpy(out, hid, sizeof(float) * static_cast<size_t>(L) * h);
  } else {
    split_enc_dec(std::span<const int32_t>(tokens), enc_buf_, dec_buf_);
    model_->forward(dec_buf_.data(), 1, static_cast<int>(dec_buf_.size()),
                    enc_buf_.data(), 1, state_);
    const float* hid = model_->block_output(state_, layer);
    if (L >= 2)
      std::memcpy(out + static_cast<size_t>(h), hid,
                  sizeof(float) * static_cast<size_t>(L - 1) * h);
    const int32_t bos = Tokenizer::kBos;
    model_->forward(&bos, 1, 1, &bos, 1, state_step1_);
    std::memcpy(out, model_->block_output(state_step1_, layer),
                sizeof(float) * static_cast<size_t>(h));
  }
}

std::vector<double> next_move_distribution(const Model<float>& model,
                                           std::span<const int32_t> prefix) {
  StepwiseRunner runner(model);
  return runner.distribution(prefix);
}

std::vector<oth::Tile> generate_k(const Model<float>& model,
                                  std::span<const int32_t> prefix, int k) {
  if (k != 1 && k != 2) throw ConfigError("generate_k supports k in {1, 2}");
  if (static_cast<int>(prefix.size()) + k > model.config().max_seq_len)
    throw LengthError("prefix + k exceeds max_seq_len");
  StepwiseRunner runner(model);
  std::vector<int32_t> cur(prefix.begin(), prefix.end());
  std::vector<oth::Tile> out;
  for (int i = 0; i < k; ++i) {
    const int32_t tok = runner.argmax_move(cur);
    out.push_back(Tokenizer::tile_of(tok));
    cur.push_back(tok);
  }
  return out;
}

}  // namespace othx::nn
