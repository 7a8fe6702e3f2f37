#include "gfd/model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gfd {

namespace {

constexpr char kCkptMagic[8] = {'G', 'F', 'D', 'C', 'K', 'P', 'T', '1'};

uint64_t fnv1a(uint64_t h, const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a_str(uint64_t h, const std::string& s) { return fnv1a(h, s.data(), s.size()); }

std::vector<double> uniform_init(Rng& rng, size_t n, int fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

std::vector<double> normal_init(Rng& rng, size_t n, double stddev) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, stddev);
  return v;
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
}

}  // namespace

void ModelConfig::validate() const {
  if (feat_dim <= 0 || num_relations <= 0) throw std::invalid_argument("model config incomplete");
  if (hidden_dim <= 0 || num_layers <= 0 || num_heads <= 0 || k_hops <= 0)
    throw std::invalid_argument("model dimensions must be positive");
  if (hidden_dim % num_heads != 0)
    throw std::invalid_argument("hidden_dim must be divisible by num_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0,1)");
  if (!group_agg && use_group_encoding)
    throw std::invalid_argument("group encoding requires grouped sequences");
}

std::vector<int> ModelConfig::hop_indices() const {
  std::vector<int> idx;
  const int per_hop = group_agg ? groups_per_hop() : 1;
  for (int r = 0; r < num_relations; ++r) {
    idx.push_back(0);  // raw target row
    for (int k = 1; k <= k_hops; ++k)
      for (int p = 0; p < per_hop; ++p) idx.push_back(k);
  }
  return idx;
}

std::vector<int> ModelConfig::relation_indices() const {
  std::vector<int> idx;
  for (int r = 0; r < num_relations; ++r)
    for (int i = 0; i < block_len(); ++i) idx.push_back(r);
  return idx;
}

std::vector<int> ModelConfig::group_indices() const {
  // target row carries the unknown-group index: its own label never enters
  std::vector<int> idx;
  for (int r = 0; r < num_relations; ++r) {
    idx.push_back(kGroupUnknown);
    for (int k = 1; k <= k_hops; ++k) {
      if (group_agg) {
        idx.push_back(kGroupBenign);
        idx.push_back(kGroupFraud);
      }
      idx.push_back(kGroupUnknown);
    }
  }
  return idx;
}

uint64_t config_hash(const ModelConfig& cfg) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](int64_t v) { h = fnv1a(h, &v, sizeof(v)); };
  h = fnv1a_str(h, "gfd-model-v1");
  mix(cfg.feat_dim);
  mix(cfg.hidden_dim);
  mix(cfg.num_layers);
  mix(cfg.num_heads);
  mix(cfg.k_hops);
  mix(cfg.num_relations);
  mix(cfg.num_classes);
  mix(static_cast<int64_t>(cfg.act));
  mix(cfg.use_hop_encoding);
  mix(cfg.use_relation_encoding);
  mix(cfg.use_group_encoding);
  mix(cfg.group_agg);
  return h;
}

TensorPtr GroupTransformer::reg(TensorPtr p) {
  params_.push_back(p);
  return p;
}

GroupTransformer::GroupTransformer(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const int d = cfg.feat_dim, dH = cfg.hidden_dim, hd = cfg.head_dim();
  const int P = cfg.groups_per_hop(), K = cfg.k_hops, R = cfg.num_relations;

  proj_w_ = reg(make_parameter("proj.w", {1, d, dH}, uniform_init(rng, static_cast<size_t>(d) * dH, d)));
  proj_b_ = reg(make_parameter("proj.b", {1, 1, dH}, std::vector<double>(dH, 0.0)));
  enc_hop_ = reg(make_parameter("enc.hop", {1, K + 1, dH}, normal_init(rng, static_cast<size_t>(K + 1) * dH, 0.02)));
  enc_rel_ = reg(make_parameter("enc.rel", {1, R, dH}, normal_init(rng, static_cast<size_t>(R) * dH, 0.02)));
  enc_group_ = reg(make_parameter("enc.group", {1, P, dH}, normal_init(rng, static_cast<size_t>(P) * dH, 0.02)));

  for (int l = 0; l < cfg.num_layers; ++l) {
    Layer layer;
    const std::string prefix = "enc" + std::to_string(l) + ".";
    for (int m = 0; m < cfg.num_heads; ++m) {
      const std::string hp = prefix + "h" + std::to_string(m) + ".";
      layer.wq.push_back(reg(make_parameter(hp + "wq", {1, dH, hd}, uniform_init(rng, static_cast<size_t>(dH) * hd, dH))));
      layer.wk.push_back(reg(make_parameter(hp + "wk", {1, dH, hd}, uniform_init(rng, static_cast<size_t>(dH) * hd, dH))));
      layer.wv.push_back(reg(make_parameter(hp + "wv", {1, dH, hd}, uniform_init(rng, static_cast<size_t>(dH) * hd, dH))));
    }
    layer.wo = reg(make_parameter(prefix + "wo", {1, dH, dH}, uniform_init(rng, static_cast<size_t>(dH) * dH, dH)));
    layer.ln1_gain = reg(make_parameter(prefix + "ln1.g", {1, 1, dH}, std::vector<double>(dH, 1.0)));
    layer.ln1_bias = reg(make_parameter(prefix + "ln1.b", {1, 1, dH}, std::vector<double>(dH, 0.0)));
    layer.mlp_w1 = reg(make_parameter(prefix + "mlp.w1", {1, dH, dH}, uniform_init(rng, static_cast<size_t>(dH) * dH, dH)));
    layer.mlp_b1 = reg(make_parameter(prefix + "mlp.b1", {1, 1, dH}, std::vector<double>(dH, 0.0)));
    layer.mlp_w2 = reg(make_parameter(prefix + "mlp.w2", {1, dH, dH}, uniform_init(rng, static_cast<size_t>(dH) * dH, dH)));
    layer.mlp_b2 = reg(make_parameter(prefix + "mlp.b2", {1, 1, dH}, std::vector<double>(dH, 0.0)));
    layer.ln2_gain = reg(make_parameter(prefix + "ln2.g", {1, 1, dH}, std::vector<double>(dH, 1.0)));
    layer.ln2_bias = reg(make_parameter(prefix + "ln2.b", {1, 1, dH}, std::vector<double>(dH, 0.0)));
    layers_.push_back(std::move(layer));
  }

  const int zdim = R * dH;
  head_w1_ = reg(make_parameter("head.w1", {1, zdim, dH}, uniform_init(rng, static_cast<size_t>(zdim) * dH, zdim)));
  head_b1_ = reg(make_parameter("head.b1", {1, 1, dH}, std::vector<double>(dH, 0.0)));
  head_w2_ = reg(make_parameter("head.w2", {1, dH, 1}, uniform_init(rng, dH, dH)));
  head_b2_ = reg(make_parameter("head.b2", {1, 1, 1}, std::vector<double>(1, 0.0)));
}

size_t GroupTransformer::parameter_count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void GroupTransformer::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

TensorPtr GroupTransformer::encode_input(Tape& tape, const TensorPtr& input) const {
  if (input->shape.rows != cfg_.seq_len() || input->shape.cols != cfg_.feat_dim)
    throw std::invalid_argument("input shape " + input->shape.str() + " does not match config");
  TensorPtr x = activation(tape, add(tape, matmul(tape, input, proj_w_), proj_b_), cfg_.act);
  if (cfg_.use_hop_encoding)
    x = add(tape, x, embed_lookup(tape, enc_hop_, cfg_.hop_indices()));
  if (cfg_.use_relation_encoding)
    x = add(tape, x, embed_lookup(tape, enc_rel_, cfg_.relation_indices()));
  if (cfg_.use_group_encoding)
    x = add(tape, x, embed_lookup(tape, enc_group_, cfg_.group_indices()));
  return x;
}

TensorPtr GroupTransformer::forward(Tape& tape, const TensorPtr& input, bool training,
                                    Rng& dropout_rng, AttentionCapture* attn) const {
  const int B = input->shape.batch, S = cfg_.seq_len(), M = cfg_.num_heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden_dim));

  if (attn) {
    attn->layers = cfg_.num_layers;
    attn->heads = M;
    attn->batch = B;
    attn->seq = S;
    attn->w.assign(static_cast<size_t>(cfg_.num_layers) * M * B * S * S, 0.0);
  }

  TensorPtr x = encode_input(tape, input);
  for (int l = 0; l < cfg_.num_layers; ++l) {
    const Layer& layer = layers_[l];
    std::vector<TensorPtr> heads;
    for (int m = 0; m < M; ++m) {
      TensorPtr q = matmul(tape, x, layer.wq[m]);
      TensorPtr k = matmul(tape, x, layer.wk[m]);
      TensorPtr v = matmul(tape, x, layer.wv[m]);
      TensorPtr w = row_softmax(tape, scale(tape, matmul_nt(tape, q, k), inv_scale));
      if (attn) {
        double* dst = attn->w.data() + (static_cast<size_t>(l) * M + m) * B * S * S;
        std::memcpy(dst, w->value.data(), sizeof(double) * w->value.size());
      }
      w = dropout(tape, w, cfg_.dropout, training, dropout_rng);
      heads.push_back(matmul(tape, w, v));
    }
    TensorPtr attn_out = matmul(tape, concat_cols(tape, heads), layer.wo);
    attn_out = dropout(tape, attn_out, cfg_.dropout, training, dropout_rng);
    x = layer_norm(tape, add(tape, x, attn_out), layer.ln1_gain, layer.ln1_bias);
    TensorPtr hidden = activation(tape, add(tape, matmul(tape, x, layer.mlp_w1), layer.mlp_b1), cfg_.act);
    TensorPtr mlp_out = add(tape, matmul(tape, hidden, layer.mlp_w2), layer.mlp_b2);
    mlp_out = dropout(tape, mlp_out, cfg_.dropout, training, dropout_rng);
    x = layer_norm(tape, add(tape, x, mlp_out), layer.ln2_gain, layer.ln2_bias);
  }

  // inter-aggregation: concatenate the lead row of every relation block
  std::vector<int> lead;
  for (int r = 0; r < cfg_.num_relations; ++r) lead.push_back(r * cfg_.block_len());
  TensorPtr z = flatten_rows(tape, gather_rows(tape, x, lead));
  TensorPtr hidden = activation(tape, add(tape, matmul(tape, z, head_w1_), head_b1_), cfg_.act);
  TensorPtr logit = add(tape, matmul(tape, hidden, head_w2_), head_b2_);
  return sigmoid(tape, logit);
}

TensorPtr GroupTransformer::loss(Tape& tape, const TensorPtr& probs,
                                 const std::vector<double>& targets) const {
  TensorPtr total = bce_sum(tape, probs, targets);
  if (cfg_.weight_decay > 0.0) {
    TensorPtr penalty;
    for (const auto& p : params_) {
      TensorPtr sq = sum_squares(tape, p);
      penalty = penalty ? add(tape, penalty, sq) : sq;
    }
    total = add(tape, total, scale(tape, penalty, cfg_.weight_decay));
  }
  return total;
}

std::vector<std::vector<double>> GroupTransformer::snapshot_values() const {
  std::vector<std::vector<double>> snap;
  snap.reserve(params_.size());
  for (const auto& p : params_) snap.push_back(p->value);
  return snap;
}

void GroupTransformer::restore_values(const std::vector<std::vector<double>>& snap) {
  if (snap.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (size_t i = 0; i < snap.size(); ++i) params_[i]->value = snap[i];
}

void GroupTransformer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    write_raw(out, config_hash(cfg_));
    write_raw(out, static_cast<uint64_t>(params_.size()));
    for (const auto& p : params_) {
      write_raw(out, static_cast<uint32_t>(p->name.size()));
      out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
      write_raw(out, static_cast<uint64_t>(p->shape.batch));
      write_raw(out, static_cast<uint64_t>(p->shape.rows));
      write_raw(out, static_cast<uint64_t>(p->shape.cols));
      for (double v : p->value) write_raw(out, static_cast<float>(v));
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

GroupTransformer GroupTransformer::load_checkpoint(const std::string& path, const ModelConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw std::runtime_error("bad magic in checkpoint: " + path);
  uint64_t hash, count;
  read_raw(in, hash);
  if (hash != config_hash(cfg))
    throw std::runtime_error("checkpoint config hash mismatch: " + path);
  read_raw(in, count);

  GroupTransformer model(cfg, /*seed=*/0);
  if (count != model.params_.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (const auto& p : model.params_) {
    uint32_t name_len;
    read_raw(in, name_len);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != p->name) throw std::runtime_error("checkpoint parameter order mismatch");
    uint64_t b, r, c;
    read_raw(in, b);
    read_raw(in, r);
    read_raw(in, c);
    if (Shape{static_cast<int>(b), static_cast<int>(r), static_cast<int>(c)} != p->shape)
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    for (double& v : p->value) {
      float f;
      read_raw(in, f);
      v = static_cast<double>(f);
    }
  }
  return model;
}

TensorPtr batch_input(const SequenceDataset& ds, const std::vector<int32_t>& nodes) {
  const int S = ds.seq_len, d = ds.feature_dim;
  auto t = make_tensor({static_cast<int>(nodes.size()), S, d});
  const size_t row_count = static_cast<size_t>(S) * d;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const float* src = ds.sequence(nodes[i]);
    double* dst = t->value.data() + i * row_count;
    for (size_t j = 0; j < row_count; ++j) dst[j] = static_cast<double>(src[j]);
  }
  return t;
}

}  // namespace gfd
