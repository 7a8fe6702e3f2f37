#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gfd/groupagg.hpp"
#include "gfd/tensor.hpp"

namespace gfd {

struct ModelConfig {
  int feat_dim = 0;       // d, from the dataset
  int hidden_dim = 32;    // n_hidden
  int num_layers = 2;     // encoder layers
  int num_heads = 4;
  int k_hops = 2;
  int num_relations = 0;
  int num_classes = kNumClasses;
  double dropout = 0.1;
  double weight_decay = 1e-4;  // lambda in the L2 term of the loss
  Activation act = Activation::relu;
  // the three encoding tables can be dropped independently
  bool use_hop_encoding = true;
  bool use_relation_encoding = true;
  bool use_group_encoding = true;
  // false = plain-mean sequence variant without label groups
  bool group_agg = true;

  int groups_per_hop() const { return num_classes + 1; }
  int block_len() const {
    return group_agg ? groups_per_hop() * k_hops + 1 : k_hops + 1;
  }
  int seq_len() const { return num_relations * block_len(); }
  int head_dim() const { return hidden_dim / num_heads; }
  void validate() const;

  // per-position encoding table indices for one full sequence
  std::vector<int> hop_indices() const;
  std::vector<int> relation_indices() const;
  std::vector<int> group_indices() const;
};

uint64_t config_hash(const ModelConfig& cfg);

// attention weights of every layer/head for one forward pass
struct AttentionCapture {
  int layers = 0, heads = 0, batch = 0, seq = 0;
  std::vector<double> w;  // layers x heads x batch x seq x seq

  double at(int l, int m, int b, int i, int j) const {
    return w[((((static_cast<size_t>(l) * heads + m) * batch + b) * seq) + i) * seq + j];
  }
};

class GroupTransformer {
 public:
  GroupTransformer(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<TensorPtr>& parameters() const { return params_; }
  size_t parameter_count() const;
  void zero_grad();

  // input: [B, S, d]; returns probabilities [B, 1, 1]
  TensorPtr forward(Tape& tape, const TensorPtr& input, bool training, Rng& dropout_rng,
                    AttentionCapture* attn = nullptr) const;
  // projected + encoded input, before the encoder stack: [B, S, d_H]
  TensorPtr encode_input(Tape& tape, const TensorPtr& input) const;
  // BCE sum plus weight_decay * sum of squared parameters
  TensorPtr loss(Tape& tape, const TensorPtr& probs, const std::vector<double>& targets) const;

  std::vector<std::vector<double>> snapshot_values() const;
  void restore_values(const std::vector<std::vector<double>>& snap);

  void save_checkpoint(const std::string& path) const;
  // throws if the stored config hash differs from cfg
  static GroupTransformer load_checkpoint(const std::string& path, const ModelConfig& cfg);

 private:
  struct Layer {
    std::vector<TensorPtr> wq, wk, wv;  // per head, [d_H, d_H/M]
    TensorPtr wo;
    TensorPtr ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    TensorPtr mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  };

  TensorPtr reg(TensorPtr p);

  ModelConfig cfg_;
  std::vector<TensorPtr> params_;
  TensorPtr proj_w_, proj_b_;
  TensorPtr enc_hop_, enc_rel_, enc_group_;
  std::vector<Layer> layers_;
  TensorPtr head_w1_, head_b1_, head_w2_, head_b2_;
};

// builds the [B, S, d] input tensor for a batch of dataset rows
TensorPtr batch_input(const SequenceDataset& ds, const std::vector<int32_t>& nodes);

}  // namespace gfd
