#pragma once

#include <string>
#include <vector>

#include "gfd/groupagg.hpp"
#include "gfd/model.hpp"
#include "gfd/train.hpp"

namespace gfd {

// Flat key=value configuration with a fixed schema; unknown keys are
// rejected. Values here mirror the hyper-parameter names used throughout.
struct RunConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int batch_size = 512;
  int max_epochs = 500;
  int patience = 100;
  double dropout = 0.1;
  int n_hidden = 32;
  int n_layers = 2;
  int n_head = 4;
  int n_hops = 2;
  double alpha = 1.0;
  std::string activation = "relu";
  bool use_hop_encoding = true;
  bool use_relation_encoding = true;
  bool use_group_encoding = true;
  bool group_agg = true;
  double train_frac = 0.4;
  double val_frac = 0.1;
  double label_frac = 0.4;
  uint64_t seed = 0;

  bool operator==(const RunConfig&) const = default;

  GroupAggConfig group_agg_config() const;
  ModelConfig model_config(int feat_dim, int num_relations) const;
  TrainConfig train_config() const;

  void set(const std::string& key, const std::string& value);  // throws on unknown key
  std::string serialize() const;                               // canonical key=value text
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
void save_config_file(const RunConfig& cfg, const std::string& path);

// synthetic graph spec from the same key=value format
SyntheticSpec parse_synthetic_spec_file(const std::string& path);

}  // namespace gfd
