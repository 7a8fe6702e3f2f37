#pragma once

#include <string>
#include <vector>

#include "gfd/graph.hpp"
#include "gfd/groupagg.hpp"
#include "gfd/metrics.hpp"
#include "gfd/model.hpp"

namespace gfd {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 512;
  int max_epochs = 500;
  int patience = 100;  // epochs without val-AUC improvement
  uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // summed batch losses
  Metrics val;
  double seconds = 0.0;  // wall time; excluded from determinism comparisons
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_auc = 0.0;
};

// Adam with bias correction; weight decay enters through the model loss
// (lambda * ||theta||^2), not as a decoupled update.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<TensorPtr>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainResult {
  GroupTransformer model;
  TrainHistory history;
};

// Minimizes the regularized BCE over shuffled train batches; returns the
// parameters of the best validation-AUC epoch. Deterministic per seed.
TrainResult train(const SequenceDataset& ds, const SplitAssignment& splits,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg);

std::vector<double> score_nodes(const GroupTransformer& model, const SequenceDataset& ds,
                                const std::vector<int32_t>& nodes, int batch_size = 512);

Metrics evaluate(const GroupTransformer& model, const SequenceDataset& ds,
                 const SplitAssignment& splits, SplitRole role);

void save_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace gfd
