#include "gfd/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gfd {

void TrainConfig::validate() const {
  if (learning_rate < 0.0) throw std::invalid_argument("learning rate must be non-negative");
  if (batch_size <= 0 || max_epochs <= 0 || patience <= 0)
    throw std::invalid_argument("batch_size, max_epochs and patience must be positive");
  if (patience > max_epochs) throw std::invalid_argument("patience exceeds max_epochs");
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(const std::vector<TensorPtr>& params) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    TensorNode& p = *params[i];
    p.ensure_grad();
    for (size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      p.value[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
    }
  }
}

std::vector<double> score_nodes(const GroupTransformer& model, const SequenceDataset& ds,
                                const std::vector<int32_t>& nodes, int batch_size) {
  std::vector<double> scores;
  scores.reserve(nodes.size());
  Rng unused(0);
  for (size_t start = 0; start < nodes.size(); start += batch_size) {
    const size_t end = std::min(nodes.size(), start + batch_size);
    std::vector<int32_t> batch(nodes.begin() + start, nodes.begin() + end);
    Tape tape;
    TensorPtr probs = model.forward(tape, batch_input(ds, batch), /*training=*/false, unused);
    scores.insert(scores.end(), probs->value.begin(), probs->value.end());
  }
  return scores;
}

Metrics evaluate(const GroupTransformer& model, const SequenceDataset& ds,
                 const SplitAssignment& splits, SplitRole role) {
  std::vector<int32_t> nodes;
  std::vector<int8_t> labels;
  for (int64_t v = 0; v < ds.num_nodes; ++v) {
    if (splits.role[v] != role || ds.labels[v] == kUnlabeled) continue;
    nodes.push_back(static_cast<int32_t>(v));
    labels.push_back(ds.labels[v]);
  }
  if (nodes.empty()) throw std::runtime_error("evaluation role has no labeled nodes");
  return compute_metrics(score_nodes(model, ds, nodes), labels);
}

TrainResult train(const SequenceDataset& ds, const SplitAssignment& splits,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  train_cfg.validate();
  std::vector<int32_t> train_nodes;
  for (int64_t v = 0; v < ds.num_nodes; ++v)
    if (splits.role[v] == SplitRole::train && ds.labels[v] != kUnlabeled)
      train_nodes.push_back(static_cast<int32_t>(v));
  if (train_nodes.empty()) throw std::runtime_error("empty train split");

  GroupTransformer model(model_cfg, train_cfg.seed);
  AdamOptimizer opt(train_cfg.learning_rate);
  Rng shuffle_rng(train_cfg.seed * 0x9e3779b97f4a7c15ULL + 1);
  Rng dropout_rng(train_cfg.seed * 0x9e3779b97f4a7c15ULL + 2);

  TrainHistory history;
  std::vector<std::vector<double>> best_values = model.snapshot_values();
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < train_cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(train_nodes);
    double epoch_loss = 0.0;
    for (size_t begin = 0; begin < train_nodes.size(); begin += train_cfg.batch_size) {
      const size_t end = std::min(train_nodes.size(), begin + train_cfg.batch_size);
      std::vector<int32_t> batch(train_nodes.begin() + begin, train_nodes.begin() + end);
      std::vector<double> targets;
      targets.reserve(batch.size());
      for (int32_t v : batch) targets.push_back(static_cast<double>(ds.labels[v]));

      Tape tape;
      model.zero_grad();
      TensorPtr loss;
      try {
        TensorPtr probs = model.forward(tape, batch_input(ds, batch), /*training=*/true, dropout_rng);
        loss = model.loss(tape, probs, targets);
        tape.backward(loss);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      epoch_loss += loss->scalar();
      opt.step(model.parameters());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    rec.val = evaluate(model, ds, splits, SplitRole::val);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(rec);

    if (history.best_epoch < 0 || rec.val.auc > history.best_val_auc) {
      history.best_epoch = epoch;
      history.best_val_auc = rec.val.auc;
      best_values = model.snapshot_values();
      epochs_since_best = 0;
    } else if (++epochs_since_best >= train_cfg.patience) {
      break;
    }
  }

  model.restore_values(best_values);
  return {std::move(model), std::move(history)};
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out << "epoch,loss,val_auc,val_ap,val_f1_macro,seconds\n";
    out.precision(10);
    for (const auto& r : history.epochs)
      out << r.epoch << ',' << r.train_loss << ',' << r.val.auc << ',' << r.val.ap << ','
          << r.val.f1_macro << ',' << r.seconds << '\n';
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gfd
