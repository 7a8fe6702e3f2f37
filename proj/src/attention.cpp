#include "gfd/attention.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace gfd {

AttentionReport compute_attention_report(const GroupTransformer& model, const SequenceDataset& ds,
                                         const SplitAssignment& splits, SplitRole role,
                                         int batch_size) {
  const ModelConfig& cfg = model.config();
  const int R = cfg.num_relations, K = cfg.k_hops, s = cfg.block_len();
  const std::vector<int> hop_idx = cfg.hop_indices();
  const std::vector<int> rel_idx = cfg.relation_indices();
  const std::vector<int> grp_idx = cfg.group_indices();

  AttentionReport report;
  for (int c = 0; c < 2; ++c) {
    report.by_group[c].assign(3, 0.0);
    report.by_relation[c].assign(R, 0.0);
    report.by_hop[c].assign(K + 1, 0.0);
  }

  std::vector<int32_t> nodes;
  for (int64_t v = 0; v < ds.num_nodes; ++v)
    if (splits.role[v] == role && ds.labels[v] != kUnlabeled) nodes.push_back(static_cast<int32_t>(v));
  if (nodes.empty()) throw std::runtime_error("attention report role has no labeled nodes");

  Rng unused(0);
  for (size_t start = 0; start < nodes.size(); start += batch_size) {
    const size_t end = std::min(nodes.size(), start + batch_size);
    std::vector<int32_t> batch(nodes.begin() + start, nodes.begin() + end);
    Tape tape;
    AttentionCapture cap;
    model.forward(tape, batch_input(ds, batch), /*training=*/false, unused, &cap);
    for (size_t b = 0; b < batch.size(); ++b) {
      const int c = ds.labels[batch[b]];
      for (int l = 0; l < cap.layers; ++l)
        for (int m = 0; m < cap.heads; ++m)
          for (int r = 0; r < R; ++r) {
            const int query = r * s;  // inter-aggregation lead row
            for (int j = 0; j < cap.seq; ++j) {
              const double w = cap.at(l, m, static_cast<int>(b), query, j);
              report.by_group[c][grp_idx[j]] += w;
              report.by_relation[c][rel_idx[j]] += w;
              report.by_hop[c][hop_idx[j]] += w;
            }
          }
    }
  }

  for (int c = 0; c < 2; ++c) {
    for (auto* breakdown : {&report.by_group[c], &report.by_relation[c], &report.by_hop[c]}) {
      double total = 0.0;
      for (double v : *breakdown) total += v;
      if (total > 0.0)
        for (double& v : *breakdown) v /= total;
    }
  }
  return report;
}

void save_attention_csv(const AttentionReport& report, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.precision(10);
    out << "class,breakdown,index,mass\n";
    static const char* cls[] = {"benign", "fraud"};
    for (int c = 0; c < 2; ++c) {
      for (size_t i = 0; i < report.by_group[c].size(); ++i)
        out << cls[c] << ",group," << i << ',' << report.by_group[c][i] << '\n';
      for (size_t i = 0; i < report.by_relation[c].size(); ++i)
        out << cls[c] << ",relation," << i << ',' << report.by_relation[c][i] << '\n';
      for (size_t i = 0; i < report.by_hop[c].size(); ++i)
        out << cls[c] << ",hop," << i << ',' << report.by_hop[c][i] << '\n';
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gfd
