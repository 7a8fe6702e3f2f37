#pragma once

#include <array>
#include <string>
#include <vector>

#include "gfd/train.hpp"

namespace gfd {

// Per-class attention mass received by the relation lead rows, broken down
// by the key row's group, relation and hop position. Each breakdown is
// normalized to sum to 1 per class.
struct AttentionReport {
  std::array<std::vector<double>, 2> by_group;     // [class][3]
  std::array<std::vector<double>, 2> by_relation;  // [class][R]
  std::array<std::vector<double>, 2> by_hop;       // [class][K+1]
};

AttentionReport compute_attention_report(const GroupTransformer& model, const SequenceDataset& ds,
                                         const SplitAssignment& splits,
                                         SplitRole role = SplitRole::test, int batch_size = 256);

void save_attention_csv(const AttentionReport& report, const std::string& path);

}  // namespace gfd
