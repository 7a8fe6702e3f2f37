#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gfd/graph.hpp"

namespace gfd {

struct GroupAggConfig {
  int k_hops = 2;
  double alpha = 1.0;     // group size normalization exponent
  int num_classes = kNumClasses;

  int groups_per_hop() const { return num_classes + 1; }  // benign, fraud, unknown
  // rows per relation block and full sequence length
  int block_len() const { return groups_per_hop() * k_hops + 1; }
  int seq_len(int num_relations) const { return num_relations * block_len(); }
};

// Cumulative walk-reachable sets under A+I: hop k holds every node reachable
// by a walk of length <= k, so hops are nested and always contain the target.
struct HopNeighborhoods {
  int32_t target = 0;
  std::vector<std::vector<int32_t>> hops;  // ascending node ids, size K
};

// group indices within a hop triple
enum Group : int { kGroupBenign = 0, kGroupFraud = 1, kGroupUnknown = 2 };

struct FeatureSequence {
  int32_t target = 0;
  int rows = 0, cols = 0;
  std::vector<double> values;  // row-major rows x cols

  const double* row(int i) const { return values.data() + static_cast<size_t>(i) * cols; }
};

enum class AggregationMode : uint8_t {
  grouped = 0,  // label-grouped rows (h-, h+, h*) per hop
  mean = 1,     // plain neighborhood mean per hop, no label groups
};

struct SequenceDataset {
  int64_t num_nodes = 0;
  int seq_len = 0;
  int feature_dim = 0;
  GroupAggConfig config;
  int num_relations = 0;
  AggregationMode mode = AggregationMode::grouped;
  std::vector<int8_t> labels;   // -1 = unlabeled
  std::vector<float> data;      // num_nodes x seq_len x feature_dim

  const float* sequence(int64_t v) const {
    return data.data() + static_cast<size_t>(v) * seq_len * feature_dim;
  }
};

HopNeighborhoods khop_neighbors(const MultiRelationGraph& g, int relation, int32_t v, int k_hops);

// Splits one hop set into P groups. The target always lands in the unknown
// group regardless of its own label (target node masking); other members go
// to their class group when observed, else to unknown.
std::vector<std::vector<int32_t>> group_nodes(const std::vector<int32_t>& hop_set, int32_t target,
                                              const std::vector<int8_t>& labels,
                                              const std::vector<uint8_t>& observed);

// h_i = |V_i|^(-alpha) * sum of member features; empty group -> zeros.
std::vector<std::vector<double>> group_aggregate(const std::vector<std::vector<int32_t>>& groups,
                                                 const MultiRelationGraph& g, double alpha);

// Row layout per relation block: raw target feature, then (h-, h+, h*) for
// each hop 1..K. Blocks follow relation declaration order.
FeatureSequence build_sequence(const MultiRelationGraph& g, int32_t v, const GroupAggConfig& cfg,
                               const std::vector<uint8_t>& observed);

// Plain-mean variant: per relation block [x_v, mean over hop 1, ..., hop K].
FeatureSequence build_mean_sequence(const MultiRelationGraph& g, int32_t v, int k_hops);

// Dense reference route for the grouped rows: binarized (A+I)^k with zeroed
// diagonal, class/mask-limited, row-normalized by group size^alpha. Row v
// must match the corresponding group row of build_sequence(v). group is one
// of Group; for kGroupUnknown the target itself is counted in its own row.
std::vector<double> matrix_oracle(const MultiRelationGraph& g, int relation, int k_hop, int group,
                                  const std::vector<uint8_t>& observed, double alpha);

// One sequence per node; parallel over targets, bit-identical regardless of
// worker count.
SequenceDataset preprocess_all(const MultiRelationGraph& g, const GroupAggConfig& cfg,
                               const std::vector<uint8_t>& observed,
                               AggregationMode mode = AggregationMode::grouped, int num_workers = 1);

void save_dataset(const SequenceDataset& ds, const std::string& path);
SequenceDataset load_dataset(const std::string& path);

}  // namespace gfd
