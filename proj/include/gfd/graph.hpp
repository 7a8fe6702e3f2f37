#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfd {

constexpr int8_t kUnlabeled = -1;
constexpr int kNumClasses = 2;  // benign=0, fraud=1

// Raised for malformed input files; message names file and line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Symmetric binary adjacency in CSR form. No self-loops stored,
// no duplicate edges, neighbor lists sorted ascending.
struct CsrAdjacency {
  std::vector<int64_t> offsets;  // size N+1
  std::vector<int32_t> columns;

  int64_t num_entries() const { return static_cast<int64_t>(columns.size()); }
  int64_t degree(int32_t v) const { return offsets[v + 1] - offsets[v]; }
  const int32_t* neighbors_begin(int32_t v) const { return columns.data() + offsets[v]; }
  const int32_t* neighbors_end(int32_t v) const { return columns.data() + offsets[v + 1]; }
};

// Multi-relational attributed graph with partial binary labels.
// Immutable after construction; safe to share across threads read-only.
struct MultiRelationGraph {
  int32_t num_nodes = 0;
  int feature_dim = 0;
  std::vector<CsrAdjacency> relations;
  std::vector<std::string> relation_names;
  std::vector<double> features;  // row-major num_nodes x feature_dim
  std::vector<int8_t> labels;    // 0, 1 or kUnlabeled

  int num_relations() const { return static_cast<int>(relations.size()); }
  const double* feature_row(int32_t v) const { return features.data() + static_cast<size_t>(v) * feature_dim; }
  void validate() const;  // throws on invariant violation
};

// Builds a CSR relation from an undirected edge list: symmetrizes,
// dedupes, drops self-loops, sorts neighbor lists.
CsrAdjacency build_adjacency(int32_t num_nodes, const std::vector<std::pair<int32_t, int32_t>>& edges);

enum class SplitRole : uint8_t { train = 0, val = 1, test = 2 };

struct SplitAssignment {
  std::vector<SplitRole> role;      // one per node
  std::vector<uint8_t> observed;    // label visible during preprocessing
  uint64_t seed = 0;

  size_t count(SplitRole r) const;
  size_t count_observed() const;
};

struct GraphStats {
  int32_t num_nodes = 0;
  int feature_dim = 0;
  double imbalance_ratio = 0.0;
  int64_t num_labeled = 0;
  std::vector<std::string> relation_names;
  std::vector<int64_t> undirected_edge_counts;
  std::vector<double> homophily;
};

struct SyntheticSpec {
  int32_t num_nodes = 2000;
  int num_relations = 1;
  std::vector<double> homophily;    // target per relation, in [0,1]
  double imbalance_ratio = 1.0;     // benign : fraud
  int feature_dim = 8;
  double mean_separation = 1.0;     // L2 distance between class feature means
  std::vector<double> avg_degree;   // per relation
  uint64_t seed = 0;

  void validate() const;
};

// Dataset directory format: meta.txt, features.tsv, labels.tsv,
// edges_<relation>.tsv. See README for the exact layout.
MultiRelationGraph load_graph(const std::string& dataset_dir);
void save_graph(const MultiRelationGraph& g, const std::string& dataset_dir);

// Fraction of same-label directed edge pairs among pairs whose labels are
// both known. Throws if no edge has two labeled endpoints.
double homophily_ratio(const MultiRelationGraph& g, int relation);

// #benign / #fraud among labeled nodes. Throws if a class is absent.
double imbalance_ratio(const MultiRelationGraph& g);

GraphStats compute_stats(const MultiRelationGraph& g);

// Stratified per class (and per the unlabeled stratum); deterministic per
// seed. Observed labels are a uniform subsample of the train nodes.
SplitAssignment make_splits(const MultiRelationGraph& g, double train_frac, double val_frac,
                            double label_frac, uint64_t seed);

void save_splits(const SplitAssignment& s, const std::string& path);
SplitAssignment load_splits(const std::string& path, int32_t num_nodes);

// Samples a graph whose per-relation homophily tracks the spec target.
// Edges are drawn same-class with probability = target homophily.
MultiRelationGraph generate_synthetic(const SyntheticSpec& spec);

}  // namespace gfd
