#include "gfd/groupagg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace gfd {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'D', 'S', 'E', 'Q', '0', '1'};
constexpr uint64_t kVersion = 1;

// stamp-based visited set, reusable across calls without clearing
struct VisitScratch {
  std::vector<int32_t> stamp;
  int32_t epoch = 0;

  void reset(int32_t n) {
    if (static_cast<int32_t>(stamp.size()) != n) stamp.assign(n, 0);
    ++epoch;
  }
  bool visit(int32_t v) {
    if (stamp[v] == epoch) return false;
    stamp[v] = epoch;
    return true;
  }
};

void khop_into(const MultiRelationGraph& g, int relation, int32_t v, int k_hops,
               VisitScratch& scratch, std::vector<std::vector<int32_t>>& hops) {
  const CsrAdjacency& adj = g.relations[relation];
  scratch.reset(g.num_nodes);
  hops.assign(k_hops, {});

  std::vector<int32_t> frontier{v}, next;
  scratch.visit(v);
  std::vector<int32_t> reached{v};
  for (int k = 0; k < k_hops; ++k) {
    next.clear();
    for (int32_t u : frontier)
      for (const int32_t* p = adj.neighbors_begin(u); p != adj.neighbors_end(u); ++p)
        if (scratch.visit(*p)) next.push_back(*p);
    reached.insert(reached.end(), next.begin(), next.end());
    hops[k] = reached;  // cumulative: self-loop keeps every earlier node reachable
    std::sort(hops[k].begin(), hops[k].end());
    frontier.swap(next);
  }
}

void sequence_into(const MultiRelationGraph& g, int32_t v, const GroupAggConfig& cfg,
                   const std::vector<uint8_t>& observed, VisitScratch& scratch, double* out) {
  const int d = g.feature_dim;
  const int P = cfg.groups_per_hop();
  std::vector<std::vector<int32_t>> hops;
  double* row = out;
  for (int r = 0; r < g.num_relations(); ++r) {
    std::memcpy(row, g.feature_row(v), sizeof(double) * d);
    row += d;
    khop_into(g, r, v, cfg.k_hops, scratch, hops);
    for (int k = 0; k < cfg.k_hops; ++k) {
      auto groups = group_nodes(hops[k], v, g.labels, observed);
      auto vecs = group_aggregate(groups, g, cfg.alpha);
      for (int i = 0; i < P; ++i) {
        std::memcpy(row, vecs[i].data(), sizeof(double) * d);
        row += d;
      }
    }
  }
}

void mean_sequence_into(const MultiRelationGraph& g, int32_t v, int k_hops, VisitScratch& scratch,
                        double* out) {
  const int d = g.feature_dim;
  std::vector<std::vector<int32_t>> hops;
  double* row = out;
  for (int r = 0; r < g.num_relations(); ++r) {
    std::memcpy(row, g.feature_row(v), sizeof(double) * d);
    row += d;
    khop_into(g, r, v, k_hops, scratch, hops);
    for (int k = 0; k < k_hops; ++k) {
      const auto& hood = hops[k];
      for (int j = 0; j < d; ++j) row[j] = 0.0;
      for (int32_t u : hood) {
        const double* x = g.feature_row(u);
        for (int j = 0; j < d; ++j) row[j] += x[j];
      }
      const double inv = 1.0 / static_cast<double>(hood.size());
      for (int j = 0; j < d; ++j) row[j] *= inv;
      row += d;
    }
  }
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated sequence dataset file");
}

}  // namespace

HopNeighborhoods khop_neighbors(const MultiRelationGraph& g, int relation, int32_t v, int k_hops) {
  if (v < 0 || v >= g.num_nodes) throw std::out_of_range("target node out of range");
  if (relation < 0 || relation >= g.num_relations()) throw std::out_of_range("relation out of range");
  if (k_hops < 1) throw std::invalid_argument("k_hops must be >= 1");
  HopNeighborhoods out;
  out.target = v;
  VisitScratch scratch;
  khop_into(g, relation, v, k_hops, scratch, out.hops);
  return out;
}

std::vector<std::vector<int32_t>> group_nodes(const std::vector<int32_t>& hop_set, int32_t target,
                                              const std::vector<int8_t>& labels,
                                              const std::vector<uint8_t>& observed) {
  std::vector<std::vector<int32_t>> groups(3);
  groups[kGroupUnknown].push_back(target);  // target node masking
  for (int32_t u : hop_set) {
    if (u == target) continue;
    if (observed[u] && labels[u] != kUnlabeled)
      groups[labels[u]].push_back(u);
    else
      groups[kGroupUnknown].push_back(u);
  }
  return groups;
}

std::vector<std::vector<double>> group_aggregate(const std::vector<std::vector<int32_t>>& groups,
                                                 const MultiRelationGraph& g, double alpha) {
  std::vector<std::vector<double>> out;
  out.reserve(groups.size());
  const int d = g.feature_dim;
  for (const auto& members : groups) {
    std::vector<double> h(d, 0.0);
    if (!members.empty()) {
      for (int32_t u : members) {
        const double* x = g.feature_row(u);
        for (int j = 0; j < d; ++j) h[j] += x[j];
      }
      const double norm = std::pow(static_cast<double>(members.size()), -alpha);
      for (int j = 0; j < d; ++j) h[j] *= norm;
    }
    out.push_back(std::move(h));
  }
  return out;
}

FeatureSequence build_sequence(const MultiRelationGraph& g, int32_t v, const GroupAggConfig& cfg,
                               const std::vector<uint8_t>& observed) {
  if (v < 0 || v >= g.num_nodes) throw std::out_of_range("target node out of range");
  FeatureSequence seq;
  seq.target = v;
  seq.rows = cfg.seq_len(g.num_relations());
  seq.cols = g.feature_dim;
  seq.values.assign(static_cast<size_t>(seq.rows) * seq.cols, 0.0);
  VisitScratch scratch;
  sequence_into(g, v, cfg, observed, scratch, seq.values.data());
  return seq;
}

FeatureSequence build_mean_sequence(const MultiRelationGraph& g, int32_t v, int k_hops) {
  if (v < 0 || v >= g.num_nodes) throw std::out_of_range("target node out of range");
  FeatureSequence seq;
  seq.target = v;
  seq.rows = g.num_relations() * (k_hops + 1);
  seq.cols = g.feature_dim;
  seq.values.assign(static_cast<size_t>(seq.rows) * seq.cols, 0.0);
  VisitScratch scratch;
  mean_sequence_into(g, v, k_hops, scratch, seq.values.data());
  return seq;
}

std::vector<double> matrix_oracle(const MultiRelationGraph& g, int relation, int k_hop, int group,
                                  const std::vector<uint8_t>& observed, double alpha) {
  const int32_t n = g.num_nodes;
  const int d = g.feature_dim;
  if (k_hop < 1) throw std::invalid_argument("k_hop must be >= 1");

  // dense binarized (A+I)^k via repeated boolean products; fine for small N
  std::vector<uint8_t> base(static_cast<size_t>(n) * n, 0);
  const CsrAdjacency& adj = g.relations[relation];
  for (int32_t u = 0; u < n; ++u) {
    base[static_cast<size_t>(u) * n + u] = 1;
    for (const int32_t* p = adj.neighbors_begin(u); p != adj.neighbors_end(u); ++p)
      base[static_cast<size_t>(u) * n + *p] = 1;
  }
  std::vector<uint8_t> power = base;
  for (int k = 1; k < k_hop; ++k) {
    std::vector<uint8_t> next(static_cast<size_t>(n) * n, 0);
    for (int32_t i = 0; i < n; ++i)
      for (int32_t j = 0; j < n; ++j)
        if (power[static_cast<size_t>(i) * n + j])
          for (int32_t l = 0; l < n; ++l)
            next[static_cast<size_t>(i) * n + l] |= base[static_cast<size_t>(j) * n + l];
    power.swap(next);
  }
  for (int32_t i = 0; i < n; ++i) power[static_cast<size_t>(i) * n + i] = 0;

  std::vector<double> result(static_cast<size_t>(n) * d, 0.0);
  for (int32_t v = 0; v < n; ++v) {
    const uint8_t* row = power.data() + static_cast<size_t>(v) * n;
    double* out = result.data() + static_cast<size_t>(v) * d;
    int64_t count = 0;
    auto accumulate = [&](int32_t u) {
      const double* x = g.feature_row(u);
      for (int j = 0; j < d; ++j) out[j] += x[j];
      ++count;
    };
    for (int32_t u = 0; u < n; ++u) {
      if (!row[u] || u == v) continue;
      bool labeled = observed[u] && g.labels[u] != kUnlabeled;
      if (group == kGroupUnknown ? !labeled : (labeled && g.labels[u] == group)) accumulate(u);
    }
    if (group == kGroupUnknown) accumulate(v);  // target masking puts v in its own unknown row
    if (count > 0) {
      const double norm = std::pow(static_cast<double>(count), -alpha);
      for (int j = 0; j < d; ++j) out[j] *= norm;
    }
  }
  return result;
}

SequenceDataset preprocess_all(const MultiRelationGraph& g, const GroupAggConfig& cfg,
                               const std::vector<uint8_t>& observed, AggregationMode mode,
                               int num_workers) {
  SequenceDataset ds;
  ds.num_nodes = g.num_nodes;
  ds.config = cfg;
  ds.num_relations = g.num_relations();
  ds.mode = mode;
  ds.seq_len = (mode == AggregationMode::grouped) ? cfg.seq_len(g.num_relations())
                                                  : g.num_relations() * (cfg.k_hops + 1);
  ds.feature_dim = g.feature_dim;
  ds.labels = g.labels;
  ds.data.assign(static_cast<size_t>(ds.num_nodes) * ds.seq_len * ds.feature_dim, 0.0f);

  const size_t row_count = static_cast<size_t>(ds.seq_len) * ds.feature_dim;
  auto work = [&](int32_t begin, int32_t end) {
    VisitScratch scratch;
    std::vector<double> buf(row_count);
    for (int32_t v = begin; v < end; ++v) {
      if (mode == AggregationMode::grouped)
        sequence_into(g, v, cfg, observed, scratch, buf.data());
      else
        mean_sequence_into(g, v, cfg.k_hops, scratch, buf.data());
      float* dst = ds.data.data() + static_cast<size_t>(v) * row_count;
      for (size_t i = 0; i < row_count; ++i) dst[i] = static_cast<float>(buf[i]);
    }
  };

  if (num_workers <= 1) {
    work(0, g.num_nodes);
  } else {
    // disjoint node ranges write disjoint slots; output is scheduling-independent
    std::vector<std::thread> pool;
    int32_t chunk = (g.num_nodes + num_workers - 1) / num_workers;
    for (int w = 0; w < num_workers; ++w) {
      int32_t begin = w * chunk;
      int32_t end = std::min(g.num_nodes, begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  return ds;
}

void save_dataset(const SequenceDataset& ds, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out.write(kMagic, sizeof(kMagic));
    write_raw(out, kVersion);
    write_raw(out, static_cast<uint64_t>(ds.num_nodes));
    write_raw(out, static_cast<uint64_t>(ds.seq_len));
    write_raw(out, static_cast<uint64_t>(ds.feature_dim));
    write_raw(out, static_cast<uint64_t>(ds.config.k_hops));
    write_raw(out, static_cast<uint64_t>(ds.num_relations));
    write_raw(out, static_cast<uint64_t>(ds.config.num_classes));
    write_raw(out, ds.config.alpha);
    write_raw(out, static_cast<uint64_t>(ds.mode));
    const size_t row_count = static_cast<size_t>(ds.seq_len) * ds.feature_dim;
    for (int64_t v = 0; v < ds.num_nodes; ++v) {
      write_raw(out, static_cast<uint64_t>(v));
      write_raw(out, ds.labels[v]);
      out.write(reinterpret_cast<const char*>(ds.sequence(v)), sizeof(float) * row_count);
    }
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

SequenceDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad magic in sequence dataset: " + path);
  uint64_t version, n, s, d, k, r, c, mode;
  double alpha;
  read_raw(in, version);
  if (version != kVersion) throw std::runtime_error("unsupported dataset version");
  read_raw(in, n);
  read_raw(in, s);
  read_raw(in, d);
  read_raw(in, k);
  read_raw(in, r);
  read_raw(in, c);
  read_raw(in, alpha);
  read_raw(in, mode);

  SequenceDataset ds;
  ds.num_nodes = static_cast<int64_t>(n);
  ds.seq_len = static_cast<int>(s);
  ds.feature_dim = static_cast<int>(d);
  ds.config.k_hops = static_cast<int>(k);
  ds.config.alpha = alpha;
  ds.config.num_classes = static_cast<int>(c);
  ds.num_relations = static_cast<int>(r);
  ds.mode = static_cast<AggregationMode>(mode);
  ds.labels.assign(ds.num_nodes, kUnlabeled);
  const size_t row_count = static_cast<size_t>(ds.seq_len) * ds.feature_dim;
  ds.data.assign(static_cast<size_t>(ds.num_nodes) * row_count, 0.0f);
  for (int64_t v = 0; v < ds.num_nodes; ++v) {
    uint64_t id;
    read_raw(in, id);
    if (id != static_cast<uint64_t>(v)) throw std::runtime_error("unexpected record order in dataset");
    read_raw(in, ds.labels[v]);
    in.read(reinterpret_cast<char*>(ds.data.data() + static_cast<size_t>(v) * row_count),
            sizeof(float) * row_count);
    if (!in) throw std::runtime_error("truncated sequence dataset file");
  }
  return ds;
}

}  // namespace gfd
