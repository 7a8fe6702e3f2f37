#include "gfd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "gfd/rng.hpp"

namespace fs = std::filesystem;

namespace gfd {

namespace {

[[noreturn]] void parse_fail(const std::string& file, int64_t line, const std::string& what) {
  throw ParseError(file + ":" + std::to_string(line) + ": " + what);
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("missing file: " + path);
  return in;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

int64_t parse_int(const std::string& s, const std::string& file, int64_t line) {
  try {
    size_t pos = 0;
    int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) parse_fail(file, line, "bad integer '" + s + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    parse_fail(file, line, "bad integer '" + s + "'");
  }
}

double parse_real(const std::string& s, const std::string& file, int64_t line) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) parse_fail(file, line, "bad decimal '" + s + "'");
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    parse_fail(file, line, "bad decimal '" + s + "'");
  }
}

// overwrite atomically: write to a temp file, then rename over the target
class AtomicFile {
 public:
  explicit AtomicFile(const std::string& path) : path_(path), tmp_(path + ".tmp"), out_(tmp_) {
    if (!out_) throw std::runtime_error("cannot open for write: " + tmp_);
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.close();
    fs::rename(tmp_, path_);
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
};

}  // namespace

void MultiRelationGraph::validate() const {
  if (num_nodes <= 0) throw std::runtime_error("graph has no nodes");
  if (relations.empty()) throw std::runtime_error("graph has no relations");
  if (relation_names.size() != relations.size())
    throw std::runtime_error("relation name count mismatch");
  if (features.size() != static_cast<size_t>(num_nodes) * feature_dim)
    throw std::runtime_error("feature matrix size mismatch");
  if (labels.size() != static_cast<size_t>(num_nodes))
    throw std::runtime_error("label vector size mismatch");
  for (double x : features)
    if (!std::isfinite(x)) throw std::runtime_error("non-finite feature value");
  for (const auto& adj : relations) {
    if (adj.offsets.size() != static_cast<size_t>(num_nodes) + 1)
      throw std::runtime_error("CSR offsets size mismatch");
    for (int32_t v = 0; v < num_nodes; ++v) {
      const int32_t* b = adj.neighbors_begin(v);
      const int32_t* e = adj.neighbors_end(v);
      for (const int32_t* p = b; p != e; ++p) {
        if (*p < 0 || *p >= num_nodes) throw std::runtime_error("node id out of range in CSR");
        if (*p == v) throw std::runtime_error("self-loop stored in CSR");
        if (p + 1 != e && *(p + 1) <= *p) throw std::runtime_error("CSR neighbors not sorted unique");
        // symmetry: v must appear in *p's list
        if (!std::binary_search(adj.neighbors_begin(*p), adj.neighbors_end(*p), v))
          throw std::runtime_error("asymmetric adjacency");
      }
    }
  }
}

CsrAdjacency build_adjacency(int32_t num_nodes, const std::vector<std::pair<int32_t, int32_t>>& edges) {
  std::vector<std::pair<int32_t, int32_t>> directed;
  directed.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u == v) continue;  // self-loops are added logically downstream
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  CsrAdjacency adj;
  adj.offsets.assign(static_cast<size_t>(num_nodes) + 1, 0);
  for (auto [u, v] : directed) adj.offsets[u + 1]++;
  for (int32_t v = 0; v < num_nodes; ++v) adj.offsets[v + 1] += adj.offsets[v];
  adj.columns.reserve(directed.size());
  for (auto [u, v] : directed) adj.columns.push_back(v);
  return adj;
}

size_t SplitAssignment::count(SplitRole r) const {
  size_t n = 0;
  for (SplitRole x : role) n += (x == r);
  return n;
}

size_t SplitAssignment::count_observed() const {
  size_t n = 0;
  for (uint8_t x : observed) n += (x != 0);
  return n;
}

MultiRelationGraph load_graph(const std::string& dataset_dir) {
  MultiRelationGraph g;
  const std::string meta_path = dataset_dir + "/meta.txt";
  {
    std::ifstream in = open_or_throw(meta_path);
    std::string line;
    int64_t lineno = 0;
    int64_t num_nodes = -1, num_relations = -1, feature_dim = -1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      size_t eq = line.find('=');
      if (eq == std::string::npos) parse_fail(meta_path, lineno, "expected key=value");
      std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      if (key == "num_nodes") {
        num_nodes = parse_int(value, meta_path, lineno);
      } else if (key == "num_relations") {
        num_relations = parse_int(value, meta_path, lineno);
      } else if (key == "feature_dim") {
        feature_dim = parse_int(value, meta_path, lineno);
      } else if (key == "relations") {
        std::stringstream ss(value);
        std::string name;
        while (std::getline(ss, name, ',')) g.relation_names.push_back(name);
      } else {
        parse_fail(meta_path, lineno, "unknown key '" + key + "'");
      }
    }
    if (num_nodes <= 0) parse_fail(meta_path, 0, "num_nodes missing or not positive");
    if (num_relations <= 0) parse_fail(meta_path, 0, "num_relations missing or not positive");
    if (feature_dim <= 0) parse_fail(meta_path, 0, "feature_dim missing or not positive");
    if (static_cast<int64_t>(g.relation_names.size()) != num_relations)
      parse_fail(meta_path, 0, "relations list does not match num_relations");
    g.num_nodes = static_cast<int32_t>(num_nodes);
    g.feature_dim = static_cast<int>(feature_dim);
  }

  // features.tsv: node_id TAB d decimals
  {
    const std::string path = dataset_dir + "/features.tsv";
    std::ifstream in = open_or_throw(path);
    g.features.assign(static_cast<size_t>(g.num_nodes) * g.feature_dim, 0.0);
    std::vector<uint8_t> seen(g.num_nodes, 0);
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cells = split_tabs(line);
      if (static_cast<int>(cells.size()) != g.feature_dim + 1)
        parse_fail(path, lineno, "ragged feature row: expected " + std::to_string(g.feature_dim) +
                                     " values, got " + std::to_string(cells.size() - 1));
      int64_t id = parse_int(cells[0], path, lineno);
      if (id < 0 || id >= g.num_nodes) parse_fail(path, lineno, "node id out of range");
      if (seen[id]) parse_fail(path, lineno, "duplicate feature row for node " + std::to_string(id));
      seen[id] = 1;
      for (int j = 0; j < g.feature_dim; ++j) {
        double x = parse_real(cells[j + 1], path, lineno);
        if (!std::isfinite(x)) parse_fail(path, lineno, "non-finite feature value");
        g.features[static_cast<size_t>(id) * g.feature_dim + j] = x;
      }
    }
    for (int32_t v = 0; v < g.num_nodes; ++v)
      if (!seen[v]) parse_fail(path, 0, "missing feature row for node " + std::to_string(v));
  }

  // labels.tsv: node_id TAB {0,1}; absent ids stay unlabeled
  {
    const std::string path = dataset_dir + "/labels.tsv";
    std::ifstream in = open_or_throw(path);
    g.labels.assign(g.num_nodes, kUnlabeled);
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cells = split_tabs(line);
      if (cells.size() != 2) parse_fail(path, lineno, "expected node_id TAB label");
      int64_t id = parse_int(cells[0], path, lineno);
      if (id < 0 || id >= g.num_nodes) parse_fail(path, lineno, "node id out of range");
      int64_t y = parse_int(cells[1], path, lineno);
      if (y != 0 && y != 1) parse_fail(path, lineno, "label must be 0 or 1");
      g.labels[id] = static_cast<int8_t>(y);
    }
  }

  for (const std::string& name : g.relation_names) {
    const std::string path = dataset_dir + "/edges_" + name + ".tsv";
    std::ifstream in = open_or_throw(path);
    std::vector<std::pair<int32_t, int32_t>> edges;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cells = split_tabs(line);
      if (cells.size() != 2) parse_fail(path, lineno, "expected u TAB v");
      int64_t u = parse_int(cells[0], path, lineno);
      int64_t v = parse_int(cells[1], path, lineno);
      if (u < 0 || u >= g.num_nodes || v < 0 || v >= g.num_nodes)
        parse_fail(path, lineno, "node id out of range");
      edges.emplace_back(static_cast<int32_t>(u), static_cast<int32_t>(v));
    }
    g.relations.push_back(build_adjacency(g.num_nodes, edges));
  }

  g.validate();
  return g;
}

void save_graph(const MultiRelationGraph& g, const std::string& dataset_dir) {
  fs::create_directories(dataset_dir);
  {
    AtomicFile f(dataset_dir + "/meta.txt");
    f.stream() << "num_nodes=" << g.num_nodes << "\n"
               << "num_relations=" << g.num_relations() << "\n"
               << "feature_dim=" << g.feature_dim << "\n"
               << "relations=";
    for (size_t r = 0; r < g.relation_names.size(); ++r)
      f.stream() << (r ? "," : "") << g.relation_names[r];
    f.stream() << "\n";
    f.commit();
  }
  {
    AtomicFile f(dataset_dir + "/features.tsv");
    f.stream().precision(17);
    for (int32_t v = 0; v < g.num_nodes; ++v) {
      f.stream() << v;
      const double* row = g.feature_row(v);
      for (int j = 0; j < g.feature_dim; ++j) f.stream() << '\t' << row[j];
      f.stream() << '\n';
    }
    f.commit();
  }
  {
    AtomicFile f(dataset_dir + "/labels.tsv");
    for (int32_t v = 0; v < g.num_nodes; ++v)
      if (g.labels[v] != kUnlabeled) f.stream() << v << '\t' << int(g.labels[v]) << '\n';
    f.commit();
  }
  for (int r = 0; r < g.num_relations(); ++r) {
    AtomicFile f(dataset_dir + "/edges_" + g.relation_names[r] + ".tsv");
    const auto& adj = g.relations[r];
    for (int32_t u = 0; u < g.num_nodes; ++u)
      for (const int32_t* p = adj.neighbors_begin(u); p != adj.neighbors_end(u); ++p)
        if (u < *p) f.stream() << u << '\t' << *p << '\n';
    f.commit();
  }
}

double homophily_ratio(const MultiRelationGraph& g, int relation) {
  if (relation < 0 || relation >= g.num_relations())
    throw std::out_of_range("relation index out of range");
  const auto& adj = g.relations[relation];
  int64_t same = 0, total = 0;
  for (int32_t u = 0; u < g.num_nodes; ++u) {
    if (g.labels[u] == kUnlabeled) continue;
    for (const int32_t* p = adj.neighbors_begin(u); p != adj.neighbors_end(u); ++p) {
      if (g.labels[*p] == kUnlabeled) continue;
      ++total;
      same += (g.labels[u] == g.labels[*p]);
    }
  }
  if (total == 0) throw std::runtime_error("undefined homophily ratio: no edge with both endpoints labeled");
  return static_cast<double>(same) / static_cast<double>(total);
}

double imbalance_ratio(const MultiRelationGraph& g) {
  int64_t benign = 0, fraud = 0;
  for (int8_t y : g.labels) {
    benign += (y == 0);
    fraud += (y == 1);
  }
  if (benign == 0) throw std::runtime_error("imbalance ratio undefined: no benign nodes");
  if (fraud == 0) throw std::runtime_error("imbalance ratio undefined: no fraud nodes");
  return static_cast<double>(benign) / static_cast<double>(fraud);
}

GraphStats compute_stats(const MultiRelationGraph& g) {
  GraphStats s;
  s.num_nodes = g.num_nodes;
  s.feature_dim = g.feature_dim;
  s.relation_names = g.relation_names;
  s.imbalance_ratio = imbalance_ratio(g);
  for (int8_t y : g.labels) s.num_labeled += (y != kUnlabeled);
  for (int r = 0; r < g.num_relations(); ++r) {
    s.undirected_edge_counts.push_back(g.relations[r].num_entries() / 2);
    s.homophily.push_back(homophily_ratio(g, r));
  }
  return s;
}

SplitAssignment make_splits(const MultiRelationGraph& g, double train_frac, double val_frac,
                            double label_frac, uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac <= 1.0) || !(val_frac > 0.0 && val_frac <= 1.0))
    throw std::invalid_argument("split fractions must be in (0,1]");
  if (train_frac + val_frac > 1.0) throw std::invalid_argument("train_frac + val_frac > 1");
  if (label_frac > train_frac) throw std::invalid_argument("label_frac > train_frac");
  if (label_frac <= 0.0) throw std::invalid_argument("label_frac must be positive");

  SplitAssignment out;
  out.seed = seed;
  out.role.assign(g.num_nodes, SplitRole::test);
  out.observed.assign(g.num_nodes, 0);

  Rng rng(seed);
  // strata: class 0, class 1, unlabeled — fixed order for determinism
  for (int stratum = 0; stratum < 3; ++stratum) {
    int8_t want = (stratum == 2) ? kUnlabeled : static_cast<int8_t>(stratum);
    std::vector<int32_t> nodes;
    for (int32_t v = 0; v < g.num_nodes; ++v)
      if (g.labels[v] == want) nodes.push_back(v);
    if (nodes.empty()) {
      if (stratum != 2)
        throw std::runtime_error("stratum for class " + std::to_string(stratum) + " is empty");
      continue;
    }
    rng.shuffle(nodes);
    size_t n = nodes.size();
    size_t n_train = static_cast<size_t>(std::llround(train_frac * n));
    size_t n_val = static_cast<size_t>(std::llround(val_frac * n));
    if (n_train + n_val > n) n_val = n - n_train;
    if (n_train == 0) throw std::runtime_error("stratum too small for requested train fraction");
    for (size_t i = 0; i < n; ++i) {
      out.role[nodes[i]] = i < n_train            ? SplitRole::train
                           : i < n_train + n_val ? SplitRole::val
                                                 : SplitRole::test;
    }
    if (stratum != 2) {
      size_t n_obs = static_cast<size_t>(std::llround(label_frac * n));
      if (n_obs > n_train) n_obs = n_train;
      // train nodes are the shuffled prefix; a uniform subsample of them is
      // any fixed-size prefix
      for (size_t i = 0; i < n_obs; ++i) out.observed[nodes[i]] = 1;
    }
  }
  return out;
}

void save_splits(const SplitAssignment& s, const std::string& path) {
  static const char* names[] = {"train", "val", "test"};
  AtomicFile f(path);
  for (size_t v = 0; v < s.role.size(); ++v)
    f.stream() << v << '\t' << names[static_cast<int>(s.role[v])] << '\t' << int(s.observed[v]) << '\n';
  f.commit();
}

SplitAssignment load_splits(const std::string& path, int32_t num_nodes) {
  SplitAssignment s;
  s.role.assign(num_nodes, SplitRole::test);
  s.observed.assign(num_nodes, 0);
  std::ifstream in = open_or_throw(path);
  std::string line;
  int64_t lineno = 0;
  std::vector<uint8_t> seen(num_nodes, 0);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != 3) parse_fail(path, lineno, "expected node_id TAB role TAB observed");
    int64_t id = parse_int(cells[0], path, lineno);
    if (id < 0 || id >= num_nodes) parse_fail(path, lineno, "node id out of range");
    if (seen[id]) parse_fail(path, lineno, "duplicate split row");
    seen[id] = 1;
    if (cells[1] == "train")
      s.role[id] = SplitRole::train;
    else if (cells[1] == "val")
      s.role[id] = SplitRole::val;
    else if (cells[1] == "test")
      s.role[id] = SplitRole::test;
    else
      parse_fail(path, lineno, "unknown role '" + cells[1] + "'");
    int64_t obs = parse_int(cells[2], path, lineno);
    if (obs != 0 && obs != 1) parse_fail(path, lineno, "observed flag must be 0 or 1");
    s.observed[id] = static_cast<uint8_t>(obs);
  }
  for (int32_t v = 0; v < num_nodes; ++v)
    if (!seen[v]) parse_fail(path, 0, "missing split row for node " + std::to_string(v));
  return s;
}

void SyntheticSpec::validate() const {
  if (num_nodes <= 0 || num_relations <= 0 || feature_dim <= 0)
    throw std::invalid_argument("synthetic spec counts must be positive");
  if (static_cast<int>(homophily.size()) != num_relations)
    throw std::invalid_argument("homophily targets must match num_relations");
  if (static_cast<int>(avg_degree.size()) != num_relations)
    throw std::invalid_argument("avg_degree must match num_relations");
  for (double h : homophily)
    if (h < 0.0 || h > 1.0) throw std::invalid_argument("homophily target outside [0,1]");
  for (double d : avg_degree)
    if (d <= 0.0 || d > num_nodes - 1) throw std::invalid_argument("infeasible average degree");
  if (imbalance_ratio <= 0.0) throw std::invalid_argument("imbalance ratio must be positive");
}

MultiRelationGraph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  MultiRelationGraph g;
  g.num_nodes = spec.num_nodes;
  g.feature_dim = spec.feature_dim;

  // labels: N/(1+IR) fraud nodes, scattered uniformly
  int64_t n_fraud = std::llround(spec.num_nodes / (1.0 + spec.imbalance_ratio));
  n_fraud = std::max<int64_t>(1, std::min<int64_t>(n_fraud, spec.num_nodes - 1));
  std::vector<int32_t> order(spec.num_nodes);
  for (int32_t v = 0; v < spec.num_nodes; ++v) order[v] = v;
  rng.shuffle(order);
  g.labels.assign(spec.num_nodes, 0);
  for (int64_t i = 0; i < n_fraud; ++i) g.labels[order[i]] = 1;

  std::vector<int32_t> by_class[2];
  for (int32_t v = 0; v < spec.num_nodes; ++v) by_class[g.labels[v]].push_back(v);

  // features: class-conditional Gaussians, unit variance, means sep apart
  g.features.resize(static_cast<size_t>(spec.num_nodes) * spec.feature_dim);
  const double shift = spec.mean_separation / std::sqrt(static_cast<double>(spec.feature_dim));
  for (int32_t v = 0; v < spec.num_nodes; ++v) {
    double mu = (g.labels[v] == 1) ? shift : 0.0;
    for (int j = 0; j < spec.feature_dim; ++j)
      g.features[static_cast<size_t>(v) * spec.feature_dim + j] = rng.normal(mu, 1.0);
  }

  // edges: each edge joins same-class endpoints with probability = target
  for (int r = 0; r < spec.num_relations; ++r) {
    const double target = spec.homophily[r];
    const int64_t want_edges = std::llround(spec.avg_degree[r] * spec.num_nodes / 2.0);
    std::unordered_set<int64_t> taken;
    std::vector<std::pair<int32_t, int32_t>> edges;
    edges.reserve(want_edges);
    int64_t attempts = 0;
    const int64_t max_attempts = want_edges * 50 + 1000;
    while (static_cast<int64_t>(edges.size()) < want_edges && attempts < max_attempts) {
      ++attempts;
      int32_t u = static_cast<int32_t>(rng.below(spec.num_nodes));
      int c = g.labels[u];
      bool same = rng.uniform() < target;
      const auto& pool = by_class[same ? c : 1 - c];
      int32_t v = pool[rng.below(pool.size())];
      if (u == v) continue;
      int64_t key = static_cast<int64_t>(std::min(u, v)) * spec.num_nodes + std::max(u, v);
      if (!taken.insert(key).second) continue;
      edges.emplace_back(u, v);
    }
    g.relations.push_back(build_adjacency(spec.num_nodes, edges));
    g.relation_names.push_back("rel" + std::to_string(r));
  }

  g.validate();
  return g;
}

}  // namespace gfd
