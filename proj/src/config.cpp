#include "gfd/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gfd {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw std::invalid_argument("config key '" + key + "': expected boolean, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
  }
}

int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int64_t x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, key));
  return out;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "learning_rate")
    learning_rate = parse_double(value, key);
  else if (key == "weight_decay")
    weight_decay = parse_double(value, key);
  else if (key == "batch_size")
    batch_size = static_cast<int>(parse_int(value, key));
  else if (key == "max_epochs")
    max_epochs = static_cast<int>(parse_int(value, key));
  else if (key == "patience")
    patience = static_cast<int>(parse_int(value, key));
  else if (key == "dropout")
    dropout = parse_double(value, key);
  else if (key == "n_hidden")
    n_hidden = static_cast<int>(parse_int(value, key));
  else if (key == "n_layers")
    n_layers = static_cast<int>(parse_int(value, key));
  else if (key == "n_head")
    n_head = static_cast<int>(parse_int(value, key));
  else if (key == "n_hops")
    n_hops = static_cast<int>(parse_int(value, key));
  else if (key == "alpha")
    alpha = parse_double(value, key);
  else if (key == "activation") {
    if (value != "relu" && value != "gelu")
      throw std::invalid_argument("activation must be relu or gelu");
    activation = value;
  } else if (key == "use_hop_encoding")
    use_hop_encoding = parse_bool(value, key);
  else if (key == "use_relation_encoding")
    use_relation_encoding = parse_bool(value, key);
  else if (key == "use_group_encoding")
    use_group_encoding = parse_bool(value, key);
  else if (key == "group_agg")
    group_agg = parse_bool(value, key);
  else if (key == "train_frac")
    train_frac = parse_double(value, key);
  else if (key == "val_frac")
    val_frac = parse_double(value, key);
  else if (key == "label_frac")
    label_frac = parse_double(value, key);
  else if (key == "seed")
    seed = static_cast<uint64_t>(parse_int(value, key));
  else
    throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "learning_rate=" << fmt(learning_rate) << "\n"
      << "weight_decay=" << fmt(weight_decay) << "\n"
      << "batch_size=" << batch_size << "\n"
      << "max_epochs=" << max_epochs << "\n"
      << "patience=" << patience << "\n"
      << "dropout=" << fmt(dropout) << "\n"
      << "n_hidden=" << n_hidden << "\n"
      << "n_layers=" << n_layers << "\n"
      << "n_head=" << n_head << "\n"
      << "n_hops=" << n_hops << "\n"
      << "alpha=" << fmt(alpha) << "\n"
      << "activation=" << activation << "\n"
      << "use_hop_encoding=" << (use_hop_encoding ? 1 : 0) << "\n"
      << "use_relation_encoding=" << (use_relation_encoding ? 1 : 0) << "\n"
      << "use_group_encoding=" << (use_group_encoding ? 1 : 0) << "\n"
      << "group_agg=" << (group_agg ? 1 : 0) << "\n"
      << "train_frac=" << fmt(train_frac) << "\n"
      << "val_frac=" << fmt(val_frac) << "\n"
      << "label_frac=" << fmt(label_frac) << "\n"
      << "seed=" << seed << "\n";
  return out.str();
}

GroupAggConfig RunConfig::group_agg_config() const {
  GroupAggConfig cfg;
  cfg.k_hops = n_hops;
  cfg.alpha = alpha;
  return cfg;
}

ModelConfig RunConfig::model_config(int feat_dim, int num_relations) const {
  ModelConfig cfg;
  cfg.feat_dim = feat_dim;
  cfg.num_relations = num_relations;
  cfg.hidden_dim = n_hidden;
  cfg.num_layers = n_layers;
  cfg.num_heads = n_head;
  cfg.k_hops = n_hops;
  cfg.dropout = dropout;
  cfg.weight_decay = weight_decay;
  cfg.act = (activation == "gelu") ? Activation::gelu : Activation::relu;
  cfg.group_agg = group_agg;
  cfg.use_hop_encoding = use_hop_encoding;
  cfg.use_relation_encoding = use_relation_encoding;
  cfg.use_group_encoding = group_agg && use_group_encoding;
  return cfg;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig cfg;
  cfg.learning_rate = learning_rate;
  cfg.batch_size = batch_size;
  cfg.max_epochs = max_epochs;
  cfg.patience = patience;
  cfg.seed = seed;
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp);
    out << cfg.serialize();
  }
  std::filesystem::rename(tmp, path);
}

SyntheticSpec parse_synthetic_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing spec file: " + path);
  SyntheticSpec spec;
  spec.homophily.clear();
  spec.avg_degree.clear();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "num_nodes")
      spec.num_nodes = static_cast<int32_t>(parse_int(value, key));
    else if (key == "num_relations")
      spec.num_relations = static_cast<int>(parse_int(value, key));
    else if (key == "homophily")
      spec.homophily = parse_double_list(value, key);
    else if (key == "imbalance_ratio")
      spec.imbalance_ratio = parse_double(value, key);
    else if (key == "feature_dim")
      spec.feature_dim = static_cast<int>(parse_int(value, key));
    else if (key == "mean_separation")
      spec.mean_separation = parse_double(value, key);
    else if (key == "avg_degree")
      spec.avg_degree = parse_double_list(value, key);
    else if (key == "seed")
      spec.seed = static_cast<uint64_t>(parse_int(value, key));
    else
      throw std::invalid_argument("unknown synthetic spec key '" + key + "'");
  }
  // scalar targets replicate across relations
  if (spec.homophily.size() == 1 && spec.num_relations > 1)
    spec.homophily.assign(spec.num_relations, spec.homophily[0]);
  if (spec.avg_degree.size() == 1 && spec.num_relations > 1)
    spec.avg_degree.assign(spec.num_relations, spec.avg_degree[0]);
  spec.validate();
  return spec;
}

}  // namespace gfd
