// Command-line front end: dataset statistics, synthetic fixtures, splits,
// sequence preprocessing, training, evaluation and attention export.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gfd/attention.hpp"
#include "gfd/config.hpp"
#include "gfd/graph.hpp"
#include "gfd/groupagg.hpp"
#include "gfd/metrics.hpp"
#include "gfd/model.hpp"
#include "gfd/train.hpp"

namespace fs = std::filesystem;
using namespace gfd;

namespace {

// exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& overrides,
                         uint64_t* seed_override) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  for (const std::string& kv : overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed_override) cfg.seed = *seed_override;
  return cfg;
}

std::vector<uint64_t> parse_seed_list(const std::string& s) {
  std::vector<uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw std::invalid_argument("--seeds list is empty");
  return out;
}

void print_metrics(std::ostream& os, const Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "auc=%.6f\nap=%.6f\nf1_macro=%.6f\nf1_fraud=%.6f\nf1_benign=%.6f\nthreshold=%.2f\n",
                m.auc, m.ap, m.f1_macro, m.f1_fraud, m.f1_benign, m.threshold);
  os << buf;
}

struct MeanStd {
  double mean = 0.0, std = 0.0;
};

MeanStd aggregate(const std::vector<double>& xs) {
  MeanStd r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  for (double x : xs) r.std += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(xs.size()));
  return r;
}

void check_dataset_mode(const SequenceDataset& ds, const RunConfig& cfg) {
  const bool grouped = ds.mode == AggregationMode::grouped;
  if (grouped != cfg.group_agg)
    throw std::runtime_error(grouped ? "dataset holds grouped sequences but config has group_agg=0"
                                     : "dataset holds mean sequences but config has group_agg=1");
  if (ds.config.k_hops != cfg.n_hops)
    throw std::runtime_error("dataset was preprocessed with n_hops=" +
                             std::to_string(ds.config.k_hops) + ", config says " +
                             std::to_string(cfg.n_hops));
}

int cmd_stats(const std::string& dataset_dir) {
  MultiRelationGraph g = load_graph(dataset_dir);
  GraphStats s = compute_stats(g);
  std::printf("nodes=%d (IR=%.4f, labeled=%lld, feat_dim=%d)\n", s.num_nodes, s.imbalance_ratio,
              static_cast<long long>(s.num_labeled), s.feature_dim);
  std::printf("%-16s %12s %10s\n", "relation", "edges", "phi");
  for (size_t r = 0; r < s.relation_names.size(); ++r)
    std::printf("%-16s %12lld %10.4f\n", s.relation_names[r].c_str(),
                static_cast<long long>(s.undirected_edge_counts[r]), s.homophily[r]);
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  SyntheticSpec spec = parse_synthetic_spec_file(spec_path);
  MultiRelationGraph g = generate_synthetic(spec);
  save_graph(g, out_dir);
  std::printf("wrote %s: N=%d R=%d d=%d\n", out_dir.c_str(), g.num_nodes, g.num_relations(),
              g.feature_dim);
  for (int r = 0; r < g.num_relations(); ++r)
    std::printf("  %s: edges=%lld phi=%.4f (target %.4f)\n", g.relation_names[r].c_str(),
                static_cast<long long>(g.relations[r].num_entries() / 2), homophily_ratio(g, r),
                spec.homophily[r]);
  return 0;
}

int cmd_split(const std::string& dataset_dir, const RunConfig& cfg, const std::string& out_path) {
  MultiRelationGraph g = load_graph(dataset_dir);
  SplitAssignment s = make_splits(g, cfg.train_frac, cfg.val_frac, cfg.label_frac, cfg.seed);
  save_splits(s, out_path);
  std::printf("wrote %s: train=%zu val=%zu test=%zu observed=%zu\n", out_path.c_str(),
              s.count(SplitRole::train), s.count(SplitRole::val), s.count(SplitRole::test),
              s.count_observed());
  return 0;
}

int cmd_preprocess(const std::string& dataset_dir, const std::string& splits_path,
                   const RunConfig& cfg, const std::string& out_path, int workers) {
  MultiRelationGraph g = load_graph(dataset_dir);
  SplitAssignment splits = load_splits(splits_path, g.num_nodes);
  const auto start = std::chrono::steady_clock::now();
  SequenceDataset ds = preprocess_all(g, cfg.group_agg_config(), splits.observed,
                                      cfg.group_agg ? AggregationMode::grouped : AggregationMode::mean,
                                      workers);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_dataset(ds, out_path);
  std::printf("wrote %s: N=%lld S=%d d=%d (%.0f sequences/s)\n", out_path.c_str(),
              static_cast<long long>(ds.num_nodes), ds.seq_len, ds.feature_dim,
              static_cast<double>(ds.num_nodes) / std::max(secs, 1e-9));
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& splits_path, RunConfig cfg,
              const std::string& out_dir, const std::string& seeds_arg) {
  SequenceDataset ds = load_dataset(data_path);
  check_dataset_mode(ds, cfg);
  SplitAssignment splits = load_splits(splits_path, static_cast<int32_t>(ds.num_nodes));
  fs::create_directories(out_dir);

  std::vector<uint64_t> seeds = seeds_arg.empty() ? std::vector<uint64_t>{cfg.seed}
                                                  : parse_seed_list(seeds_arg);
  std::vector<Metrics> results;
  for (uint64_t seed : seeds) {
    cfg.seed = seed;
    const ModelConfig mc = cfg.model_config(ds.feature_dim, ds.num_relations);
    TrainResult result = train(ds, splits, mc, cfg.train_config());
    Metrics test = evaluate(result.model, ds, splits, SplitRole::test);
    results.push_back(test);

    const std::string suffix = seeds.size() > 1 ? "_seed" + std::to_string(seed) : "";
    result.model.save_checkpoint(out_dir + "/checkpoint" + suffix + ".bin");
    save_history_csv(result.history, out_dir + "/history" + suffix + ".csv");
    std::printf("seed=%llu best_epoch=%d val_auc=%.6f test_auc=%.6f test_ap=%.6f\n",
                static_cast<unsigned long long>(seed), result.history.best_epoch,
                result.history.best_val_auc, test.auc, test.ap);
  }
  save_config_file(cfg, out_dir + "/config_effective.txt");

  if (seeds.size() > 1) {
    auto col = [&results](auto f) {
      std::vector<double> xs;
      for (const Metrics& m : results) xs.push_back(f(m));
      return aggregate(xs);
    };
    MeanStd auc = col([](const Metrics& m) { return m.auc; });
    MeanStd ap = col([](const Metrics& m) { return m.ap; });
    MeanStd f1 = col([](const Metrics& m) { return m.f1_macro; });
    std::printf("AUC %.4f±%.4f  AP %.4f±%.4f  F1-macro %.4f±%.4f  (%zu runs)\n", auc.mean, auc.std,
                ap.mean, ap.std, f1.mean, f1.std, seeds.size());
  } else {
    print_metrics(std::cout, results[0]);
  }
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& splits_path, const RunConfig& cfg, const std::string& role_name) {
  SequenceDataset ds = load_dataset(data_path);
  check_dataset_mode(ds, cfg);
  SplitAssignment splits = load_splits(splits_path, static_cast<int32_t>(ds.num_nodes));
  const ModelConfig mc = cfg.model_config(ds.feature_dim, ds.num_relations);
  GroupTransformer model = GroupTransformer::load_checkpoint(ckpt_path, mc);
  SplitRole role = role_name == "train" ? SplitRole::train
                   : role_name == "val" ? SplitRole::val
                                        : SplitRole::test;
  print_metrics(std::cout, evaluate(model, ds, splits, role));
  return 0;
}

int cmd_attn(const std::string& ckpt_path, const std::string& data_path,
             const std::string& splits_path, const RunConfig& cfg, const std::string& out_csv) {
  SequenceDataset ds = load_dataset(data_path);
  check_dataset_mode(ds, cfg);
  SplitAssignment splits = load_splits(splits_path, static_cast<int32_t>(ds.num_nodes));
  const ModelConfig mc = cfg.model_config(ds.feature_dim, ds.num_relations);
  GroupTransformer model = GroupTransformer::load_checkpoint(ckpt_path, mc);
  AttentionReport report = compute_attention_report(model, ds, splits);
  save_attention_csv(report, out_csv);
  std::printf("wrote %s\n", out_csv.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-relational graph fraud detection pipeline"};
  app.require_subcommand(1);

  std::string dataset_dir, config_path, out_path, splits_path, data_path, ckpt_path;
  std::string spec_path, seeds_arg, role_name = "test";
  std::vector<std::string> overrides;
  uint64_t seed = 0;
  bool seed_given = false;
  int workers = 1;

  auto add_config_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", overrides, "config override key=value (repeatable)");
    cmd->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) { seed_given = true; });
  };

  auto* stats = app.add_subcommand("stats", "print dataset statistics");
  stats->add_option("dataset", dataset_dir, "dataset directory")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--spec", spec_path, "synthetic spec file")->required();
  synth->add_option("--out", out_path, "output dataset directory")->required();

  auto* split = app.add_subcommand("split", "create train/val/test splits");
  split->add_option("dataset", dataset_dir)->required();
  split->add_option("--out", out_path, "output splits.tsv")->required();
  add_config_flags(split);

  auto* preprocess = app.add_subcommand("preprocess", "build the sequence dataset");
  preprocess->add_option("dataset", dataset_dir)->required();
  preprocess->add_option("--splits", splits_path)->required();
  preprocess->add_option("--out", out_path)->required();
  preprocess->add_option("--workers", workers);
  add_config_flags(preprocess);

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--data", data_path)->required();
  train_cmd->add_option("--splits", splits_path)->required();
  train_cmd->add_option("--out", out_path)->required();
  train_cmd->add_option("--seeds", seeds_arg, "comma-separated seed list; reports mean±std");
  add_config_flags(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ckpt_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--splits", splits_path)->required();
  eval_cmd->add_option("--role", role_name, "train|val|test");
  add_config_flags(eval_cmd);

  auto* attn = app.add_subcommand("attn", "export attention statistics");
  attn->add_option("--checkpoint", ckpt_path)->required();
  attn->add_option("--data", data_path)->required();
  attn->add_option("--splits", splits_path)->required();
  attn->add_option("--out", out_path)->required();
  add_config_flags(attn);

  CLI11_PARSE(app, argc, argv);

  try {
    uint64_t* seed_ptr = seed_given ? &seed : nullptr;
    if (stats->parsed()) return cmd_stats(dataset_dir);
    if (synth->parsed()) return cmd_synth(spec_path, out_path);
    if (split->parsed()) return cmd_split(dataset_dir, resolve_config(config_path, overrides, seed_ptr), out_path);
    if (preprocess->parsed())
      return cmd_preprocess(dataset_dir, splits_path, resolve_config(config_path, overrides, seed_ptr),
                            out_path, workers);
    if (train_cmd->parsed())
      return cmd_train(data_path, splits_path, resolve_config(config_path, overrides, seed_ptr),
                       out_path, seeds_arg);
    if (eval_cmd->parsed())
      return cmd_eval(ckpt_path, data_path, splits_path,
                      resolve_config(config_path, overrides, seed_ptr), role_name);
    if (attn->parsed())
      return cmd_attn(ckpt_path, data_path, splits_path,
                      resolve_config(config_path, overrides, seed_ptr), out_path);
    std::cerr << "no subcommand\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << "\n";
    if (what.find("non-finite") != std::string::npos || what.find("diverged") != std::string::npos)
      return kExitNumeric;
    return kExitData;
  }
}
