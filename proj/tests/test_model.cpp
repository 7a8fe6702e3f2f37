#include <doctest.h>

#include <cmath>

#include "gfd/model.hpp"
#include "gfd/rng.hpp"
#include "gfd/tensor.hpp"
#include "test_util.hpp"

using namespace gfd;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.feat_dim = 2;
  cfg.hidden_dim = 4;
  cfg.num_layers = 1;
  cfg.num_heads = 2;
  cfg.k_hops = 1;
  cfg.num_relations = 1;
  cfg.dropout = 0.0;
  return cfg;
}

TensorPtr random_input(const ModelConfig& cfg, int batch, uint64_t seed) {
  Rng rng(seed);
  auto x = make_tensor({batch, cfg.seq_len(), cfg.feat_dim});
  for (auto& v : x->value) v = rng.normal() * 0.5;
  return x;
}

void zero_param(const GroupTransformer& model, const std::string& name) {
  for (const auto& p : model.parameters())
    if (p->name == name) {
      std::fill(p->value.begin(), p->value.end(), 0.0);
      return;
    }
  FAIL("no parameter named ", name);
}

}  // namespace

TEST_CASE("encoding index patterns for R=1, K=2 grouped sequences") {
  ModelConfig cfg = tiny_config();
  cfg.k_hops = 2;
  CHECK(cfg.block_len() == 7);
  CHECK(cfg.hop_indices() == std::vector<int>{0, 1, 1, 1, 2, 2, 2});
  CHECK(cfg.group_indices() ==
        std::vector<int>{kGroupUnknown, kGroupBenign, kGroupFraud, kGroupUnknown, kGroupBenign,
                         kGroupFraud, kGroupUnknown});
  CHECK(cfg.relation_indices() == std::vector<int>(7, 0));

  cfg.num_relations = 3;
  auto rel = cfg.relation_indices();
  CHECK(rel.size() == 21);
  CHECK(rel[0] == 0);
  CHECK(rel[7] == 1);
  CHECK(rel[20] == 2);
}

TEST_CASE("plain-mean variant uses short blocks and unknown-only groups") {
  ModelConfig cfg = tiny_config();
  cfg.k_hops = 2;
  cfg.group_agg = false;
  cfg.use_group_encoding = false;
  CHECK(cfg.block_len() == 3);
  CHECK(cfg.hop_indices() == std::vector<int>{0, 1, 2});
  CHECK(cfg.group_indices() == std::vector<int>(3, kGroupUnknown));
}

TEST_CASE("config validation rejects inconsistent settings") {
  ModelConfig cfg = tiny_config();
  cfg.num_heads = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.group_agg = false;  // group encoding still on
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = tiny_config();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config hash separates model-relevant settings") {
  ModelConfig a = tiny_config(), b = tiny_config();
  CHECK(config_hash(a) == config_hash(b));
  b.hidden_dim = 8;
  CHECK(config_hash(a) != config_hash(b));
  b = tiny_config();
  b.use_hop_encoding = false;
  CHECK(config_hash(a) != config_hash(b));
  // training-only knobs do not change the identity of the weights
  b = tiny_config();
  b.dropout = 0.5;
  b.weight_decay = 0.0;
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("zeroed encoding tables reduce encode_input to the projection") {
  ModelConfig cfg = tiny_config();
  GroupTransformer model(cfg, 1);
  zero_param(model, "enc.hop");
  zero_param(model, "enc.rel");
  zero_param(model, "enc.group");

  ModelConfig plain = cfg;
  plain.use_hop_encoding = plain.use_relation_encoding = plain.use_group_encoding = false;
  GroupTransformer model2(plain, 1);  // same seed -> same proj weights drawn first

  auto x = random_input(cfg, 2, 7);
  Tape t1, t2;
  auto a = model.encode_input(t1, x);
  auto b = model2.encode_input(t2, x);
  REQUIRE(a->value.size() == b->value.size());
  for (size_t i = 0; i < a->value.size(); ++i)
    CHECK(a->value[i] == doctest::Approx(b->value[i]).epsilon(1e-12));
}

TEST_CASE("captured attention rows are proper distributions") {
  ModelConfig cfg = tiny_config();
  cfg.num_layers = 2;
  GroupTransformer model(cfg, 3);
  auto x = random_input(cfg, 2, 9);
  Tape tape;
  Rng rng(0);
  AttentionCapture attn;
  model.forward(tape, x, false, rng, &attn);
  CHECK(attn.layers == 2);
  CHECK(attn.heads == 2);
  CHECK(attn.seq == cfg.seq_len());
  for (int l = 0; l < attn.layers; ++l)
    for (int m = 0; m < attn.heads; ++m)
      for (int b = 0; b < attn.batch; ++b)
        for (int i = 0; i < attn.seq; ++i) {
          double sum = 0;
          for (int j = 0; j < attn.seq; ++j) {
            const double w = attn.at(l, m, b, i, j);
            CHECK(w >= 0.0);
            sum += w;
          }
          CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        }
}

TEST_CASE("a zeroed output head predicts exactly one half") {
  ModelConfig cfg = tiny_config();
  GroupTransformer model(cfg, 5);
  zero_param(model, "head.w2");
  zero_param(model, "head.b2");
  auto x = random_input(cfg, 3, 11);
  Tape tape;
  Rng rng(0);
  auto probs = model.forward(tape, x, false, rng);
  CHECK(probs->shape == Shape{3, 1, 1});
  for (double p : probs->value) CHECK(p == 0.5);
}

TEST_CASE("forward outputs are probabilities and eval mode is deterministic") {
  ModelConfig cfg = tiny_config();
  cfg.dropout = 0.2;
  GroupTransformer model(cfg, 8);
  auto x = random_input(cfg, 4, 13);
  Tape t1, t2;
  Rng r1(0), r2(0);
  auto a = model.forward(t1, x, false, r1);
  auto b = model.forward(t2, x, false, r2);
  CHECK(a->value == b->value);
  for (double p : a->value) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("rows of a batch are scored independently") {
  ModelConfig cfg = tiny_config();
  GroupTransformer model(cfg, 4);
  auto x = random_input(cfg, 3, 17);
  Tape t1;
  Rng rng(0);
  auto batched = model.forward(t1, x, false, rng)->value;
  const size_t row = static_cast<size_t>(cfg.seq_len()) * cfg.feat_dim;
  for (int i = 0; i < 3; ++i) {
    auto single = make_tensor({1, cfg.seq_len(), cfg.feat_dim});
    std::copy(x->value.begin() + i * row, x->value.begin() + (i + 1) * row, single->value.begin());
    Tape t;
    auto p = model.forward(t, single, false, rng);
    CHECK(p->value[0] == doctest::Approx(batched[i]).epsilon(1e-12));
  }
}

TEST_CASE("loss at p=0.5 without weight decay is n*ln(2)") {
  ModelConfig cfg = tiny_config();
  cfg.weight_decay = 0.0;
  GroupTransformer model(cfg, 2);
  Tape tape;
  auto probs = make_tensor({4, 1, 1}, {0.5, 0.5, 0.5, 0.5});
  auto l = model.loss(tape, probs, {1, 0, 1, 0});
  CHECK(l->scalar() == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("weight decay term equals lambda times the exact parameter norm") {
  ModelConfig cfg = tiny_config();
  cfg.weight_decay = 0.01;
  GroupTransformer model(cfg, 2);
  double norm = 0;
  for (const auto& p : model.parameters())
    for (double v : p->value) norm += v * v;
  Tape tape;
  auto probs = make_tensor({1, 1, 1}, {0.5});
  auto l = model.loss(tape, probs, {1});
  CHECK(l->scalar() == doctest::Approx(std::log(2.0) + 0.01 * norm).epsilon(1e-12));
}

TEST_CASE("near-perfect confident predictions give near-zero data loss") {
  ModelConfig cfg = tiny_config();
  cfg.weight_decay = 0.0;
  GroupTransformer model(cfg, 2);
  Tape tape;
  auto probs = make_tensor({2, 1, 1}, {1.0 - 1e-9, 1e-9});
  auto l = model.loss(tape, probs, {1, 0});
  CHECK(l->scalar() < 1e-8);
}

TEST_CASE("full model gradients agree with finite differences") {
  ModelConfig cfg = tiny_config();
  cfg.weight_decay = 1e-3;
  GroupTransformer model(cfg, 6);
  auto x = random_input(cfg, 2, 19);
  std::vector<double> targets = {1.0, 0.0};
  Rng rng(0);
  auto closure = [&](Tape& tape) {
    auto probs = model.forward(tape, x, false, rng);
    return model.loss(tape, probs, targets);
  };
  auto report = grad_check(closure, model.parameters(), 1e-5, 2e-4);
  for (const auto& e : report.entries) {
    INFO(e.name, " rel err ", e.max_rel_error);
    CHECK(e.pass);
  }
}

TEST_CASE("plain-mean model accepts its shorter sequences") {
  ModelConfig cfg = tiny_config();
  cfg.group_agg = false;
  cfg.use_group_encoding = false;
  cfg.k_hops = 2;
  GroupTransformer model(cfg, 9);
  CHECK(cfg.seq_len() == 3);
  auto x = random_input(cfg, 2, 23);
  Tape tape;
  Rng rng(0);
  auto p = model.forward(tape, x, false, rng);
  CHECK(p->shape.batch == 2);
}

TEST_CASE("snapshot/restore round-trips every parameter") {
  ModelConfig cfg = tiny_config();
  GroupTransformer a(cfg, 1), b(cfg, 2);
  auto snap = a.snapshot_values();
  b.restore_values(snap);
  auto x = random_input(cfg, 2, 29);
  Tape t1, t2;
  Rng r(0);
  CHECK(a.forward(t1, x, false, r)->value == b.forward(t2, x, false, r)->value);
}

TEST_CASE("checkpoint round-trip preserves weights at float precision") {
  ModelConfig cfg = tiny_config();
  GroupTransformer model(cfg, 12);
  gfd::test::TempDir dir("ckpt");
  model.save_checkpoint(dir.file("m.ckpt"));
  auto loaded = GroupTransformer::load_checkpoint(dir.file("m.ckpt"), cfg);
  const auto& orig = model.parameters();
  const auto& got = loaded.parameters();
  REQUIRE(orig.size() == got.size());
  for (size_t i = 0; i < orig.size(); ++i)
    for (size_t j = 0; j < orig[i]->value.size(); ++j)
      CHECK(got[i]->value[j] == static_cast<double>(static_cast<float>(orig[i]->value[j])));
}

TEST_CASE("checkpoint refuses a mismatched config") {
  ModelConfig cfg = tiny_config();
  GroupTransformer model(cfg, 12);
  gfd::test::TempDir dir("ckpt_mismatch");
  model.save_checkpoint(dir.file("m.ckpt"));
  ModelConfig other = cfg;
  other.hidden_dim = 8;
  CHECK_THROWS_WITH_AS(GroupTransformer::load_checkpoint(dir.file("m.ckpt"), other),
                       doctest::Contains("hash mismatch"), std::runtime_error);
}

TEST_CASE("batch_input copies dataset rows into a [B,S,d] tensor") {
  SequenceDataset ds;
  ds.num_nodes = 3;
  ds.seq_len = 2;
  ds.feature_dim = 2;
  ds.labels = {0, 1, 0};
  ds.data = {0, 1, 2, 3, 10, 11, 12, 13, 20, 21, 22, 23};
  auto t = batch_input(ds, {2, 0});
  CHECK(t->shape == Shape{2, 2, 2});
  CHECK(t->value == std::vector<double>{20, 21, 22, 23, 0, 1, 2, 3});
}
