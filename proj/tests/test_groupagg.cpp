#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gfd/groupagg.hpp"
#include "gfd/rng.hpp"
#include "test_util.hpp"

using namespace gfd;

namespace {

MultiRelationGraph make_graph(int32_t n, int d,
                              const std::vector<std::vector<std::pair<int32_t, int32_t>>>& rel_edges,
                              const std::vector<int8_t>& labels, uint64_t feat_seed = 1) {
  MultiRelationGraph g;
  g.num_nodes = n;
  g.feature_dim = d;
  g.labels = labels;
  Rng rng(feat_seed);
  g.features.resize(static_cast<size_t>(n) * d);
  for (auto& x : g.features) x = rng.normal();
  for (size_t r = 0; r < rel_edges.size(); ++r) {
    g.relations.push_back(build_adjacency(n, rel_edges[r]));
    g.relation_names.push_back("r" + std::to_string(r));
  }
  return g;
}

MultiRelationGraph random_graph(int32_t n, int num_relations, double edge_prob, double label_prob,
                                double observe_prob, uint64_t seed, std::vector<uint8_t>* observed) {
  Rng rng(seed);
  std::vector<int8_t> labels(n);
  observed->assign(n, 0);
  for (int32_t v = 0; v < n; ++v) {
    labels[v] = rng.uniform() < label_prob ? static_cast<int8_t>(rng.below(2)) : kUnlabeled;
    if (labels[v] != kUnlabeled && rng.uniform() < observe_prob) (*observed)[v] = 1;
  }
  std::vector<std::vector<std::pair<int32_t, int32_t>>> rel_edges(num_relations);
  for (int r = 0; r < num_relations; ++r)
    for (int32_t u = 0; u < n; ++u)
      for (int32_t v = u + 1; v < n; ++v)
        if (rng.uniform() < edge_prob) rel_edges[r].emplace_back(u, v);
  return make_graph(n, 3, rel_edges, labels, seed + 99);
}

}  // namespace

TEST_CASE("khop of an isolated node is its own self-loop at every hop") {
  auto g = make_graph(3, 2, {{{1, 2}}}, {0, 1, kUnlabeled});
  auto hood = khop_neighbors(g, 0, 0, 2);
  CHECK(hood.hops[0] == std::vector<int32_t>{0});
  CHECK(hood.hops[1] == std::vector<int32_t>{0});
}

TEST_CASE("khop on a path matches squaring A+I by hand") {
  auto g = make_graph(3, 2, {{{0, 1}, {1, 2}}}, {0, 1, kUnlabeled});
  auto hood = khop_neighbors(g, 0, 0, 2);
  CHECK(hood.hops[0] == std::vector<int32_t>{0, 1});
  CHECK(hood.hops[1] == std::vector<int32_t>{0, 1, 2});
}

TEST_CASE("khop on a triangle reaches everything in one hop") {
  auto g = make_graph(3, 2, {{{0, 1}, {1, 2}, {0, 2}}}, {0, 1, 0});
  auto hood = khop_neighbors(g, 0, 0, 1);
  CHECK(hood.hops[0] == std::vector<int32_t>{0, 1, 2});
}

TEST_CASE("khop rejects an out-of-range target") {
  auto g = make_graph(3, 2, {{{0, 1}}}, {0, 1, 0});
  CHECK_THROWS_AS(khop_neighbors(g, 0, 5, 1), std::out_of_range);
}

TEST_CASE("hop sets are monotone under the self-loop semantics") {
  std::vector<uint8_t> observed;
  auto g = random_graph(40, 2, 0.08, 0.8, 0.6, 5, &observed);
  for (int r = 0; r < 2; ++r)
    for (int32_t v = 0; v < g.num_nodes; v += 7) {
      auto hood = khop_neighbors(g, r, v, 3);
      for (int k = 1; k < 3; ++k)
        CHECK(std::includes(hood.hops[k].begin(), hood.hops[k].end(), hood.hops[k - 1].begin(),
                            hood.hops[k - 1].end()));
    }
}

TEST_CASE("group_nodes splits by observed label with target masking") {
  // target v=0, a=1 benign observed, b=2 fraud observed, c=3 unobserved
  std::vector<int8_t> labels = {1, 0, 1, kUnlabeled};
  std::vector<uint8_t> observed = {1, 1, 1, 0};
  auto groups = group_nodes({0, 1, 2, 3}, 0, labels, observed);
  CHECK(groups[kGroupBenign] == std::vector<int32_t>{1});
  CHECK(groups[kGroupFraud] == std::vector<int32_t>{2});
  CHECK(groups[kGroupUnknown] == std::vector<int32_t>{0, 3});
}

TEST_CASE("group_nodes with only the target yields empty class groups") {
  std::vector<int8_t> labels = {1};
  std::vector<uint8_t> observed = {1};
  auto groups = group_nodes({0}, 0, labels, observed);
  CHECK(groups[kGroupBenign].empty());
  CHECK(groups[kGroupFraud].empty());
  CHECK(groups[kGroupUnknown] == std::vector<int32_t>{0});
}

TEST_CASE("group_nodes with all neighbors unobserved puts everything in unknown") {
  std::vector<int8_t> labels = {1, 0, 1};
  std::vector<uint8_t> observed = {0, 0, 0};
  auto groups = group_nodes({0, 1, 2}, 0, labels, observed);
  CHECK(groups[kGroupBenign].empty());
  CHECK(groups[kGroupFraud].empty());
  CHECK(groups[kGroupUnknown].size() == 3);
}

TEST_CASE("group_aggregate: empty group is zero, singleton is the feature") {
  MultiRelationGraph g = make_graph(2, 2, {{{0, 1}}}, {0, 1});
  g.features = {2.0, 0.0, 0.0, 4.0};
  auto vecs = group_aggregate({{}, {0}, {0, 1}}, g, 1.0);
  CHECK(vecs[0] == std::vector<double>{0.0, 0.0});
  CHECK(vecs[1] == std::vector<double>{2.0, 0.0});
  CHECK(vecs[2][0] == doctest::Approx(1.0));
  CHECK(vecs[2][1] == doctest::Approx(2.0));
}

TEST_CASE("group_aggregate singleton is exact for any alpha") {
  MultiRelationGraph g = make_graph(2, 2, {{{0, 1}}}, {0, 1});
  g.features = {2.5, -1.0, 0.0, 0.0};
  for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
    auto vecs = group_aggregate({{0}}, g, alpha);
    CHECK(vecs[0][0] == doctest::Approx(2.5));
    CHECK(vecs[0][1] == doctest::Approx(-1.0));
  }
}

TEST_CASE("build_sequence shape law S = R*(P*K+1)") {
  std::vector<uint8_t> observed;
  auto g = random_graph(30, 3, 0.1, 0.8, 0.5, 2, &observed);
  for (int K = 1; K <= 4; ++K) {
    GroupAggConfig cfg;
    cfg.k_hops = K;
    auto seq = build_sequence(g, 0, cfg, observed);
    CHECK(seq.rows == 3 * (3 * K + 1));
  }
  GroupAggConfig cfg;
  cfg.k_hops = 2;
  CHECK(cfg.seq_len(3) == 21);
}

TEST_CASE("build_sequence of an isolated unlabeled node traced by hand") {
  // R=1, K=1: rows [x_v, 0, 0, x_v]
  auto g = make_graph(2, 2, {{}}, {kUnlabeled, 0});
  g.relations[0] = build_adjacency(2, {});
  std::vector<uint8_t> observed = {0, 1};
  GroupAggConfig cfg;
  cfg.k_hops = 1;
  auto seq = build_sequence(g, 0, cfg, observed);
  REQUIRE(seq.rows == 4);
  for (int j = 0; j < 2; ++j) {
    CHECK(seq.row(0)[j] == g.feature_row(0)[j]);
    CHECK(seq.row(1)[j] == 0.0);
    CHECK(seq.row(2)[j] == 0.0);
    CHECK(seq.row(3)[j] == g.feature_row(0)[j]);
  }
}

TEST_CASE("target's own observed label never changes its sequence") {
  std::vector<uint8_t> observed;
  auto g = random_graph(50, 2, 0.08, 0.9, 0.6, 3, &observed);
  GroupAggConfig cfg;
  for (int32_t v = 0; v < g.num_nodes; v += 5) {
    auto base = build_sequence(g, v, cfg, observed);
    std::vector<uint8_t> flipped = observed;
    flipped[v] = observed[v] ? 0 : 1;
    auto alt = build_sequence(g, v, cfg, flipped);
    CHECK(base.values == alt.values);
    if (g.labels[v] != kUnlabeled) {
      MultiRelationGraph g2 = g;
      g2.labels[v] = static_cast<int8_t>(1 - g2.labels[v]);
      auto alt2 = build_sequence(g2, v, cfg, observed);
      CHECK(base.values == alt2.values);
    }
  }
}

TEST_CASE("matrix oracle: no observed benign nodes gives a zero matrix") {
  std::vector<int8_t> labels = {1, 1, kUnlabeled};
  auto g = make_graph(3, 2, {{{0, 1}, {1, 2}}}, labels);
  std::vector<uint8_t> observed = {1, 1, 0};
  auto mat = matrix_oracle(g, 0, 1, kGroupBenign, observed, 1.0);
  for (double v : mat) CHECK(v == 0.0);
}

TEST_CASE("matrix oracle rows match build_sequence group rows") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    std::vector<uint8_t> observed;
    auto g = random_graph(30, 2, 0.1, 0.7, 0.5, seed, &observed);
    GroupAggConfig cfg;
    cfg.k_hops = 2;
    const int d = g.feature_dim;
    for (int32_t v = 0; v < g.num_nodes; ++v) {
      auto seq = build_sequence(g, v, cfg, observed);
      for (int r = 0; r < g.num_relations(); ++r)
        for (int k = 1; k <= cfg.k_hops; ++k)
          for (int grp = 0; grp < 3; ++grp) {
            auto oracle = matrix_oracle(g, r, k, grp, observed, cfg.alpha);
            const int row = r * cfg.block_len() + 1 + (k - 1) * 3 + grp;
            for (int j = 0; j < d; ++j)
              CHECK(std::fabs(seq.row(row)[j] - oracle[static_cast<size_t>(v) * d + j]) < 1e-9);
          }
    }
  }
}

TEST_CASE("fully observed class matrices sum to plain masked-neighbor mean") {
  std::vector<uint8_t> observed;
  auto g = random_graph(25, 1, 0.15, 1.0, 1.0, 8, &observed);
  observed.assign(g.num_nodes, 1);
  const int d = g.feature_dim;
  auto m0 = matrix_oracle(g, 0, 1, kGroupBenign, observed, 1.0);
  auto m1 = matrix_oracle(g, 0, 1, kGroupFraud, observed, 1.0);
  const auto& adj = g.relations[0];
  for (int32_t v = 0; v < g.num_nodes; ++v) {
    const int64_t deg = adj.degree(v);
    if (deg == 0) continue;
    // counts per class among neighbors (self excluded by the oracle)
    int64_t n0 = 0, n1 = 0;
    std::vector<double> mean(d, 0.0);
    for (const int32_t* p = adj.neighbors_begin(v); p != adj.neighbors_end(v); ++p) {
      (g.labels[*p] == 0 ? n0 : n1)++;
      for (int j = 0; j < d; ++j) mean[j] += g.feature_row(*p)[j];
    }
    for (int j = 0; j < d; ++j) {
      const double combined =
          (n0 * m0[static_cast<size_t>(v) * d + j] + n1 * m1[static_cast<size_t>(v) * d + j]) / deg;
      CHECK(combined == doctest::Approx(mean[j] / deg).epsilon(1e-9));
    }
  }
}

TEST_CASE("with zero observed labels GA degenerates to the unmasked mean") {
  std::vector<uint8_t> observed;
  auto g = random_graph(30, 1, 0.12, 0.8, 0.0, 4, &observed);
  observed.assign(g.num_nodes, 0);
  GroupAggConfig cfg;
  cfg.k_hops = 2;
  const int d = g.feature_dim;
  for (int32_t v = 0; v < g.num_nodes; v += 3) {
    auto seq = build_sequence(g, v, cfg, observed);
    auto hood = khop_neighbors(g, 0, v, cfg.k_hops);
    for (int k = 1; k <= cfg.k_hops; ++k) {
      const auto& members = hood.hops[k - 1];
      std::vector<double> mean(d, 0.0);
      for (int32_t u : members)
        for (int j = 0; j < d; ++j) mean[j] += g.feature_row(u)[j];
      for (int j = 0; j < d; ++j) mean[j] /= static_cast<double>(members.size());
      // groups -,+ are empty; * holds the whole hop set, so the size-weighted
      // combination is just the * row
      const int star = 1 + (k - 1) * 3 + kGroupUnknown;
      for (int j = 0; j < d; ++j) CHECK(seq.row(star)[j] == doctest::Approx(mean[j]).epsilon(1e-12));
      const int benign_row = 1 + (k - 1) * 3 + kGroupBenign;
      const int fraud_row = 1 + (k - 1) * 3 + kGroupFraud;
      for (int j = 0; j < d; ++j) {
        CHECK(seq.row(benign_row)[j] == 0.0);
        CHECK(seq.row(fraud_row)[j] == 0.0);
      }
    }
  }
}

TEST_CASE("build_mean_sequence has R*(K+1) rows with the hop means") {
  std::vector<uint8_t> observed;
  auto g = random_graph(20, 2, 0.15, 0.8, 0.5, 6, &observed);
  auto seq = build_mean_sequence(g, 3, 2);
  CHECK(seq.rows == 2 * 3);
  for (int j = 0; j < g.feature_dim; ++j) CHECK(seq.row(0)[j] == g.feature_row(3)[j]);
}

TEST_CASE("preprocess_all: one sequence per node, workers do not change bytes") {
  std::vector<uint8_t> observed;
  auto g = random_graph(60, 2, 0.07, 0.8, 0.5, 9, &observed);
  GroupAggConfig cfg;
  auto serial = preprocess_all(g, cfg, observed, AggregationMode::grouped, 1);
  auto parallel = preprocess_all(g, cfg, observed, AggregationMode::grouped, 8);
  CHECK(serial.num_nodes == 60);
  CHECK(serial.seq_len == cfg.seq_len(2));
  CHECK(serial.data == parallel.data);
  CHECK(serial.labels == parallel.labels);
}

TEST_CASE("sequence dataset file round-trip is lossless") {
  std::vector<uint8_t> observed;
  auto g = random_graph(25, 2, 0.1, 0.8, 0.5, 12, &observed);
  GroupAggConfig cfg;
  auto ds = preprocess_all(g, cfg, observed);
  gfd::test::TempDir dir("seqds");
  save_dataset(ds, dir.file("seq.bin"));
  auto ds2 = load_dataset(dir.file("seq.bin"));
  CHECK(ds2.num_nodes == ds.num_nodes);
  CHECK(ds2.seq_len == ds.seq_len);
  CHECK(ds2.feature_dim == ds.feature_dim);
  CHECK(ds2.config.alpha == ds.config.alpha);
  CHECK(ds2.data == ds.data);
  CHECK(ds2.labels == ds.labels);
}

TEST_CASE("dataset file rewrite is byte-identical") {
  std::vector<uint8_t> observed;
  auto g = random_graph(15, 1, 0.2, 0.8, 0.5, 13, &observed);
  GroupAggConfig cfg;
  auto ds = preprocess_all(g, cfg, observed);
  gfd::test::TempDir dir("seqbytes");
  save_dataset(ds, dir.file("a.bin"));
  save_dataset(ds, dir.file("b.bin"));
  std::ifstream a(dir.file("a.bin"), std::ios::binary), b(dir.file("b.bin"), std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}
