#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fairgnn/error.hpp"
#include "fairgnn/interventions.hpp"
#include "fairgnn/models.hpp"
#include "fairgnn/optim.hpp"
#include "fairgnn/rng.hpp"
#include "test_util.hpp"

using namespace fairgnn;
using testutil::random_graph;
using testutil::random_tensor;

namespace {

Graph triangle() {
  Graph g;
  g.n_nodes = 3;
  std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}, {0, 2}};
  g.adjacency = symmetric_adjacency(3, e);
  g.features = Tensor(3, 2, 1.0);
  g.labels = {0, 1, 0};
  g.fairness = {0, 1, 1};
  g.privacy = {0, 0, 1};
  return g;
}

ModelSpec small_spec(ModelKind kind, std::size_t din, int heads = 2) {
  ModelSpec s = ModelSpec::standard(kind, din, 4, 2);
  s.gat_heads = heads;
  s.dropout_p = 0.0;
  return s;
}

ForwardResult forward_eval(Tape& tape, const ModelSpec& spec, const ParameterSet& ps, const Graph& g,
                           const EdgeWeights* w = nullptr) {
  const Propagation prop = build_propagation(g, w, spec.kind);
  BoundParams bp{&ps, ps.bind(tape, false)};
  return forward(tape, spec, bp, prop, {}, tape.constant(g.features), {});
}

// Independent dense GCN: D^-1/2 (A + I) D^-1/2, relu at each layer, then head.
Tensor dense_gcn(const Graph& g, const ParameterSet& ps, std::size_t layers) {
  const std::size_t n = g.n_nodes;
  Tensor a = g.adjacency.to_dense();
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);
  Tensor h = g.features;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string p = "l" + std::to_string(l);
    Tensor z = matmul(a, matmul(h, ps[p + ".W"]));
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) = std::max(0.0, z(i, j) + ps[p + ".b"][j]);
    h = z;
  }
  Tensor out = matmul(h, ps["head.W"]);
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += ps["head.b"][j];
  return out;
}

Graph permuted(const Graph& g, const std::vector<std::size_t>& perm) {
  // Node v of g becomes node perm[v].
  std::vector<std::pair<std::size_t, std::size_t>> e;
  const auto& a = g.adjacency;
  for (std::size_t v = 0; v < g.n_nodes; ++v)
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k)
      if (v < a.indices()[k]) e.emplace_back(perm[v], perm[a.indices()[k]]);
  Graph p = g;
  p.adjacency = symmetric_adjacency(g.n_nodes, e);
  for (std::size_t v = 0; v < g.n_nodes; ++v) {
    for (std::size_t c = 0; c < g.features.cols(); ++c) p.features(perm[v], c) = g.features(v, c);
    p.labels[perm[v]] = g.labels[v];
    p.fairness[perm[v]] = g.fairness[v];
    p.privacy[perm[v]] = g.privacy[v];
  }
  return p;
}

}  // namespace

TEST_CASE("normalize_adjacency") {
  SUBCASE("single isolated node") {
    Graph g;
    g.n_nodes = 1;
    g.adjacency = symmetric_adjacency(1, {});
    CHECK(normalize_adjacency(g, nullptr, NormalizationMode::sym).to_dense() == Tensor(1, 1, 1.0));
  }
  SUBCASE("triangle, sym: every entry 1/3") {
    const Tensor d = normalize_adjacency(triangle(), nullptr, NormalizationMode::sym).to_dense();
    for (double v : d.values()) CHECK(std::abs(v - 1.0 / 3.0) <= 1e-15);
  }
  SUBCASE("row mode rows sum to exactly 1") {
    Rng rng(4);
    const Graph g = random_graph(30, 0.1, 2, rng);
    const SparseMatrix r = normalize_adjacency(g, nullptr, NormalizationMode::row);
    for (double s : r.row_sums()) CHECK(std::abs(s - 1.0) <= 1e-15);
  }
  SUBCASE("uniform weights w = c give the same sym matrix as w = 1") {
    Rng rng(5);
    const Graph g = random_graph(20, 0.2, 2, rng);
    EdgeWeights w{std::vector<double>(g.adjacency.nnz(), 3.7)};
    const SparseMatrix a = normalize_adjacency(g, nullptr, NormalizationMode::sym);
    const SparseMatrix b = normalize_adjacency(g, &w, NormalizationMode::sym);
    CHECK(max_abs_diff(a.to_dense(), b.to_dense()) <= 1e-15);
  }
}

TEST_CASE("gcn forward equals a dense reimplementation") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const Graph g = random_graph(6, 0.4, 3, rng, trial % 2 == 0);
    const ModelSpec spec = small_spec(ModelKind::gcn, 3);
    Rng init(trial);
    const ParameterSet ps = init_parameters(spec, init);
    Tape tape;
    const Tensor logits = forward_eval(tape, spec, ps, g).logits.value();
    CHECK(max_abs_diff(logits, dense_gcn(g, ps, 2)) <= 1e-12);
  }
}

TEST_CASE("gat attention") {
  SUBCASE("node with only a self loop attends to itself with weight 1") {
    Graph g = triangle();
    g.n_nodes = 4;
    std::vector<std::pair<std::size_t, std::size_t>> e{{0, 1}, {1, 2}, {0, 2}};
    g.adjacency = symmetric_adjacency(4, e);
    g.features = Tensor::from_rows({{1, 0}, {0, 1}, {1, 1}, {2, -1}});
    g.labels.push_back(1);
    g.fairness.push_back(0);
    g.privacy.push_back(0);
    const Propagation prop = build_propagation(g, nullptr, ModelKind::gat);
    const auto& pat = *prop.attention_pattern;
    CHECK(pat.row_end(3) - pat.row_begin(3) == 1);
    Tape tape;
    Rng rng(1);
    Var e_scores = tape.constant(random_tensor(pat.nnz(), 1, rng));
    const Tensor alpha = ops::masked_row_softmax(prop.attention_pattern, e_scores).value();
    CHECK(alpha[pat.row_begin(3)] == 1.0);
    // Rows sum to 1 over the masked neighborhood.
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0;
      for (std::size_t k = pat.row_begin(r); k < pat.row_end(r); ++k) s += alpha[k];
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("gin with eps 0, isolated node and identity MLP returns its input") {
  Graph g;
  g.n_nodes = 2;
  g.adjacency = symmetric_adjacency(2, {});
  g.features = Tensor::from_rows({{0.5, 2.0}, {1.0, 0.0}});
  g.labels = {0, 1};
  g.fairness = {0, 1};
  g.privacy = {0, 1};
  ModelSpec spec;
  spec.kind = ModelKind::gin;
  spec.layer_dims = {2, 2};
  spec.dropout_p = 0.0;
  Rng rng(1);
  ParameterSet ps = init_parameters(spec, rng);
  ps["l0.W1"] = Tensor::identity(2);
  ps["l0.W2"] = Tensor::identity(2);
  Tape tape;
  CHECK(forward_eval(tape, spec, ps, g).embeddings.value() == g.features);
}

TEST_CASE("every layer kind passes grad_check on small random graphs") {
  Rng rng(21);
  const ModelKind kinds[] = {ModelKind::gcn, ModelKind::sage, ModelKind::gat, ModelKind::gin};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 4 + rng.below(13);  // <= 16 nodes
    const Graph g = random_graph(n, 0.3, 3, rng, trial % 3 != 0);
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::optional<EdgeWeights> w;
    if (trial % 2) w = fairwalk_conv_weights(g, g.fairness);
    for (ModelKind kind : kinds) {
      ModelSpec spec = small_spec(kind, 3);
      spec.activation = trial % 4 == 1 ? Activation::tanh : Activation::relu;
      Rng init(100 + trial);
      const ParameterSet ps = init_parameters(spec, init);
      const Propagation prop = build_propagation(g, w ? &*w : nullptr, kind);
      auto f = [&](Tape& tape, std::span<const Var> vars) {
        BoundParams bp{&ps, std::vector<Var>(vars.begin(), vars.end())};
        ForwardResult out = forward(tape, spec, bp, prop, {}, tape.constant(g.features), {});
        return ops::cross_entropy(out.logits, g.labels, rows);
      };
      const auto rep = grad_check(f, ps.tensors());
      INFO(to_string(kind) << " trial " << trial << " n " << n << " err " << rep.max_rel_error << " at "
                           << rep.worst_param);
      CHECK(rep.passed(1e-4));
    }
  }
}

TEST_CASE("permutation equivariance on 8-node graphs") {
  Rng rng(8);
  const ModelKind kinds[] = {ModelKind::gcn, ModelKind::sage, ModelKind::gat, ModelKind::gin};
  for (int trial = 0; trial < 5; ++trial) {
    const Graph g = random_graph(8, 0.35, 3, rng);
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const Graph gp = permuted(g, perm);
    for (ModelKind kind : kinds) {
      const ModelSpec spec = small_spec(kind, 3);
      Rng init(trial);
      const ParameterSet ps = init_parameters(spec, init);
      Tape t1, t2;
      const Tensor z = forward_eval(t1, spec, ps, g).embeddings.value();
      const Tensor zp = forward_eval(t2, spec, ps, gp).embeddings.value();
      double worst = 0;
      for (std::size_t v = 0; v < 8; ++v)
        for (std::size_t c = 0; c < z.cols(); ++c) worst = std::max(worst, std::abs(z(v, c) - zp(perm[v], c)));
      INFO(to_string(kind));
      // Neighbor sums are taken in a different order, so allow roundoff.
      CHECK(worst <= 1e-13);
    }
  }
}

TEST_CASE("training") {
  SUBCASE("separable homophilous graph reaches train accuracy 1") {
    SyntheticSpec s;
    s.n_nodes = 200;
    s.label_group_correlation = 1.0;
    s.intra_group_edge_prob = 0.1;
    s.inter_group_edge_prob = 0.0;
    const Graph g = generate_synthetic(s, 1);
    const NodeSplit split = make_splits(g, {}, 1);
    const ModelSpec spec = ModelSpec::standard(ModelKind::gcn, g.features.cols(), 16, 2);
    TrainHyper h{0.01, 200, 5e-4, 1};
    h.early_select = false;
    const TrainedModel m = train(spec, g, split, h);
    CHECK(accuracy_of(m.logits, g.labels, split.train) == 1.0);
  }
  SUBCASE("epochs = 0 keeps the initialization; accuracy near chance") {
    SyntheticSpec s;
    s.n_nodes = 200;
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Graph g = generate_synthetic(s, seed);
      const NodeSplit split = make_splits(g, {}, seed);
      const ModelSpec spec = ModelSpec::standard(ModelKind::gcn, g.features.cols(), 16, 2);
      const TrainedModel m = train(spec, g, split, TrainHyper{0.01, 0, 5e-4, seed});
      CHECK(m.params == baseline_setup(spec, seed).params);
      mean += accuracy_of(m.logits, g.labels, split.test) / 10.0;
    }
    CHECK(std::abs(mean - 0.5) <= 0.15);
  }
  SUBCASE("same spec, data and seed give identical parameters") {
    Rng rng(3);
    const Graph g = random_graph(40, 0.1, 4, rng);
    const NodeSplit split = make_splits(g, {}, 0);
    for (ModelKind kind : {ModelKind::gcn, ModelKind::sage, ModelKind::gat, ModelKind::gin}) {
      const ModelSpec spec = ModelSpec::standard(kind, 4, 8, 2);
      const TrainHyper h{0.01, 15, 5e-4, 4};
      CHECK(train(spec, g, split, h).params == train(spec, g, split, h).params);
    }
  }
  SUBCASE("early selection keeps the best validation epoch") {
    Rng rng(3);
    const Graph g = random_graph(40, 0.1, 4, rng);
    const NodeSplit split = make_splits(g, {}, 0);
    const ModelSpec spec = ModelSpec::standard(ModelKind::gcn, 4, 8, 2);
    const TrainedModel m = train(spec, g, split, TrainHyper{0.01, 30, 5e-4, 2});
    REQUIRE(m.log.best_epoch >= 0);
    const auto& v = m.log.val_accuracy;
    CHECK(v[m.log.best_epoch] == *std::max_element(v.begin(), v.end()));
    CHECK(accuracy_of(m.logits, g.labels, split.val) == v[m.log.best_epoch]);
  }
  SUBCASE("divergence aborts with the epoch number") {
    Rng rng(3);
    const Graph g = random_graph(20, 0.2, 2, rng);
    const NodeSplit split = make_splits(g, {}, 0);
    const ModelSpec spec = ModelSpec::standard(ModelKind::gcn, 2, 4, 2);
    // An absurd step size overflows the parameters within a few epochs.
    try {
      train(spec, g, split, TrainHyper{1e200, 50, 0.0, 0});
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
      CHECK(e.epoch() >= 1);
      CHECK(std::string(e.what()).find(std::to_string(e.epoch())) != std::string::npos);
    }
  }
  SUBCASE("training nodes must cover two classes") {
    Rng rng(3);
    Graph g = random_graph(20, 0.2, 2, rng);
    std::fill(g.labels.begin(), g.labels.end(), 0);
    const NodeSplit split = make_splits(g, {}, 0);
    CHECK_THROWS(train(ModelSpec::standard(ModelKind::gcn, 2, 4, 2), g, split, TrainHyper{}));
  }
}

TEST_CASE("predict") {
  const Prediction p = predict_from_logits(Tensor::from_rows({{2.0, 2.0}, {0.0, 1.0}}));
  CHECK(p.posteriors(0, 0) == 0.5);
  CHECK(p.posteriors(0, 1) == 0.5);
  CHECK(p.labels == std::vector<int>{0, 1});
  Rng rng(2);
  Tensor logits = random_tensor(50, 4, rng, 5.0);
  const Prediction a = predict_from_logits(logits);
  for (std::size_t r = 0; r < 50; ++r) {
    double s = 0;
    for (double v : a.posteriors.row(r)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
    for (double& v : logits.row(r)) v += 17.25;
  }
  CHECK(predict_from_logits(logits).labels == a.labels);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(3);
  const Graph g = random_graph(30, 0.15, 4, rng);
  const NodeSplit split = make_splits(g, {}, 0);
  const auto path = std::filesystem::temp_directory_path() / "fairgnn_ckpt_test.json";
  for (ModelKind kind : {ModelKind::gcn, ModelKind::gat}) {
    const ModelSpec spec = ModelSpec::standard(kind, 4, 8, 2);
    InterventionParams ip;
    ip.method = Method::ew_flpar;
    ip.alpha = 1.0;
    const TrainedModel m = run_intervention(spec, g, split, TrainHyper{0.01, 5, 5e-4, 1}, ip);
    save_checkpoint(m, path);
    const TrainedModel r = load_checkpoint(path);
    CHECK(r.params == m.params);
    CHECK(r.spec.layer_dims == m.spec.layer_dims);
    CHECK(r.conv_weights.has_value());
    Tape t1, t2;
    CHECK(evaluate_forward(t1, r, g).logits.value() == evaluate_forward(t2, m, g).logits.value());
  }
  {
    const ModelSpec spec = ModelSpec::standard(ModelKind::sage, 4, 8, 2);
    InterventionParams ip;
    ip.method = Method::embed_proj;
    const TrainedModel m = run_intervention(spec, g, split, TrainHyper{0.01, 5, 5e-4, 1}, ip);
    save_checkpoint(m, path);
    const TrainedModel r = load_checkpoint(path);
    Tape t1, t2;
    CHECK(evaluate_forward(t1, r, g).embeddings.value() == evaluate_forward(t2, m, g).embeddings.value());
  }
  std::filesystem::remove(path);
  CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("spec validation") {
  ModelSpec s = ModelSpec::standard(ModelKind::gcn, 4, 8, 2);
  CHECK_NOTHROW(s.validate());
  s.dropout_p = 1.0;
  CHECK_THROWS(s.validate());
  s = ModelSpec::standard(ModelKind::gcn, 4, 8, 2);
  s.layer_dims = {4};
  CHECK_THROWS(s.validate());
  CHECK(parse_model_kind("gat") == ModelKind::gat);
  CHECK_THROWS(parse_model_kind("mlp"));
}
