#pragma once

// Small random instances for gradient checks of every layer kind and every
// intervention loss. Shared by the unit tests and the acceptance binary.

#include <memory>
#include <string>
#include <vector>

#include "fairgnn/interventions.hpp"
#include "fairgnn/mlp.hpp"
#include "fairgnn/models.hpp"
#include "fairgnn/optim.hpp"
#include "fairgnn/rng.hpp"
#include "test_util.hpp"

namespace testutil {

struct GradCase {
  std::string name;
  fairgnn::TracedFn fn;
  std::vector<fairgnn::Tensor> params;
};

/// A random graph with 6..16 nodes and a model whose every tensor is random
/// (heads and filters included, so no gradient is structurally zero).
struct GradInstance {
  fairgnn::Graph graph;
  fairgnn::ModelSpec spec;
  fairgnn::ParameterSet params;
  std::vector<std::size_t> rows;
};

inline GradInstance grad_instance(fairgnn::ModelKind kind, fairgnn::Rng& rng,
                                  fairgnn::Activation act = fairgnn::Activation::tanh) {
  using namespace fairgnn;
  GradInstance inst;
  const std::size_t n = 6 + rng.below(11);
  inst.graph = random_graph(n, 0.25, 3, rng);
  inst.spec = ModelSpec::standard(kind, 3, 4, 2);
  inst.spec.activation = act;
  inst.spec.dropout_p = 0.0;
  inst.spec.gat_heads = 2;
  Rng init = Rng::stream(rng.next_u64(), "init");
  inst.params = init_parameters(inst.spec, init);
  for (Tensor& t : inst.params.tensors())
    for (double& v : t.values()) v = 0.5 * rng.normal();
  for (std::size_t v = 0; v < n; ++v) inst.rows.push_back(v);
  return inst;
}

inline void randomize(fairgnn::ParameterSet& ps, std::size_t from, fairgnn::Rng& rng) {
  for (std::size_t i = from; i < ps.size(); ++i)
    for (double& v : ps.at(i).values()) v = 0.5 * rng.normal();
}

inline fairgnn::BoundParams bound(const fairgnn::ParameterSet& ps, std::span<const fairgnn::Var> vars) {
  return fairgnn::BoundParams{&ps, std::vector<fairgnn::Var>(vars.begin(), vars.end())};
}

/// Cross-entropy of one layer kind.
inline GradCase layer_case(fairgnn::ModelKind kind, fairgnn::Rng& rng,
                           fairgnn::Activation act = fairgnn::Activation::tanh) {
  using namespace fairgnn;
  auto inst = std::make_shared<GradInstance>(grad_instance(kind, rng, act));
  auto prop = std::make_shared<Propagation>(build_propagation(inst->graph, nullptr, kind));
  GradCase c{"layer " + to_string(kind), {}, inst->params.tensors()};
  c.fn = [inst, prop](Tape& tape, std::span<const Var> vars) {
    const ForwardResult out = forward(tape, inst->spec, bound(inst->params, vars), *prop, {},
                                      tape.constant(inst->graph.features), {});
    return ops::cross_entropy(out.logits, inst->graph.labels, inst->rows);
  };
  return c;
}

/// L_cls - alpha L_adv + beta sum |cov| with an MLP adversary on Z, and the
/// adversary's own loss. FairWalk convolution weights when `edge_weighted`.
inline std::vector<GradCase> adv_debias_cases(fairgnn::ModelKind kind, fairgnn::Rng& rng,
                                              bool edge_weighted) {
  using namespace fairgnn;
  auto inst = std::make_shared<GradInstance>(grad_instance(kind, rng));
  std::shared_ptr<Propagation> prop;
  if (edge_weighted) {
    const EdgeWeights w = fairwalk_conv_weights(inst->graph, inst->graph.fairness);
    prop = std::make_shared<Propagation>(build_propagation(inst->graph, &w, kind));
  } else {
    prop = std::make_shared<Propagation>(build_propagation(inst->graph, nullptr, kind));
  }
  const std::size_t first = inst->params.size();
  Mlp adv{"adv", {inst->spec.embedding_dim(), 5, 2}};
  adv.init(inst->params, rng);
  randomize(inst->params, first, rng);
  const double alpha = rng.uniform(0.5, 4.0), beta = rng.uniform(0.01, 1.0);
  const std::string tag = edge_weighted ? "ew_ad " : "adv_debias ";

  GradCase model{tag + "objective " + to_string(kind), {}, inst->params.tensors()};
  model.fn = [=](Tape& tape, std::span<const Var> vars) {
    const ForwardResult out = forward(tape, inst->spec, bound(inst->params, vars), *prop, {},
                                      tape.constant(inst->graph.features), {});
    Var task = ops::cross_entropy(out.logits, inst->graph.labels, inst->rows);
    Var adv_logits = adv.forward(inst->params, vars, out.embeddings);
    Var adv_loss = ops::cross_entropy(adv_logits, inst->graph.fairness, inst->rows);
    return adv_debias_objective(task, adv_loss, adv_logits, out.logits, inst->rows, alpha, beta);
  };
  GradCase adversary{tag + "adversary " + to_string(kind), {}, inst->params.tensors()};
  adversary.fn = [=](Tape& tape, std::span<const Var> vars) {
    const ForwardResult out = forward(tape, inst->spec, bound(inst->params, vars), *prop, {},
                                      tape.constant(inst->graph.features), {});
    return ops::cross_entropy(adv.forward(inst->params, vars, out.embeddings),
                              inst->graph.fairness, inst->rows);
  };
  return {model, adversary};
}

/// Predictor and adversary losses of adversarial fair learning (par and eoo
/// inputs). The projected update itself is checked separately.
inline std::vector<GradCase> fair_learn_cases(fairgnn::ModelKind kind, fairgnn::Rng& rng) {
  using namespace fairgnn;
  auto inst = std::make_shared<GradInstance>(grad_instance(kind, rng));
  auto prop = std::make_shared<Propagation>(build_propagation(inst->graph, nullptr, kind));
  const std::size_t first = inst->params.size();
  Mlp par{"par", {2, 5, 1}}, eoo{"eoo", {4, 5, 1}};
  par.init(inst->params, rng);
  eoo.init(inst->params, rng);
  randomize(inst->params, first, rng);
  auto targets = std::make_shared<std::vector<double>>();
  auto onehot = std::make_shared<Tensor>(inst->graph.n_nodes, 2);
  for (std::size_t v = 0; v < inst->graph.n_nodes; ++v) {
    targets->push_back(inst->graph.fairness[v] == 1 ? 1.0 : 0.0);
    (*onehot)(v, static_cast<std::size_t>(inst->graph.labels[v])) = 1.0;
  }
  std::vector<GradCase> out;
  for (const bool eoo_mode : {false, true}) {
    GradCase c{std::string("fair_learn adversary ") + (eoo_mode ? "eoo " : "par ") + to_string(kind),
               {},
               inst->params.tensors()};
    c.fn = [=](Tape& tape, std::span<const Var> vars) {
      const ForwardResult f = forward(tape, inst->spec, bound(inst->params, vars), *prop, {},
                                      tape.constant(inst->graph.features), {});
      Var input = f.logits;
      if (eoo_mode) {
        const Var parts[] = {f.logits, tape.constant(*onehot)};
        input = ops::concat_cols(parts);
      }
      const Mlp& net = eoo_mode ? eoo : par;
      Var adv_loss = ops::binary_cross_entropy(net.forward(inst->params, vars, input), *targets, inst->rows);
      Var task = ops::cross_entropy(f.logits, inst->graph.labels, inst->rows);
      return ops::add(task, adv_loss);
    };
    out.push_back(std::move(c));
  }
  return out;
}

/// L_cls - lambda sum_a L_{D_a} through two composed residual filters.
inline GradCase filter_case(fairgnn::ModelKind kind, fairgnn::Rng& rng) {
  using namespace fairgnn;
  auto inst = std::make_shared<GradInstance>(grad_instance(kind, rng));
  auto prop = std::make_shared<Propagation>(build_propagation(inst->graph, nullptr, kind));
  const std::size_t first = inst->params.size();
  auto transform = std::make_shared<EmbeddingTransform>();
  transform->kind = EmbeddingTransform::Kind::filter;
  Rng frng = Rng::stream(rng.next_u64(), "filter");
  for (const char* name : {"fairness", "privacy"}) {
    add_filter_parameters(inst->params, name, inst->spec.embedding_dim(), 5, false, frng);
    transform->filter_names.push_back(name);
  }
  Mlp d_fair{"disc.fairness", {inst->spec.embedding_dim(), 5, 2}};
  Mlp d_priv{"disc.privacy", {inst->spec.embedding_dim(), 5, 2}};
  d_fair.init(inst->params, rng);
  d_priv.init(inst->params, rng);
  randomize(inst->params, first, rng);
  const double lambda = rng.uniform(0.1, 2.0);
  GradCase c{"filter objective " + to_string(kind), {}, inst->params.tensors()};
  c.fn = [=](Tape& tape, std::span<const Var> vars) {
    const ForwardResult f = forward(tape, inst->spec, bound(inst->params, vars), *prop, *transform,
                                    tape.constant(inst->graph.features), {});
    Var task = ops::cross_entropy(f.logits, inst->graph.labels, inst->rows);
    const Var losses[] = {
        ops::cross_entropy(d_fair.forward(inst->params, vars, f.embeddings), inst->graph.fairness,
                           inst->rows),
        ops::cross_entropy(d_priv.forward(inst->params, vars, f.embeddings), inst->graph.privacy,
                           inst->rows)};
    return filter_objective(task, losses, lambda);
  };
  return c;
}

/// Cross-entropy through the orthogonal projection of embed_proj.
inline GradCase embed_proj_case(fairgnn::ModelKind kind, fairgnn::Rng& rng) {
  using namespace fairgnn;
  auto inst = std::make_shared<GradInstance>(grad_instance(kind, rng));
  auto prop = std::make_shared<Propagation>(build_propagation(inst->graph, nullptr, kind));
  auto transform = std::make_shared<EmbeddingTransform>();
  transform->kind = EmbeddingTransform::Kind::projection;
  transform->basis = std::make_shared<const Tensor>(sensitive_basis(inst->graph.fairness));
  GradCase c{"embed_proj loss " + to_string(kind), {}, inst->params.tensors()};
  c.fn = [=](Tape& tape, std::span<const Var> vars) {
    const ForwardResult f = forward(tape, inst->spec, bound(inst->params, vars), *prop, *transform,
                                    tape.constant(inst->graph.features), {});
    return ops::cross_entropy(f.logits, inst->graph.labels, inst->rows);
  };
  return c;
}

/// `trials` instances of every intervention loss, cycling through layer kinds.
inline std::vector<GradCase> intervention_cases(int trials, fairgnn::Rng& rng) {
  using fairgnn::ModelKind;
  const ModelKind kinds[] = {ModelKind::gcn, ModelKind::sage, ModelKind::gat, ModelKind::gin};
  std::vector<GradCase> out;
  for (int t = 0; t < trials; ++t) {
    const ModelKind kind = kinds[t % 4];
    for (auto& c : adv_debias_cases(kind, rng, false)) out.push_back(std::move(c));
    for (auto& c : adv_debias_cases(kind, rng, true)) out.push_back(std::move(c));
    for (auto& c : fair_learn_cases(kind, rng)) out.push_back(std::move(c));
    out.push_back(filter_case(kind, rng));
    out.push_back(embed_proj_case(kind, rng));
  }
  return out;
}

}  // namespace testutil
