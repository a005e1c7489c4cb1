#include "fairgnn/interventions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "fairgnn/error.hpp"
#include "fairgnn/mlp.hpp"
#include "fairgnn/rng.hpp"

namespace fairgnn {

std::string to_string(Method m) {
  switch (m) {
    case Method::none: return "none";
    case Method::adv_debias: return "adv_debias";
    case Method::embed_proj: return "embed_proj";
    case Method::edge_weight: return "edge_weight";
    case Method::filter: return "filter";
    case Method::fair_learn: return "fair_learn";
    case Method::ew_ad: return "ew_ad";
    case Method::ew_flpar: return "ew_flpar";
  }
  return "none";
}

Method parse_method(const std::string& text) {
  for (Method m : {Method::none, Method::adv_debias, Method::embed_proj, Method::edge_weight,
                   Method::filter, Method::fair_learn, Method::ew_ad, Method::ew_flpar})
    if (to_string(m) == text) return m;
  throw Error("unknown method '" + text + "'");
}

std::string to_string(FairMode m) { return m == FairMode::par ? "par" : "eoo"; }

FairMode parse_fair_mode(const std::string& text) {
  if (text == "par") return FairMode::par;
  if (text == "eoo") return FairMode::eoo;
  throw Error("unknown fair mode '" + text + "' (expected par or eoo)");
}

void InterventionParams::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw Error(std::string("intervention ") + name + " must be finite and >= 0");
  };
  check(alpha, "alpha");
  check(beta, "beta");
  check(lambda, "lambda");
}

EdgeWeights fairwalk_weights(const Graph& graph, const std::vector<int>& groups) {
  const SparseMatrix& a = graph.adjacency;
  if (groups.size() != graph.n_nodes) throw Error("fairwalk_weights: group vector size mismatch");
  EdgeWeights w{std::vector<double>(a.nnz(), 0.0)};
  std::map<int, std::size_t> counts;
  for (std::size_t v = 0; v < graph.n_nodes; ++v) {
    counts.clear();
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k) ++counts[groups[a.indices()[k]]];
    const double n_present = static_cast<double>(counts.size());
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k) {
      const double size = static_cast<double>(counts[groups[a.indices()[k]]]);
      w.values[k] = 1.0 / (n_present * size);
    }
  }
  return w;
}

EdgeWeights fairwalk_conv_weights(const Graph& graph, const std::vector<int>& groups) {
  const SparseMatrix& a = graph.adjacency;
  if (groups.size() != graph.n_nodes) throw Error("fairwalk_conv_weights: group vector size mismatch");
  EdgeWeights w{std::vector<double>(a.nnz(), 0.0)};
  std::map<int, std::size_t> counts;
  for (std::size_t v = 0; v < graph.n_nodes; ++v) {
    counts.clear();
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k) ++counts[groups[a.indices()[k]]];
    const double deg = static_cast<double>(a.row_end(v) - a.row_begin(v));
    const double n_present = static_cast<double>(counts.size());
    for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k) {
      const double size = static_cast<double>(counts[groups[a.indices()[k]]]);
      // deg / (|G| * size) is exactly 1 when one group covers every neighbor.
      w.values[k] = deg / (n_present * size);
    }
  }
  return w;
}

Tensor sensitive_basis(const std::vector<int>& groups) {
  const std::size_t n = groups.size();
  int k = 0;
  for (int g : groups) k = std::max(k, g + 1);
  std::vector<std::vector<double>> basis;
  for (int g = 0; g < k; ++g) {
    std::vector<double> col(n, 0.0);
    std::size_t members = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (groups[i] == g) {
        col[i] = 1.0;
        ++members;
      }
    if (members == 0) continue;
    const double mean = static_cast<double>(members) / static_cast<double>(n);
    double norm0 = 0.0;
    for (double& x : col) {
      x -= mean;
      norm0 += x * x;
    }
    norm0 = std::sqrt(norm0);
    if (norm0 == 0.0) continue;
    for (double& x : col) x /= norm0;
    // Two passes of modified Gram-Schmidt keep the basis orthogonal to
    // rounding level.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : basis) {
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d += q[i] * col[i];
        for (std::size_t i = 0; i < n; ++i) col[i] -= d * q[i];
      }
    }
    double norm = 0.0;
    for (double x : col) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : col) x /= norm;
    basis.push_back(std::move(col));
  }
  Tensor s(n, basis.size());
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) s(i, j) = basis[j][i];
  return s;
}

Tensor project_embeddings(const Tensor& z, const std::vector<int>& groups) {
  if (groups.size() != z.rows()) throw ShapeError("project_embeddings: group count != rows of Z");
  Tape tape;
  auto basis = std::make_shared<const Tensor>(sensitive_basis(groups));
  return ops::project_out(tape.constant(z), basis).value();
}

Tensor project_onto(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw ShapeError("project_onto: " + a.shape_string() + " vs " + b.shape_string());
  double dot = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    nb += b[k] * b[k];
  }
  Tensor out(a.rows(), a.cols());
  if (nb == 0.0) return out;
  const double c = dot / nb;
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = c * b[k];
  return out;
}

Tensor fair_learn_gradient(const Tensor& g_pred, const Tensor& g_adv, double alpha) {
  Tensor out = g_pred;
  const Tensor p = project_onto(g_pred, g_adv);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = out[k] - p[k] - alpha * g_adv[k];
  return out;
}

Var adv_debias_objective(Var task_loss, Var adv_loss, Var adv_logits, Var task_logits,
                         std::span<const std::size_t> rows, double alpha, double beta) {
  Var obj = task_loss;
  if (alpha != 0.0) obj = ops::sub(obj, ops::scale(adv_loss, alpha));
  if (beta != 0.0) {
    Var s_hat = ops::row_softmax(adv_logits);
    Var y_hat = ops::row_softmax(task_logits);
    std::vector<Var> terms;
    for (std::size_t g = 1; g < s_hat.cols(); ++g)
      for (std::size_t c = 1; c < y_hat.cols(); ++c)
        terms.push_back(ops::abs(
            ops::covariance(ops::select_col(s_hat, g), ops::select_col(y_hat, c), rows)));
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ops::add(total, terms[i]);
    obj = ops::add(obj, ops::scale(total, beta));
  }
  return obj;
}

Var filter_objective(Var task_loss, std::span<const Var> discriminator_losses, double lambda) {
  if (lambda == 0.0 || discriminator_losses.empty()) return task_loss;
  Var total = discriminator_losses.front();
  for (std::size_t i = 1; i < discriminator_losses.size(); ++i)
    total = ops::add(total, discriminator_losses[i]);
  return ops::sub(task_loss, ops::scale(total, lambda));
}

namespace {

std::vector<std::size_t> nodes_with_attribute(std::span<const std::size_t> nodes,
                                              const std::vector<int>& attr) {
  std::vector<std::size_t> out;
  for (std::size_t v : nodes)
    if (attr[v] >= 0) out.push_back(v);
  return out;
}

int count_groups(const std::vector<int>& attr, std::span<const std::size_t> nodes) {
  int k = 0;
  for (std::size_t v : nodes) k = std::max(k, attr[v] + 1);
  return k;
}

double accuracy_from_logits(const Tensor& logits, const std::vector<int>& target,
                            std::span<const std::size_t> nodes) {
  return nodes.empty() ? 0.0 : accuracy_of(logits, target, nodes);
}

TrainSetup setup_for(const ModelSpec& spec, const TrainHyper& hyper, const EdgeWeights* weights) {
  TrainSetup s = baseline_setup(spec, hyper.seed);
  if (weights) s.conv_weights = *weights;
  return s;
}

std::string role_name(AttributeRole r) {
  switch (r) {
    case AttributeRole::label: return "label";
    case AttributeRole::fairness: return "fairness";
    case AttributeRole::privacy: return "privacy";
  }
  return "attr";
}

}  // namespace

TrainedModel embed_proj_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, const EdgeWeights* weights,
                              const std::function<void(EpochContext&)>& observe) {
  TrainSetup setup = setup_for(spec, hyper, weights);
  setup.transform.kind = EmbeddingTransform::Kind::projection;
  setup.transform.basis = std::make_shared<const Tensor>(sensitive_basis(graph.fairness));
  TrainingHooks hooks;
  hooks.observe = observe;
  return train_with_hooks(std::move(setup), graph, split, hyper, hooks);
}

TrainedModel edge_weight_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                               const TrainHyper& hyper) {
  const EdgeWeights w = fairwalk_conv_weights(graph, graph.fairness);
  return train(spec, graph, split, hyper, &w);
}

TrainedModel adv_debias_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, double alpha, double beta,
                              const EdgeWeights* weights, AdversaryOptions options,
                              AdversaryReport* report) {
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw Error("adv_debias: alpha and beta must be >= 0");
  const std::vector<std::size_t> rows = nodes_with_attribute(split.train, graph.fairness);
  const int n_groups = count_groups(graph.fairness, rows);
  if (n_groups < 2) throw Error("adv_debias: fairness attribute has fewer than 2 groups on train nodes");

  TrainSetup setup = setup_for(spec, hyper, weights);
  if (options.freeze_model) setup.frozen = setup.params.names();
  Rng rng = Rng::stream(hyper.seed, "adversary");
  MlpTrainer adversary(
      Mlp{"adv", {spec.embedding_dim(), options.hidden, static_cast<std::size_t>(n_groups)}}, rng,
      options.lr > 0.0 ? options.lr : hyper.lr, options.zero_init);

  Var adv_loss;
  TrainingHooks hooks;
  hooks.objective = [&](EpochContext& ctx) {
    Var logits = adversary.forward(ctx.tape, ctx.out.embeddings);
    adv_loss = ops::cross_entropy(logits, graph.fairness, rows);
    return adv_debias_objective(ctx.task_loss, adv_loss, logits, ctx.out.logits, rows, alpha, beta);
  };
  hooks.auxiliary_step = [&](EpochContext& ctx) {
    ctx.tape.backward(adv_loss);
    adversary.step(ctx.tape);
  };
  TrainedModel model = train_with_hooks(std::move(setup), graph, split, hyper, hooks);
  if (report) {
    Tape tape;
    Var logits = adversary.forward(tape, tape.constant(model.embeddings));
    report->test_accuracy = {accuracy_from_logits(
        logits.value(), graph.fairness, nodes_with_attribute(split.test, graph.fairness))};
  }
  return model;
}

TrainedModel fair_learn_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, double alpha, FairMode mode,
                              const EdgeWeights* weights, AdversaryOptions options) {
  if (!(alpha >= 0.0)) throw Error("fair_learn: alpha must be >= 0");
  std::vector<std::size_t> rows = nodes_with_attribute(split.train, graph.fairness);
  if (mode == FairMode::eoo) {
    std::erase_if(rows, [&](std::size_t v) { return graph.labels[v] != 1; });
    if (rows.empty()) throw Error("fair_learn eoo: no positive-class train nodes");
  }
  const int n_groups = count_groups(graph.fairness, nodes_with_attribute(split.train, graph.fairness));
  if (n_groups < 2) throw Error("fair_learn: fairness attribute has fewer than 2 groups on train nodes");

  // Binary attribute: one adversary for group 1. Otherwise one-vs-rest.
  std::vector<int> targets_of;
  if (n_groups == 2) targets_of = {1};
  else
    for (int g = 0; g < n_groups; ++g) targets_of.push_back(g);
  std::vector<std::vector<double>> targets;
  for (int g : targets_of) {
    std::vector<double> t(graph.n_nodes, 0.0);
    for (std::size_t v = 0; v < graph.n_nodes; ++v) t[v] = graph.fairness[v] == g ? 1.0 : 0.0;
    targets.push_back(std::move(t));
  }

  const std::size_t c = static_cast<std::size_t>(spec.n_classes);
  const std::size_t in_dim = mode == FairMode::par ? c : 2 * c;
  Tensor label_onehot(graph.n_nodes, c);
  for (std::size_t v = 0; v < graph.n_nodes; ++v)
    if (graph.labels[v] >= 0) label_onehot(v, static_cast<std::size_t>(graph.labels[v])) = 1.0;

  Rng rng = Rng::stream(hyper.seed, "adversary");
  std::vector<MlpTrainer> adversaries;
  for (std::size_t j = 0; j < targets.size(); ++j)
    adversaries.emplace_back(Mlp{"adv" + std::to_string(j), {in_dim, options.hidden, 1}}, rng,
                             options.lr > 0.0 ? options.lr : hyper.lr, options.zero_init);

  TrainSetup setup = setup_for(spec, hyper, weights);
  if (options.freeze_model) setup.frozen = setup.params.names();
  std::vector<Var> losses;
  TrainingHooks hooks;
  hooks.objective = [&](EpochContext& ctx) {
    Var input = ctx.out.logits;
    if (mode == FairMode::eoo) {
      const Var parts[] = {ctx.out.logits, ctx.tape.constant(label_onehot)};
      input = ops::concat_cols(parts);
    }
    losses.clear();
    for (std::size_t j = 0; j < adversaries.size(); ++j)
      losses.push_back(
          ops::binary_cross_entropy(adversaries[j].forward(ctx.tape, input), targets[j], rows));
    return ctx.task_loss;
  };
  hooks.adjust_gradients = [&](EpochContext& ctx, std::vector<Tensor>& grads) {
    // The most successful adversary (lowest loss) sets the penalty.
    std::size_t active = 0;
    for (std::size_t j = 1; j < losses.size(); ++j)
      if (losses[j].value()[0] < losses[active].value()[0]) active = j;
    ctx.tape.backward(losses[active]);
    const std::vector<Tensor> g_adv = collect_grads(ctx.tape, ctx.trainable);
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] = fair_learn_gradient(grads[i], g_adv[i], alpha);
  };
  hooks.auxiliary_step = [&](EpochContext& ctx) {
    for (std::size_t j = 0; j < adversaries.size(); ++j) {
      ctx.tape.backward(losses[j]);
      adversaries[j].step(ctx.tape);
    }
  };
  return train_with_hooks(std::move(setup), graph, split, hyper, hooks);
}

TrainedModel filter_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                          const TrainHyper& hyper, double lambda,
                          std::span<const AttributeRole> attrs, FilterOptions options,
                          AdversaryReport* report) {
  if (!(lambda >= 0.0)) throw Error("filter: lambda must be >= 0");
  if (attrs.empty()) throw Error("filter: at least one attribute required");
  TrainSetup setup = baseline_setup(spec, hyper.seed);
  Rng filter_rng = Rng::stream(hyper.seed, "filter");
  Rng disc_rng = Rng::stream(hyper.seed, "discriminator");
  setup.transform.kind = EmbeddingTransform::Kind::filter;

  struct Disc {
    const std::vector<int>* attr;
    std::vector<std::size_t> rows;
    MlpTrainer net;
  };
  std::vector<Disc> discs;
  for (AttributeRole role : attrs) {
    const std::string name = role_name(role);
    const std::vector<int>& attr = graph.attribute(role);
    if (attr.size() != graph.n_nodes) throw Error("filter: graph has no " + name + " attribute");
    std::vector<std::size_t> rows = nodes_with_attribute(split.train, attr);
    const int k = count_groups(attr, rows);
    if (k < 2) throw Error("filter: " + name + " attribute has fewer than 2 groups on train nodes");
    add_filter_parameters(setup.params, name, spec.embedding_dim(), options.hidden,
                          options.all_zero, filter_rng);
    setup.transform.filter_names.push_back(name);
    discs.push_back(Disc{&attr, std::move(rows),
                         MlpTrainer(Mlp{"disc." + name,
                                        {spec.embedding_dim(), options.discriminator_hidden,
                                         static_cast<std::size_t>(k)}},
                                    disc_rng, hyper.lr)});
  }

  std::vector<Var> losses;
  TrainingHooks hooks;
  hooks.objective = [&](EpochContext& ctx) {
    losses.clear();
    for (Disc& d : discs)
      losses.push_back(ops::cross_entropy(d.net.forward(ctx.tape, ctx.out.embeddings), *d.attr, d.rows));
    return filter_objective(ctx.task_loss, losses, lambda);
  };
  hooks.auxiliary_step = [&](EpochContext& ctx) {
    for (std::size_t i = 0; i < discs.size(); ++i) {
      ctx.tape.backward(losses[i]);
      discs[i].net.step(ctx.tape);
    }
  };
  TrainedModel model = train_with_hooks(std::move(setup), graph, split, hyper, hooks);
  if (report) {
    report->test_accuracy.clear();
    for (Disc& d : discs) {
      Tape tape;
      Var logits = d.net.forward(tape, tape.constant(model.embeddings));
      report->test_accuracy.push_back(
          accuracy_from_logits(logits.value(), *d.attr, nodes_with_attribute(split.test, *d.attr)));
    }
  }
  return model;
}

TrainedModel run_intervention(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, const InterventionParams& params) {
  params.validate();
  switch (params.method) {
    case Method::none: return train(spec, graph, split, hyper);
    case Method::adv_debias:
      return adv_debias_train(spec, graph, split, hyper, params.alpha, params.beta);
    case Method::embed_proj: return embed_proj_train(spec, graph, split, hyper);
    case Method::edge_weight: return edge_weight_train(spec, graph, split, hyper);
    case Method::filter: {
      std::vector<AttributeRole> attrs{AttributeRole::fairness};
      if (graph.privacy.size() == graph.n_nodes &&
          count_groups(graph.privacy, nodes_with_attribute(split.train, graph.privacy)) >= 2)
        attrs.push_back(AttributeRole::privacy);
      return filter_train(spec, graph, split, hyper, params.lambda, attrs);
    }
    case Method::fair_learn:
      return fair_learn_train(spec, graph, split, hyper, params.alpha, params.mode);
    case Method::ew_ad: {
      const EdgeWeights w = fairwalk_conv_weights(graph, graph.fairness);
      return adv_debias_train(spec, graph, split, hyper, params.alpha, params.beta, &w);
    }
    case Method::ew_flpar: {
      const EdgeWeights w = fairwalk_conv_weights(graph, graph.fairness);
      return fair_learn_train(spec, graph, split, hyper, params.alpha, FairMode::par, &w);
    }
  }
  throw Error("unhandled method");
}

}  // namespace fairgnn
