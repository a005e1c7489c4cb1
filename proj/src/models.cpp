#include "fairgnn/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fairgnn/error.hpp"
#include "fairgnn/rng.hpp"

namespace fairgnn {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gcn: return "gcn";
    case ModelKind::sage: return "sage";
    case ModelKind::gat: return "gat";
    case ModelKind::gin: return "gin";
  }
  return "gcn";
}

ModelKind parse_model_kind(const std::string& text) {
  if (text == "gcn") return ModelKind::gcn;
  if (text == "sage") return ModelKind::sage;
  if (text == "gat") return ModelKind::gat;
  if (text == "gin") return ModelKind::gin;
  throw Error("unknown model kind '" + text + "' (expected gcn, sage, gat or gin)");
}

namespace {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw Error("unknown activation '" + s + "'");
}

Var activate(Activation a, Var x) {
  switch (a) {
    case Activation::relu: return ops::relu(x);
    case Activation::tanh: return ops::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

std::string layer(std::size_t l) { return "l" + std::to_string(l); }

// Input width of layer l (GAT hidden layers concatenate heads).
std::size_t layer_input_dim(const ModelSpec& spec, std::size_t l) {
  if (l == 0 || spec.kind != ModelKind::gat) return spec.layer_dims[l];
  return spec.layer_dims[l] * static_cast<std::size_t>(spec.gat_heads);
}

bool is_last(const ModelSpec& spec, std::size_t l) { return l + 1 == spec.n_layers(); }

}  // namespace

void ModelSpec::validate() const {
  if (layer_dims.size() < 2) throw Error("model spec: need an input dim and at least one hidden layer");
  for (std::size_t d : layer_dims)
    if (d == 0) throw Error("model spec: layer dims must be positive");
  if (n_classes < 2) throw Error("model spec: n_classes must be >= 2");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error("model spec: dropout_p must be in [0,1)");
  if (kind == ModelKind::gat && gat_heads < 1) throw Error("model spec: gat_heads must be >= 1");
}

ModelSpec ModelSpec::standard(ModelKind kind, std::size_t input_dim, std::size_t hidden,
                              int n_classes) {
  ModelSpec s;
  s.kind = kind;
  s.layer_dims = {input_dim, hidden, hidden};
  s.n_classes = n_classes;
  return s;
}

SparseMatrix normalize_adjacency(const Graph& graph, const EdgeWeights* weights,
                                 NormalizationMode mode) {
  const SparseMatrix& a = graph.adjacency;
  const std::size_t n = graph.n_nodes;
  if (weights && weights->values.size() != a.nnz())
    throw Error("normalize_adjacency: weights not aligned with adjacency (" +
                std::to_string(weights->values.size()) + " vs " + std::to_string(a.nnz()) + ")");
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> indices;
  std::vector<double> values;
  indices.reserve(a.nnz() + n);
  values.reserve(a.nnz() + n);
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t b = a.row_begin(v), e = a.row_end(v);
    double self = 1.0;
    if (weights && e > b) {
      double s = 0.0;
      for (std::size_t k = b; k < e; ++k) s += weights->values[k];
      self = s / static_cast<double>(e - b);
    }
    bool placed = false;
    for (std::size_t k = b; k <= e; ++k) {
      if (!placed && (k == e || a.indices()[k] > v)) {
        indices.push_back(v);
        values.push_back(self);
        placed = true;
      }
      if (k == e) break;
      indices.push_back(a.indices()[k]);
      values.push_back(weights ? weights->values[k] : 1.0);
    }
    offsets[v + 1] = indices.size();
  }
  SparseMatrix m(n, n, std::move(offsets), std::move(indices), std::move(values));
  const auto deg = m.row_sums();
  for (double d : deg)
    if (!(d > 0.0)) throw Error("normalize_adjacency: zero weighted degree");
  std::vector<double> out = m.values();
  if (mode == NormalizationMode::sym) {
    std::vector<double> inv_sqrt(n);
    for (std::size_t v = 0; v < n; ++v) inv_sqrt[v] = 1.0 / std::sqrt(deg[v]);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = m.row_begin(v); k < m.row_end(v); ++k)
        out[k] = inv_sqrt[v] * out[k] * inv_sqrt[m.indices()[k]];
  } else {
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t k = m.row_begin(v); k < m.row_end(v); ++k) out[k] /= deg[v];
  }
  return m.with_values(std::move(out));
}

Propagation build_propagation(const Graph& graph, const EdgeWeights* weights, ModelKind kind) {
  Propagation p;
  const SparseMatrix& a = graph.adjacency;
  const SparseMatrix weighted = weights ? a.with_values(weights->values) : a;
  switch (kind) {
    case ModelKind::gcn:
      p.gcn = std::make_shared<const SparseMatrix>(
          normalize_adjacency(graph, weights, NormalizationMode::sym));
      break;
    case ModelKind::sage: {
      std::vector<double> vals = weighted.values();
      const auto sums = weighted.row_sums();
      for (std::size_t v = 0; v < a.rows(); ++v)
        for (std::size_t k = a.row_begin(v); k < a.row_end(v); ++k) vals[k] /= sums[v];
      p.neighbor_mean = std::make_shared<const SparseMatrix>(a.with_values(std::move(vals)));
      break;
    }
    case ModelKind::gin:
      p.neighbor_sum = std::make_shared<const SparseMatrix>(weighted);
      break;
    case ModelKind::gat: {
      // Pattern of A + I; the row-normalized matrix carries the raw weights'
      // sparsity and self-loops, so reuse its structure and recompute weights.
      SparseMatrix pattern = normalize_adjacency(graph, weights, NormalizationMode::row);
      std::vector<double> logw(pattern.nnz(), 0.0);
      bool any = false;
      if (weights) {
        for (std::size_t v = 0; v < a.rows(); ++v) {
          const std::size_t b = a.row_begin(v), e = a.row_end(v);
          double self = 1.0;
          if (e > b) {
            double s = 0.0;
            for (std::size_t k = b; k < e; ++k) s += weights->values[k];
            self = s / static_cast<double>(e - b);
          }
          std::size_t src = b;
          for (std::size_t k = pattern.row_begin(v); k < pattern.row_end(v); ++k) {
            const double w = pattern.indices()[k] == v ? self : weights->values[src++];
            logw[k] = std::log(w);
            if (logw[k] != 0.0) any = true;
          }
        }
      }
      std::vector<double> ones(pattern.nnz(), 1.0);
      p.attention_pattern = std::make_shared<const SparseMatrix>(pattern.with_values(std::move(ones)));
      if (any) p.attention_log_weights = std::move(logw);
      break;
    }
  }
  return p;
}

ParameterSet init_parameters(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  ParameterSet ps;
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const std::size_t din = layer_input_dim(spec, l);
    const std::size_t dout = spec.layer_dims[l + 1];
    const std::string p = layer(l);
    switch (spec.kind) {
      case ModelKind::gcn:
        ps.add(p + ".W", glorot(din, dout, rng));
        ps.add(p + ".b", Tensor(1, dout));
        break;
      case ModelKind::sage:
        ps.add(p + ".W", glorot(2 * din, dout, rng));
        ps.add(p + ".b", Tensor(1, dout));
        break;
      case ModelKind::gat: {
        for (int h = 0; h < spec.gat_heads; ++h) {
          const std::string hp = p + ".h" + std::to_string(h);
          ps.add(hp + ".W", glorot(din, dout, rng));
          ps.add(hp + ".a_dst", glorot(dout, 1, rng));
          ps.add(hp + ".a_src", glorot(dout, 1, rng));
        }
        const std::size_t width =
            is_last(spec, l) ? dout : dout * static_cast<std::size_t>(spec.gat_heads);
        ps.add(p + ".b", Tensor(1, width));
        break;
      }
      case ModelKind::gin:
        ps.add(p + ".eps", Tensor(1, 1, spec.gin_eps));
        ps.add(p + ".W1", glorot(din, dout, rng));
        ps.add(p + ".b1", Tensor(1, dout));
        ps.add(p + ".W2", glorot(dout, dout, rng));
        ps.add(p + ".b2", Tensor(1, dout));
        break;
    }
  }
  const std::size_t c = static_cast<std::size_t>(spec.n_classes);
  ps.add("head.W", glorot(spec.embedding_dim(), c, rng));
  ps.add("head.b", Tensor(1, c));
  return ps;
}

void add_filter_parameters(ParameterSet& params, const std::string& name, std::size_t dim,
                           std::size_t hidden, bool all_zero, Rng& rng) {
  const std::string p = "filter." + name;
  params.add(p + ".W1", all_zero ? Tensor(dim, hidden) : glorot(dim, hidden, rng));
  params.add(p + ".b1", Tensor(1, hidden));
  params.add(p + ".W2", Tensor(hidden, dim));
}

std::vector<Tensor> draw_dropout_masks(const ModelSpec& spec, std::size_t n_nodes, Rng& rng) {
  std::vector<Tensor> masks;
  if (spec.dropout_p <= 0.0) return masks;
  const double keep = 1.0 / (1.0 - spec.dropout_p);
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    Tensor m(n_nodes, layer_input_dim(spec, l));
    for (double& v : m.values()) v = rng.uniform() < spec.dropout_p ? 0.0 : keep;
    masks.push_back(std::move(m));
  }
  return masks;
}

Var encode(Tape& tape, const ModelSpec& spec, const BoundParams& params, const Propagation& prop,
           Var features, std::span<const Tensor> masks) {
  Var h = features;
  if (features.cols() != spec.layer_dims.front()) {
    throw ShapeError("forward: feature dim " + std::to_string(features.cols()) +
                     " does not match spec input dim " + std::to_string(spec.layer_dims.front()));
  }
  for (std::size_t l = 0; l < spec.n_layers(); ++l) {
    const std::string p = layer(l);
    if (!masks.empty()) h = ops::dropout(h, masks[l]);
    Var pre;
    switch (spec.kind) {
      case ModelKind::gcn: {
        Var hw = ops::matmul(h, params[p + ".W"]);
        pre = ops::add_bias(ops::spmm(prop.gcn, hw), params[p + ".b"]);
        break;
      }
      case ModelKind::sage: {
        Var mean = ops::spmm(prop.neighbor_mean, h);
        const Var parts[] = {h, mean};
        pre = ops::add_bias(ops::matmul(ops::concat_cols(parts), params[p + ".W"]),
                            params[p + ".b"]);
        break;
      }
      case ModelKind::gat: {
        std::vector<Var> heads;
        for (int k = 0; k < spec.gat_heads; ++k) {
          const std::string hp = p + ".h" + std::to_string(k);
          Var wh = ops::matmul(h, params[hp + ".W"]);
          Var sd = ops::matmul(wh, params[hp + ".a_dst"]);
          Var ss = ops::matmul(wh, params[hp + ".a_src"]);
          Var e = ops::leaky_relu(ops::edge_scores(prop.attention_pattern, sd, ss), 0.2);
          if (!prop.attention_log_weights.empty()) {
            Tensor lw(prop.attention_log_weights.size(), 1, prop.attention_log_weights);
            e = ops::add(e, tape.constant(std::move(lw)));
          }
          Var alpha = ops::masked_row_softmax(prop.attention_pattern, e);
          heads.push_back(ops::spmm_edges(prop.attention_pattern, alpha, wh));
        }
        Var merged = is_last(spec, l) ? ops::average(heads) : ops::concat_cols(heads);
        pre = ops::add_bias(merged, params[p + ".b"]);
        break;
      }
      case ModelKind::gin: {
        Var agg = ops::spmm(prop.neighbor_sum, h);
        Var self = ops::add(h, ops::mul_scalar(h, params[p + ".eps"]));
        Var x = ops::add(self, agg);
        Var hidden = ops::relu(ops::add_bias(ops::matmul(x, params[p + ".W1"]), params[p + ".b1"]));
        pre = ops::add_bias(ops::matmul(hidden, params[p + ".W2"]), params[p + ".b2"]);
        break;
      }
    }
    h = activate(spec.activation, pre);
  }
  return h;
}

Var apply_transform(const EmbeddingTransform& transform, const BoundParams& params, Var z) {
  switch (transform.kind) {
    case EmbeddingTransform::Kind::identity: return z;
    case EmbeddingTransform::Kind::projection: return ops::project_out(z, transform.basis);
    case EmbeddingTransform::Kind::filter: {
      for (const auto& name : transform.filter_names) {
        const std::string p = "filter." + name;
        Var hidden = ops::relu(ops::add_bias(ops::matmul(z, params[p + ".W1"]), params[p + ".b1"]));
        z = ops::add(z, ops::matmul(hidden, params[p + ".W2"]));
      }
      return z;
    }
  }
  return z;
}

ForwardResult forward(Tape& tape, const ModelSpec& spec, const BoundParams& params,
                      const Propagation& prop, const EmbeddingTransform& transform, Var features,
                      std::span<const Tensor> masks) {
  Var z = apply_transform(transform, params, encode(tape, spec, params, prop, features, masks));
  Var logits = ops::add_bias(ops::matmul(z, params["head.W"]), params["head.b"]);
  return {z, logits};
}

Prediction predict_from_logits(const Tensor& logits) {
  Prediction p;
  p.posteriors = softmax_rows(logits);
  p.labels.resize(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    p.labels[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return p;
}

double accuracy_of(const Tensor& logits, const std::vector<int>& labels,
                   std::span<const std::size_t> nodes) {
  if (nodes.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t v : nodes) {
    auto row = logits.row(v);
    const int pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (pred == labels[v]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

TrainSetup baseline_setup(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "init");
  TrainSetup s;
  s.spec = spec;
  s.params = init_parameters(spec, rng);
  return s;
}

TrainedModel train_with_hooks(TrainSetup setup, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, const TrainingHooks& hooks) {
  const ModelSpec& spec = setup.spec;
  spec.validate();
  if (graph.features.cols() != spec.layer_dims.front())
    throw ShapeError("train: feature dim " + std::to_string(graph.features.cols()) +
                     " does not match spec input dim " + std::to_string(spec.layer_dims.front()));
  if (split.train.empty()) throw Error("train: empty training split");
  {
    std::set<int> classes;
    for (std::size_t v : split.train) classes.insert(graph.labels[v]);
    if (classes.size() < 2) throw Error("train: training nodes cover fewer than 2 classes");
  }
  const Propagation prop =
      build_propagation(graph, setup.conv_weights ? &*setup.conv_weights : nullptr, spec.kind);
  Rng dropout_rng = Rng::stream(hyper.seed, "dropout");

  ParameterSet params = std::move(setup.params);
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (std::find(setup.frozen.begin(), setup.frozen.end(), params.name(i)) == setup.frozen.end())
      trainable.push_back(i);
  }
  AdamState adam;
  const AdamConfig cfg{hyper.lr};

  TrainedModel model;
  model.spec = spec;
  model.transform = setup.transform;
  model.conv_weights = setup.conv_weights;

  ParameterSet best = params;
  double best_acc = -1.0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto masks = draw_dropout_masks(spec, graph.n_nodes, dropout_rng);
    Tape tape;
    BoundParams bp{&params, params.bind(tape, true)};
    std::vector<Var> train_vars;
    for (std::size_t i : trainable) train_vars.push_back(bp.vars[i]);
    Var x = tape.constant(graph.features);
    std::vector<Tensor> grads;
    double loss = 0.0;
    try {
      ForwardResult out = forward(tape, spec, bp, prop, model.transform, x, masks);
      Var task = ops::cross_entropy(out.logits, graph.labels, split.train);
      EpochContext ctx{tape, bp, train_vars, out, task, epoch, graph, split};
      if (hooks.observe) hooks.observe(ctx);
      Var objective = hooks.objective ? hooks.objective(ctx) : task;
      loss = objective.value()[0];
      if (!std::isfinite(loss)) throw DivergenceError(epoch);
      tape.backward(objective);
      grads = collect_grads(tape, train_vars);
      if (hooks.adjust_gradients) hooks.adjust_gradients(ctx, grads);
      if (hooks.auxiliary_step) hooks.auxiliary_step(ctx);
    } catch (const NonFiniteError&) {
      throw DivergenceError(epoch);
    }

    std::vector<Tensor> current;
    current.reserve(trainable.size());
    for (std::size_t i : trainable) current.push_back(params.at(i));
    add_weight_decay(grads, current, hyper.weight_decay);
    adam_step(current, grads, adam, cfg);
    for (std::size_t k = 0; k < trainable.size(); ++k) params.at(trainable[k]) = std::move(current[k]);
    model.log.loss.push_back(loss);

    Tape eval;
    BoundParams ebp{&params, params.bind(eval, false)};
    ForwardResult eo = forward(eval, spec, ebp, prop, model.transform,
                               eval.constant(graph.features), {});
    const double val = split.val.empty() ? 0.0 : accuracy_of(eo.logits.value(), graph.labels, split.val);
    model.log.val_accuracy.push_back(val);
    if (hyper.early_select && val > best_acc) {
      best_acc = val;
      best = params;
      model.log.best_epoch = epoch;
    }
  }
  if (hyper.early_select && hyper.epochs > 0) params = std::move(best);
  if (!hyper.early_select) model.log.best_epoch = hyper.epochs - 1;
  model.params = std::move(params);

  Tape tape;
  BoundParams bp{&model.params, model.params.bind(tape, false)};
  ForwardResult fin = forward(tape, spec, bp, prop, model.transform,
                              tape.constant(graph.features), {});
  model.embeddings = fin.embeddings.value();
  model.logits = fin.logits.value();
  return model;
}

TrainedModel train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                   const TrainHyper& hyper, const EdgeWeights* weights) {
  TrainSetup setup = baseline_setup(spec, hyper.seed);
  if (weights) setup.conv_weights = *weights;
  return train_with_hooks(std::move(setup), graph, split, hyper, {});
}

ForwardResult evaluate_forward(Tape& tape, const TrainedModel& model, const Graph& graph) {
  const Propagation prop = build_propagation(
      graph, model.conv_weights ? &*model.conv_weights : nullptr, model.spec.kind);
  BoundParams bp{&model.params, model.params.bind(tape, false)};
  return forward(tape, model.spec, bp, prop, model.transform, tape.constant(graph.features), {});
}

Prediction predict(const TrainedModel& model, const Graph& graph,
                   std::span<const std::size_t> nodes) {
  Tape tape;
  const Tensor logits = evaluate_forward(tape, model, graph).logits.value();
  Tensor sub(nodes.size(), logits.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    std::copy(logits.row(nodes[i]).begin(), logits.row(nodes[i]).end(), sub.row(i).begin());
  return predict_from_logits(sub);
}

namespace {

json tensor_json(const Tensor& t) {
  return json{{"rows", t.rows()}, {"cols", t.cols()}, {"values", t.values()}};
}

Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

constexpr const char* kCheckpointFormat = "fairgnn.checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  const ModelSpec& s = model.spec;
  j["spec"] = {{"kind", to_string(s.kind)},       {"layer_dims", s.layer_dims},
               {"n_classes", s.n_classes},        {"activation", to_string(s.activation)},
               {"dropout_p", s.dropout_p},        {"gat_heads", s.gat_heads},
               {"gin_eps", s.gin_eps},            {"gin_learn_eps", s.gin_learn_eps}};
  json tr;
  switch (model.transform.kind) {
    case EmbeddingTransform::Kind::identity: tr["kind"] = "identity"; break;
    case EmbeddingTransform::Kind::projection:
      tr["kind"] = "projection";
      tr["basis"] = tensor_json(*model.transform.basis);
      break;
    case EmbeddingTransform::Kind::filter:
      tr["kind"] = "filter";
      tr["filters"] = model.transform.filter_names;
      break;
  }
  j["transform"] = tr;
  j["conv_weights"] = model.conv_weights ? json(model.conv_weights->values) : json(nullptr);
  json params = json::array();
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    json p = tensor_json(model.params.at(i));
    p["name"] = model.params.name(i);
    params.push_back(std::move(p));
  }
  j["parameters"] = std::move(params);
  j["log"] = {{"loss", model.log.loss},
              {"val_accuracy", model.log.val_accuracy},
              {"best_epoch", model.log.best_epoch}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat)
    throw Error("checkpoint " + path.string() + ": not a fairgnn checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw Error("checkpoint " + path.string() + ": unsupported version");
  TrainedModel m;
  const json& s = j.at("spec");
  m.spec.kind = parse_model_kind(s.at("kind").get<std::string>());
  m.spec.layer_dims = s.at("layer_dims").get<std::vector<std::size_t>>();
  m.spec.n_classes = s.at("n_classes").get<int>();
  m.spec.activation = parse_activation(s.at("activation").get<std::string>());
  m.spec.dropout_p = s.at("dropout_p").get<double>();
  m.spec.gat_heads = s.at("gat_heads").get<int>();
  m.spec.gin_eps = s.at("gin_eps").get<double>();
  m.spec.gin_learn_eps = s.at("gin_learn_eps").get<bool>();
  m.spec.validate();
  const json& tr = j.at("transform");
  const std::string kind = tr.at("kind").get<std::string>();
  if (kind == "projection") {
    m.transform.kind = EmbeddingTransform::Kind::projection;
    m.transform.basis = std::make_shared<const Tensor>(tensor_from_json(tr.at("basis")));
  } else if (kind == "filter") {
    m.transform.kind = EmbeddingTransform::Kind::filter;
    m.transform.filter_names = tr.at("filters").get<std::vector<std::string>>();
  }
  if (!j.at("conv_weights").is_null())
    m.conv_weights = EdgeWeights{j.at("conv_weights").get<std::vector<double>>()};
  for (const json& p : j.at("parameters")) m.params.add(p.at("name").get<std::string>(), tensor_from_json(p));
  const json& log = j.at("log");
  m.log.loss = log.at("loss").get<std::vector<double>>();
  m.log.val_accuracy = log.at("val_accuracy").get<std::vector<double>>();
  m.log.best_epoch = log.at("best_epoch").get<int>();
  return m;
}

}  // namespace fairgnn
