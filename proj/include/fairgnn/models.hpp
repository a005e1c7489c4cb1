#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairgnn/autodiff.hpp"
#include "fairgnn/dataset.hpp"
#include "fairgnn/optim.hpp"

namespace fairgnn {

class Rng;

enum class ModelKind { gcn, sage, gat, gin };
enum class Activation { relu, tanh, identity };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

struct ModelSpec {
  ModelKind kind = ModelKind::gcn;
  /// input -> hidden ... -> embedding. At least two entries.
  std::vector<std::size_t> layer_dims;
  int n_classes = 2;
  Activation activation = Activation::relu;
  double dropout_p = 0.5;
  int gat_heads = 4;
  double gin_eps = 0.0;
  bool gin_learn_eps = true;

  std::size_t embedding_dim() const { return layer_dims.back(); }
  std::size_t n_layers() const { return layer_dims.size() - 1; }
  void validate() const;

  /// Two GNN layers of width `hidden` over `input_dim` features.
  static ModelSpec standard(ModelKind kind, std::size_t input_dim, std::size_t hidden,
                            int n_classes);
};

/// Per-stored-adjacency-entry convolution weights (row v, column u holds
/// the weight of v aggregating from u). Strictly positive.
struct EdgeWeights {
  std::vector<double> values;
};

enum class NormalizationMode { sym, row };

/// Adjacency with self-loops, weighted and normalized.
///   sym: D^-1/2 (A+I).W D^-1/2     row: D^-1 (A+I).W
/// D is the weighted row degree. The self-loop weight of a node is the mean of
/// its outgoing edge weights (1 when unweighted or isolated), so a uniform
/// rescaling of all weights leaves the sym-normalized matrix unchanged.
SparseMatrix normalize_adjacency(const Graph& graph, const EdgeWeights* weights,
                                 NormalizationMode mode);

/// Precomputed sparse operators a forward pass needs.
struct Propagation {
  std::shared_ptr<const SparseMatrix> gcn;
  std::shared_ptr<const SparseMatrix> neighbor_mean;
  std::shared_ptr<const SparseMatrix> neighbor_sum;
  std::shared_ptr<const SparseMatrix> attention_pattern;
  /// log of attention-pattern weights; empty when all weights are 1.
  std::vector<double> attention_log_weights;
};

Propagation build_propagation(const Graph& graph, const EdgeWeights* weights, ModelKind kind);

/// Post-encoder embedding transform (identity, orthogonal projection, or a
/// chain of residual filters). Part of every forward pass once attached.
struct EmbeddingTransform {
  enum class Kind { identity, projection, filter };
  Kind kind = Kind::identity;
  std::shared_ptr<const Tensor> basis;
  std::vector<std::string> filter_names;
};

/// Parameters bound to one tape, addressable by name.
struct BoundParams {
  const ParameterSet* set = nullptr;
  std::vector<Var> vars;
  Var operator[](const std::string& name) const { return vars[set->index_of(name)]; }
};

ParameterSet init_parameters(const ModelSpec& spec, Rng& rng);
/// Adds zero-initialized-output filter parameters named filter.<name>.*.
/// With `all_zero` the filter is the identity and a fixed point of training.
void add_filter_parameters(ParameterSet& params, const std::string& name, std::size_t dim,
                           std::size_t hidden, bool all_zero, Rng& rng);

/// Dropout masks for each layer input; empty when dropout_p == 0.
std::vector<Tensor> draw_dropout_masks(const ModelSpec& spec, std::size_t n_nodes, Rng& rng);

struct ForwardResult {
  Var embeddings;
  Var logits;
};

/// GNN encoder, embedding transform and linear head. `masks` empty = eval mode.
ForwardResult forward(Tape& tape, const ModelSpec& spec, const BoundParams& params,
                      const Propagation& prop, const EmbeddingTransform& transform, Var features,
                      std::span<const Tensor> masks);

/// Encoder only (the raw embeddings before any transform).
Var encode(Tape& tape, const ModelSpec& spec, const BoundParams& params, const Propagation& prop,
           Var features, std::span<const Tensor> masks);
Var apply_transform(const EmbeddingTransform& transform, const BoundParams& params, Var z);

struct TrainHyper {
  double lr = 0.01;
  int epochs = 200;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  /// Keep the parameters of the best validation-accuracy epoch.
  bool early_select = true;
};

struct TrainingLog {
  std::vector<double> loss;
  std::vector<double> val_accuracy;
  int best_epoch = -1;
};

struct TrainedModel {
  ModelSpec spec;
  ParameterSet params;
  EmbeddingTransform transform;
  std::optional<EdgeWeights> conv_weights;
  TrainingLog log;
  /// Final eval-mode embeddings (after transform) and logits for all nodes.
  Tensor embeddings;
  Tensor logits;
};

/// State visible to training hooks during one epoch.
struct EpochContext {
  Tape& tape;
  const BoundParams& params;
  const std::vector<Var>& trainable;
  ForwardResult out;
  Var task_loss;
  int epoch;
  const Graph& graph;
  const NodeSplit& split;
};

/// Extension points used by the fairness interventions.
struct TrainingHooks {
  /// Builds the model objective from the task loss.
  std::function<Var(EpochContext&)> objective;
  /// Rewrites model gradients before the optimizer step.
  std::function<void(EpochContext&, std::vector<Tensor>&)> adjust_gradients;
  /// Steps auxiliary networks (adversaries, discriminators).
  std::function<void(EpochContext&)> auxiliary_step;
  /// Observes every training forward pass.
  std::function<void(EpochContext&)> observe;
};

/// Everything train_with_hooks needs besides the graph and split.
struct TrainSetup {
  ModelSpec spec;
  ParameterSet params;
  EmbeddingTransform transform;
  std::optional<EdgeWeights> conv_weights;
  /// Names of parameters the optimizer updates; empty means all.
  std::vector<std::string> frozen;
};

TrainSetup baseline_setup(const ModelSpec& spec, std::uint64_t seed);

TrainedModel train_with_hooks(TrainSetup setup, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, const TrainingHooks& hooks);

/// Cross-entropy training on train nodes with early selection on validation accuracy.
TrainedModel train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                   const TrainHyper& hyper, const EdgeWeights* weights = nullptr);

struct Prediction {
  Tensor posteriors;
  std::vector<int> labels;
};

/// Hard label = argmax with lowest-index tie-break.
Prediction predict_from_logits(const Tensor& logits);
Prediction predict(const TrainedModel& model, const Graph& graph,
                   std::span<const std::size_t> nodes);

/// Eval-mode logits / embeddings of `params` on `graph`.
ForwardResult evaluate_forward(Tape& tape, const TrainedModel& model, const Graph& graph);

double accuracy_of(const Tensor& logits, const std::vector<int>& labels,
                   std::span<const std::size_t> nodes);

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fairgnn
