#pragma once

#include <span>
#include <string>
#include <vector>

#include "fairgnn/models.hpp"

namespace fairgnn {

enum class Method { none, adv_debias, embed_proj, edge_weight, filter, fair_learn, ew_ad, ew_flpar };
enum class FairMode { par, eoo };

std::string to_string(Method m);
Method parse_method(const std::string& text);
std::string to_string(FairMode m);
FairMode parse_fair_mode(const std::string& text);

struct InterventionParams {
  Method method = Method::none;
  /// Adversary strength.
  double alpha = 0.0;
  /// Covariance-penalty strength (adv_debias, ew_ad).
  double beta = 0.0;
  /// Filter penalty.
  double lambda = 0.0;
  FairMode mode = FairMode::par;

  void validate() const;
};

/// FairWalk weights: w(v->u) = 1 / (|G(v)| * |N_{g(u)}(v)|), so every
/// neighbor group of v receives total mass 1/|G(v)|. Aligned with adjacency.
EdgeWeights fairwalk_weights(const Graph& graph, const std::vector<int>& groups);

/// FairWalk weights rescaled per row by deg(v) for use as convolution
/// weights. A node whose neighbors all share one group gets weights of
/// exactly 1, so a single-group attribute reproduces the unweighted model.
EdgeWeights fairwalk_conv_weights(const Graph& graph, const std::vector<int>& groups);

/// Orthonormal basis of the centered group-indicator columns (n x k').
/// Empty groups and linearly dependent columns are dropped.
Tensor sensitive_basis(const std::vector<int>& groups);

/// Z - S (S^T Z) with S = sensitive_basis(groups).
Tensor project_embeddings(const Tensor& z, const std::vector<int>& groups);

/// proj_b(a) = (a . b / |b|^2) b, and zero when b = 0.
Tensor project_onto(const Tensor& a, const Tensor& b);

/// Gradient correction of adversarial fair learning:
///   g_P - proj_{g_A}(g_P) - alpha * g_A
Tensor fair_learn_gradient(const Tensor& g_pred, const Tensor& g_adv, double alpha);

/// Model objective of adversarial debiasing:
///   L_cls - alpha * L_adv + beta * sum |cov(s_hat_g, y_hat_c)|
/// over posterior columns g >= 1, c >= 1, covariance taken over `rows`.
/// Terms whose coefficient is zero are not recorded.
Var adv_debias_objective(Var task_loss, Var adv_loss, Var adv_logits, Var task_logits,
                         std::span<const std::size_t> rows, double alpha, double beta);

/// L_cls - lambda * sum_a L_{D_a}.
Var filter_objective(Var task_loss, std::span<const Var> discriminator_losses, double lambda);

struct AdversaryOptions {
  std::size_t hidden = 32;
  /// Adversary learning rate; 0 uses the model's.
  double lr = 0.0;
  /// Train only the adversary (the GNN and head stay at initialization).
  bool freeze_model = false;
  /// Zero-initialize the adversary network.
  bool zero_init = false;
};

/// Filled by interventions that train auxiliary networks.
struct AdversaryReport {
  /// Accuracy of the final adversary / discriminators on test nodes, using
  /// the model's final eval-mode embeddings.
  std::vector<double> test_accuracy;
};

TrainedModel embed_proj_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, const EdgeWeights* weights = nullptr,
                              const std::function<void(EpochContext&)>& observe = {});

TrainedModel edge_weight_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                               const TrainHyper& hyper);

TrainedModel adv_debias_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, double alpha, double beta,
                              const EdgeWeights* weights = nullptr, AdversaryOptions options = {},
                              AdversaryReport* report = nullptr);

TrainedModel fair_learn_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, double alpha, FairMode mode,
                              const EdgeWeights* weights = nullptr, AdversaryOptions options = {});

struct FilterOptions {
  std::size_t hidden = 32;
  std::size_t discriminator_hidden = 32;
  /// Zero W1 as well as W2: the filter is the identity and stays there
  /// unless the penalty pushes it.
  bool all_zero = false;
};

/// One filter per attribute, composed in the given order.
TrainedModel filter_train(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                          const TrainHyper& hyper, double lambda,
                          std::span<const AttributeRole> attrs, FilterOptions options = {},
                          AdversaryReport* report = nullptr);

/// Dispatches on params.method; combined methods compute FairWalk weights on
/// the fairness attribute first.
TrainedModel run_intervention(const ModelSpec& spec, const Graph& graph, const NodeSplit& split,
                              const TrainHyper& hyper, const InterventionParams& params);

}  // namespace fairgnn
