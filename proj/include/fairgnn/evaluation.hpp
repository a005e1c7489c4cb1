#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairgnn/dataset.hpp"
#include "fairgnn/models.hpp"

namespace fairgnn {

/// Fraction of `nodes` with preds[v] == labels[v]. Throws on an empty set.
double accuracy(std::span<const int> preds, std::span<const int> labels,
                std::span<const std::size_t> nodes);

/// max over groups a, a' of |P(Y_hat = c | A = a) - P(Y_hat = c | A = a')|.
/// Binary tasks use c = 1; with more classes the maximum over one-vs-rest
/// classes is reported. Groups absent from `nodes` are skipped with a warning.
/// `n_classes` <= 0 infers the class count from preds.
double statistical_parity_diff(std::span<const int> preds, std::span<const int> groups,
                               std::span<const std::size_t> nodes, int n_classes = 0);

/// Maximum pairwise true-positive-rate gap over groups that have positives.
/// Throws when no group has a positive node.
double equal_opportunity_diff(std::span<const int> preds, std::span<const int> labels,
                              std::span<const int> groups, std::span<const std::size_t> nodes,
                              int n_classes = 0);

struct ProbeConfig {
  int epochs = 500;
  double lr = 0.1;
  double l2 = 1e-4;
};

/// Test accuracy of a multinomial logistic-regression probe fitted on the
/// train rows of z (columns standardized with train statistics) by full-batch
/// gradient descent from zero weights. Rows with attr < 0 are ignored.
double attribute_leakage(const Tensor& z, std::span<const int> attr, const NodeSplit& split,
                         const ProbeConfig& config = {});

struct MetricRecord {
  std::string dataset;
  std::string model_kind;
  std::string method;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  std::string mode;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  double accuracy = 0.0;
  double delta_sp = 0.0;
  double delta_eo = 0.0;
  double fair_leak = 0.0;
  double priv_leak = 0.0;
  double mia_tree = 0.0;
  double mia_mlp = 0.0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct AttackResults {
  double mia_tree = 0.0;
  double mia_mlp = 0.0;
};

/// Test-split accuracy / fairness, leakage of both attributes from the final
/// embeddings, and the given attack accuracies. Provenance fields are left
/// for the caller.
MetricRecord evaluate_all(const TrainedModel& trained, const Graph& graph, const NodeSplit& split,
                          const AttackResults& attacks);

}  // namespace fairgnn
