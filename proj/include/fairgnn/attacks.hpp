#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fairgnn/dataset.hpp"
#include "fairgnn/evaluation.hpp"
#include "fairgnn/mlp.hpp"
#include "fairgnn/models.hpp"

namespace fairgnn {

/// One row per attacked node:
///   [posteriors sorted descending..., cross-entropy loss, p1 - p2]
/// `member` is 1 for training nodes.
struct AttackFeatures {
  Tensor x;
  std::vector<int> member;
  std::vector<std::size_t> nodes;
};

/// Features for the given member / non-member nodes from raw logits.
AttackFeatures attack_features(const Tensor& logits, const std::vector<int>& labels,
                               std::span<const std::size_t> members,
                               std::span<const std::size_t> non_members);

/// Members are train nodes, non-members test nodes; the larger side is
/// subsampled so both counts are equal.
AttackFeatures build_attack_features(const TrainedModel& model, const Graph& graph,
                                     const NodeSplit& split, std::uint64_t seed);

enum class AttackerKind { tree, mlp };

struct TreeConfig {
  int rounds = 50;
  int depth = 3;
  double lr = 0.1;
  int bins = 32;
  double lambda = 1.0;
};

struct MlpAttackConfig {
  std::vector<std::size_t> hidden{32, 16};
  int epochs = 300;
  double lr = 0.01;
};

/// Fitted binary attacker (gradient-boosted trees or an MLP).
class Attacker {
 public:
  AttackerKind kind() const { return kind_; }
  /// P(member) per row.
  std::vector<double> predict_proba(const Tensor& x) const;
  std::vector<int> predict(const Tensor& x) const;

  friend Attacker fit_tree_attacker(const Tensor&, std::span<const int>, const TreeConfig&);
  friend Attacker fit_mlp_attacker(const Tensor&, std::span<const int>, const MlpAttackConfig&,
                                   std::uint64_t);

 private:
  struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    int left = -1;
    int right = -1;
  };
  AttackerKind kind_ = AttackerKind::tree;
  double base_score_ = 0.0;
  std::vector<std::vector<TreeNode>> trees_;
  std::vector<double> mean_, sd_;
  Mlp mlp_;
  ParameterSet params_;
};

/// Logistic-loss boosting with histogram splits. Deterministic.
Attacker fit_tree_attacker(const Tensor& x, std::span<const int> labels, const TreeConfig& config = {});
/// Softmax MLP [in, hidden..., 2] trained full-batch with Adam.
Attacker fit_mlp_attacker(const Tensor& x, std::span<const int> labels,
                          const MlpAttackConfig& config = {}, std::uint64_t seed = 0);

/// Fits the attacker on a membership-stratified half of the features and
/// returns its accuracy on the other half.
double attack_accuracy(const AttackFeatures& features, AttackerKind kind, std::uint64_t seed);

double mia_accuracy(const TrainedModel& model, const Graph& graph, const NodeSplit& split,
                    AttackerKind kind, std::uint64_t seed);

/// Both attackers on one shared feature set.
AttackResults run_attacks(const TrainedModel& model, const Graph& graph, const NodeSplit& split,
                          std::uint64_t seed);

}  // namespace fairgnn
