#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairgnn/tensor.hpp"

namespace fairgnn {

inline constexpr int kUnlabeled = -1;

/// Raw node attribute cells as read from disk, column-major.
struct AttributeTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells;

  const std::vector<std::string>* find(const std::string& column) const;
};

enum class AttributeRole { label, fairness, privacy };

/// Node-attributed undirected graph.
///
/// `adjacency` is symmetric with unit values and no stored self-loops.
/// Unlabeled nodes (label == kUnlabeled) take part in message passing but
/// never in losses or metrics. `fairness` / `privacy` may be kUnlabeled for
/// unlabeled nodes only.
struct Graph {
  std::size_t n_nodes = 0;
  SparseMatrix adjacency;
  Tensor features;
  std::vector<std::string> feature_names;
  /// Per feature column: true if z-score normalization applies.
  std::vector<bool> continuous;
  std::vector<int> labels;
  std::vector<int> fairness;
  std::vector<int> privacy;
  /// Optional per-stored-entry weights aligned with adjacency.values().
  std::optional<std::vector<double>> edge_weights;
  /// Raw attribute column count (excluding the id column).
  std::size_t n_attributes = 0;
  std::vector<std::string> node_ids;
  AttributeTable raw;

  int n_classes() const;
  int n_groups(AttributeRole role) const;
  const std::vector<int>& attribute(AttributeRole role) const;
  std::vector<std::size_t> labeled_nodes() const;
  std::size_t degree(std::size_t v) const {
    return adjacency.row_end(v) - adjacency.row_begin(v);
  }
  /// Throws if any structural invariant is violated.
  void validate() const;
};

/// Builds a symmetric unit-weight adjacency from undirected pairs.
/// Duplicates and reversed duplicates collapse; self-loops are dropped.
SparseMatrix symmetric_adjacency(std::size_t n,
                                 std::span<const std::pair<std::size_t, std::size_t>> edges);

struct DerivationRule {
  enum class Kind { identity, median_threshold, quantile_bins, category_select };
  Kind kind = Kind::identity;
  /// Bin count for quantile_bins, category count for category_select.
  int k = 0;

  static DerivationRule parse(const std::string& text);
  std::string to_string() const;
};

struct RoleColumn {
  std::string column;
  DerivationRule rule;
};

struct TabularSchema {
  std::string id_column = "user_id";
  RoleColumn label;
  RoleColumn fairness;
  std::optional<RoleColumn> privacy;
  /// Feature columns; empty means every column not used as id or role.
  std::vector<std::string> features;
  std::vector<std::string> categorical;
  std::vector<std::string> exclude;
  bool edges_header = false;
};

/// Reads a CSV/TSV node table plus an edge list of id pairs.
Graph load_tabular_graph(const std::filesystem::path& nodes_file,
                         const std::filesystem::path& edges_file, const TabularSchema& schema);

/// Attaches an attribute derived from a raw column in the given role.
Graph derive_attribute(const Graph& graph, const std::string& column, const DerivationRule& rule,
                       AttributeRole role);

/// Induced subgraph on nodes whose `column` value starts with `prefix`,
/// restricted to its largest connected component.
Graph extract_region(const Graph& graph, const std::string& column, const std::string& prefix);

/// Re-applies z-scoring to continuous columns with statistics from `nodes`.
Graph standardize_features(const Graph& graph, std::span<const std::size_t> nodes);

struct NodeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct SplitFractions {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;
};

NodeSplit make_splits(const Graph& graph, SplitFractions fractions, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_nodes = 1000;
  int n_groups = 2;
  double intra_group_edge_prob = 0.02;
  double inter_group_edge_prob = 0.002;
  double label_group_correlation = 0.9;
  std::size_t feature_dim = 8;
  double feature_noise_sd = 1.0;
  /// Magnitude of the one-hot(label) block in the features.
  double feature_scale = 1.0;
  /// Privacy attribute drawn uniformly, encoded as a scaled one-hot block.
  int n_privacy_groups = 2;
  double privacy_feature_scale = 0.5;

  void validate() const;
};

Graph generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

struct DatasetStats {
  std::size_t n_nodes = 0;
  std::size_t n_edges = 0;
  std::size_t n_attributes = 0;
  double pct_labeled = 0.0;
};

DatasetStats summarize(const Graph& graph);

}  // namespace fairgnn
